"""Finitely supported Laurent polynomials on the unit circle."""

from __future__ import annotations

import numpy as np

from .angles import AngleArray, BinaryAngle


class LaurentPoly:
    """``f(z) = sum(a_n z**n for n in [-N, N])``.

    Coefficients live in a dense array ``coeffs`` of length ``2N + 1`` with
    ``coeffs[n + N] = a_n``.  Instances are treated as immutable.
    """

    __slots__ = ("coeffs", "degree")

    def __init__(self, coeffs, degree=None):
        if isinstance(coeffs, dict):
            if degree is None:
                degree = max((abs(int(n)) for n in coeffs), default=0)
            arr = np.zeros(2 * degree + 1, dtype=complex)
            for n, a in coeffs.items():
                if abs(n) > degree:
                    raise ValueError(f"degree {n} exceeds bound {degree}")
                arr[int(n) + degree] = a
        else:
            arr = np.array(coeffs, dtype=complex)
            if arr.ndim != 1 or arr.size % 2 == 0:
                raise ValueError("dense coefficients must have odd length 2N + 1")
            if degree is not None and arr.size != 2 * degree + 1:
                raise ValueError("length does not match degree")
            degree = arr.size // 2
        arr.setflags(write=False)
        self.coeffs = arr
        self.degree = degree

    @classmethod
    def monomial(cls, n, a=1.0):
        return cls({n: a})

    @classmethod
    def from_samples(cls, values, degree):
        """Fourier coefficients of ``values`` sampled on ``M`` equispaced points.

        Exact (up to rounding) when the samples come from a Laurent polynomial
        of degree ``< M / 2``; otherwise the coefficients are aliased.
        """
        values = np.asarray(values, dtype=complex)
        m = values.size
        if 2 * degree + 1 > m:
            raise ValueError(f"need at least {2 * degree + 1} samples for degree {degree}")
        fhat = np.fft.fft(values) / m
        n = np.arange(-degree, degree + 1)
        return cls(fhat[n % m], degree)

    @classmethod
    def from_function(cls, func, degree, samples=None):
        """Coefficients of a continuous function via equispaced sampling."""
        m = samples or max(8 * (2 * degree + 1), 64)
        t = np.arange(m) / m
        z = np.exp(2j * np.pi * t)
        return cls.from_samples(func(z), degree)

    def __getitem__(self, n):
        if abs(n) > self.degree:
            return 0j
        return complex(self.coeffs[n + self.degree])

    def items(self):
        for n in range(-self.degree, self.degree + 1):
            a = self.coeffs[n + self.degree]
            if a != 0:
                yield n, complex(a)

    def __call__(self, z):
        """Evaluate at complex points, a :class:`BinaryAngle` or an :class:`AngleArray`."""
        if isinstance(z, BinaryAngle):
            z = z.to_complex()
        elif isinstance(z, AngleArray):
            z = z.to_complex()
        z = np.asarray(z, dtype=complex)
        N = self.degree
        # Horner in z from the top coefficient, then shift by z**-N
        acc = np.zeros_like(z)
        for a in self.coeffs[::-1]:
            acc = acc * z + a
        out = acc * z ** (-N)
        return out if out.ndim else complex(out)

    def _binary(self, other, op):
        if not isinstance(other, LaurentPoly):
            other = LaurentPoly([other])
        N = max(self.degree, other.degree)
        a = np.zeros(2 * N + 1, dtype=complex)
        b = np.zeros(2 * N + 1, dtype=complex)
        a[N - self.degree: N + self.degree + 1] = self.coeffs
        b[N - other.degree: N + other.degree + 1] = other.coeffs
        return LaurentPoly(op(a, b), N)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return LaurentPoly(self.coeffs * complex(scalar), self.degree)

    __rmul__ = __mul__

    def shift(self, k):
        """``z**k * f(z)``."""
        N = self.degree + abs(k)
        out = np.zeros(2 * N + 1, dtype=complex)
        out[N - self.degree + k: N + self.degree + k + 1] = self.coeffs
        return LaurentPoly(out, N)

    def conj_reflect(self):
        """``f(1/z)``: reverses the coefficient order."""
        return LaurentPoly(self.coeffs[::-1].copy(), self.degree)

    def allclose(self, other, atol=1e-12):
        diff = self - other
        return bool(np.all(np.abs(diff.coeffs) <= atol))

    def holder_certificate(self):
        """``(1, sum |n a_n|)``: a Lipschitz bound in chordal distance."""
        n = np.arange(-self.degree, self.degree + 1)
        return 1.0, float(np.sum(np.abs(n * self.coeffs)))

    def l1_norm(self):
        return float(np.sum(np.abs(self.coeffs)))

    def __repr__(self):
        terms = ", ".join(f"{n}: {a:.6g}" for n, a in self.items())
        return f"LaurentPoly({{{terms}}}, degree={self.degree})"


def fejer_sum(f, n):
    """Cesàro mean ``p_n`` of the Fourier series of ``f``.

    ``p_n`` has coefficients ``(1 - |j|/(n+1)) a_j`` for ``|j| <= n``.  ``f``
    may be a :class:`LaurentPoly` or a callable on complex arrays, in which
    case its coefficients are estimated from ``8(2n+1)`` equispaced samples.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not isinstance(f, LaurentPoly):
        f = LaurentPoly.from_function(f, n, samples=max(64, 8 * (2 * n + 1)))
    j = np.arange(-n, n + 1)
    a = np.array([f[int(k)] for k in j])
    return LaurentPoly((1.0 - np.abs(j) / (n + 1.0)) * a, n)


def negative_part(f):
    """Keep exactly the coefficients of negative degree."""
    out = np.array(f.coeffs)
    out[f.degree:] = 0.0
    return LaurentPoly(out, f.degree)
