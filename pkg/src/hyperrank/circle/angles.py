"""Points of the unit circle stored as fixed-point binary fractions of a turn.

A point ``z = exp(2*pi*i*t)`` is kept as the integer ``bits = t * 2**B``.
Raising ``z`` to the power ``2**k`` is then a left shift with wrap-around,
which stays exact no matter how large ``k`` gets, as long as enough low
bits remain to resolve the result to double precision.

:class:`BinaryAngle` is the scalar type; :class:`AngleArray` holds many
angles as rows of 64-bit words for vectorised evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import PrecisionExhausted

DEFAULT_PRECISION = 256
# bits that must survive a shift for the result to be known to double precision
MANTISSA_BITS = 53

_TWO_PI = 2.0 * math.pi
_U64 = np.uint64


def _check_precision(precision):
    if precision <= 0 or precision % 64:
        raise ValueError(f"precision must be a positive multiple of 64, got {precision}")


@dataclass(frozen=True, order=True)
class BinaryAngle:
    """Fraction of a full turn ``t = bits / 2**precision`` in ``[0, 1)``."""

    bits: int
    precision: int = DEFAULT_PRECISION

    def __post_init__(self):
        _check_precision(self.precision)
        if not 0 <= self.bits < (1 << self.precision):
            raise ValueError("bits out of range for precision")

    # -- construction ---------------------------------------------------
    @classmethod
    def from_fraction(cls, t, precision=DEFAULT_PRECISION):
        """Round ``t mod 1`` (int, Fraction, float or str) down to ``precision`` bits."""
        t = Fraction(t) % 1
        bits = (t.numerator << precision) // t.denominator
        return cls(bits, precision)

    @classmethod
    def from_hex(cls, text, precision=DEFAULT_PRECISION):
        digits = text.lower()
        if digits.startswith("0x."):
            digits = digits[3:]
        elif digits.startswith("0."):
            digits = digits[2:]
        ndig = precision // 4
        if len(digits) > ndig:
            raise ValueError("hex fraction longer than precision")
        return cls(int(digits.ljust(ndig, "0") or "0", 16), precision)

    @classmethod
    def zero(cls, precision=DEFAULT_PRECISION):
        return cls(0, precision)

    # -- rendering --------------------------------------------------------
    def hex(self):
        """Lowercase hex fraction, e.g. ``0x.4000...``; trailing zeros kept."""
        return "0x." + format(self.bits, "0{}x".format(self.precision // 4))

    def __str__(self):
        return self.hex()

    def as_fraction(self):
        return Fraction(self.bits, 1 << self.precision)

    def to_float(self):
        """``t`` rounded to the nearest double."""
        shift = self.precision - 64
        return float(self.bits >> shift) * 2.0**-64 if shift > 0 else self.bits * 2.0**-self.precision

    def to_complex(self):
        theta = _TWO_PI * self.to_float()
        return complex(math.cos(theta), math.sin(theta))

    # -- arithmetic -------------------------------------------------------
    def pow2(self, k):
        """Angle of ``z**(2**k)``: the fractional part of ``2**k * t``."""
        return angle_pow2(self, k)

    def conj(self):
        """Angle of ``1/z = conj(z)``."""
        return BinaryAngle((-self.bits) % (1 << self.precision), self.precision)

    def __add__(self, other):
        if not isinstance(other, BinaryAngle):
            return NotImplemented
        self._same(other)
        return BinaryAngle((self.bits + other.bits) % (1 << self.precision), self.precision)

    def __sub__(self, other):
        if not isinstance(other, BinaryAngle):
            return NotImplemented
        self._same(other)
        return BinaryAngle((self.bits - other.bits) % (1 << self.precision), self.precision)

    def _same(self, other):
        if other.precision != self.precision:
            raise ValueError("angles of different precision")


def angle_pow2(t, k):
    """Fractional part of ``2**k * t``, computed exactly by a wrapped shift.

    Raises :class:`PrecisionExhausted` when fewer than 53 bits would remain
    below the binary point, since the result would then be known to worse
    than double precision.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > t.precision - MANTISSA_BITS:
        raise PrecisionExhausted(
            f"shift by {k} leaves fewer than {MANTISSA_BITS} of {t.precision} bits"
        )
    mask = (1 << t.precision) - 1
    return BinaryAngle((t.bits << k) & mask, t.precision)


def chord(s, t):
    """Chordal distance ``|e(s) - e(t)| = 2|sin(pi (s - t))|`` for turn fractions."""
    return 2.0 * np.abs(np.sin(np.pi * (np.asarray(s, dtype=float) - np.asarray(t, dtype=float))))


def chord_exact(a, b):
    """Chordal distance between two :class:`BinaryAngle` values.

    The difference is formed exactly before rounding, so tiny separations
    keep full relative accuracy.
    """
    d = (a - b).to_float()
    d = min(d, 1.0 - d)
    return 2.0 * math.sin(math.pi * d)


class AngleArray:
    """A vector of angles, each stored as ``W`` big-endian 64-bit words."""

    def __init__(self, words, precision=DEFAULT_PRECISION):
        _check_precision(precision)
        words = np.ascontiguousarray(words, dtype=_U64)
        if words.ndim != 2 or words.shape[1] != precision // 64:
            raise ValueError("words must have shape (n, precision // 64)")
        self.words = words
        self.precision = precision
        self.words.setflags(write=False)

    # -- construction ---------------------------------------------------
    @classmethod
    def from_bits(cls, ints, precision=DEFAULT_PRECISION):
        nwords = precision // 64
        out = np.zeros((len(ints), nwords), dtype=_U64)
        mask = (1 << 64) - 1
        for i, b in enumerate(ints):
            for j in range(nwords):
                out[i, nwords - 1 - j] = (b >> (64 * j)) & mask
        return cls(out, precision)

    @classmethod
    def from_angles(cls, angles, precision=None):
        angles = list(angles)
        if precision is None:
            precision = angles[0].precision if angles else DEFAULT_PRECISION
        return cls.from_bits([a.bits for a in angles], precision)

    @classmethod
    def from_u64(cls, top, precision=DEFAULT_PRECISION, low=None):
        """Angles whose leading 64 bits are ``top``; ``low`` fills the rest."""
        top = np.asarray(top, dtype=_U64).reshape(-1)
        nwords = precision // 64
        out = np.zeros((top.size, nwords), dtype=_U64)
        out[:, 0] = top
        if low is not None and nwords > 1:
            out[:, 1:] = np.asarray(low, dtype=_U64).reshape(top.size, nwords - 1)
        return cls(out, precision)

    @classmethod
    def from_floats(cls, t, precision=DEFAULT_PRECISION, rng=None):
        """Angles from doubles in ``[0, 1)``.

        The 53-bit mantissa of each double is exact.  When ``rng`` is given the
        bits below it are filled with random words, so that high powers of the
        points do not all collapse onto ``1``.
        """
        t = np.mod(np.asarray(t, dtype=float).reshape(-1), 1.0)
        # exact: t * 2**53 is an integer for every double in [0, 1) with exponent >= -11
        top = np.floor(np.ldexp(t, 64)).astype(np.float64)
        top = np.minimum(top, np.ldexp(1.0, 64) - 2048.0)
        top_u = top.astype(_U64)
        nwords = precision // 64
        low = None
        if rng is not None:
            low = rng.integers(0, 2**64, size=(t.size, nwords - 1), dtype=_U64, endpoint=False) if nwords > 1 else None
            if low is not None:
                # spare bits of the first word are also free
                top_u = top_u | (rng.integers(0, 2048, size=t.size, dtype=_U64) & np.uint64(0x7FF))
        return cls.from_u64(top_u, precision, low)

    # -- access -----------------------------------------------------------
    def __len__(self):
        return self.words.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            row = self.words[idx]
            bits = 0
            for w in row:
                bits = (bits << 64) | int(w)
            return BinaryAngle(bits, self.precision)
        return AngleArray(self.words[idx], self.precision)

    def to_bits(self):
        return [self[i].bits for i in range(len(self))]

    def hex(self):
        return ["0x." + "".join(format(int(w), "016x") for w in row) for row in self.words]

    def top64(self, k=0):
        """Leading 64 bits of the fractional part of ``2**k * t`` (uint64)."""
        if k < 0:
            raise ValueError("k must be non-negative")
        if k > self.precision - MANTISSA_BITS:
            raise PrecisionExhausted(
                f"shift by {k} leaves fewer than {MANTISSA_BITS} of {self.precision} bits"
            )
        q, r = divmod(k, 64)
        nwords = self.words.shape[1]
        hi = self.words[:, q]
        if r == 0:
            return hi.copy()
        lo = self.words[:, q + 1] if q + 1 < nwords else np.zeros(len(self), dtype=_U64)
        return (hi << _U64(r)) | (lo >> _U64(64 - r))

    def phase(self, k=0):
        """Fractional part of ``2**k * t`` rounded to double."""
        return np.ldexp((self.top64(k) >> _U64(11)).astype(np.float64), -53)

    def to_float(self):
        return self.phase(0)

    def exp(self, k=0):
        """``z**(2**k)`` for every point."""
        theta = _TWO_PI * self.phase(k)
        return np.cos(theta) + 1j * np.sin(theta)

    def to_complex(self):
        return self.exp(0)

    def conj(self):
        """Angles of ``1/z``: two's complement negation across the words."""
        inv = ~self.words
        out = inv.copy()
        carry = np.ones(len(self), dtype=bool)
        for j in range(out.shape[1] - 1, -1, -1):
            new = out[:, j] + carry.astype(_U64)
            carry = carry & (new == 0)
            out[:, j] = new
        return AngleArray(out, self.precision)


def offsets(base, u):
    """Angles ``base + u`` for float offsets ``u`` in ``[-1/2, 1/2)`` turns.

    The offset is rounded to a multiple of ``2**-64`` and added to the exact
    base, so nodes clustered around ``base`` keep their exact separation.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if np.any(np.abs(u) > 0.5):
        raise ValueError("offsets must lie in [-1/2, 1/2]")
    delta = np.rint(np.ldexp(u, 64))
    delta = np.clip(delta, -(2.0**63), 2.0**63 - 1024.0).astype(np.int64).view(_U64)
    rows = AngleArray.from_angles([base]).words
    words = np.repeat(rows, u.size, axis=0)
    words[:, 0] = words[:, 0] + delta
    return AngleArray(words, base.precision)


def concat(arrays):
    arrays = list(arrays)
    precision = arrays[0].precision
    return AngleArray(np.concatenate([a.words for a in arrays], axis=0), precision)
