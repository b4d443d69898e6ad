"""The lacunary series gamma, psi and their certificates.

``gamma(z) = sum(8**(1-n) * z**(512**n) for n >= 1)`` and
``psi(z) = gamma(z) + gamma(1/z)``.  Powers ``z**(512**n)`` are evaluated by
shifting the binary angle of ``z`` by ``9n`` bits, so they are exact for any
truncation the angle precision allows.

The module also checks, in exact rational arithmetic, the growth and
tail inequalities that make ``phi(x) = gamma(exp(2 pi i x))`` hit every unimodular
value uncountably often.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circle.angles import MANTISSA_BITS, AngleArray, BinaryAngle
from .errors import DomainViolation, PrecisionExhausted, Unsupported

A_BASE = 8
B_EXP = 9  # frequencies 2**(9n) = 512**n
DEFAULT_TRUNCATION = 12
ROUNDING_PER_TERM = 2.0**-50


def tail(N, a=A_BASE):
    """Bound on ``|sum(a**(1-n) z**(b**n) for n > N)|`` on the circle."""
    return float(a) ** (1 - N) / (a - 1)


def max_truncation(precision, b_exp=B_EXP):
    return (precision - MANTISSA_BITS) // b_exp


@dataclass(frozen=True)
class LacunarySeries:
    """Truncated ``sum(a**(1-n) z**(2**(b_exp*n)) for n in 1..N)``."""

    N: int = DEFAULT_TRUNCATION
    a_base: int = A_BASE
    b_exp: int = B_EXP

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("truncation must be at least 1")
        if self.a_base <= 1 or 2**self.b_exp <= self.a_base:
            raise DomainViolation("need b > a > 1")

    @property
    def b_base(self):
        return 2**self.b_exp

    @property
    def coefficients(self):
        return [float(self.a_base) ** (1 - n) for n in range(1, self.N + 1)]

    def tail(self):
        return tail(self.N, self.a_base)

    def error_bound(self):
        return self.tail() + self.N * ROUNDING_PER_TERM

    def check_precision(self, precision):
        need = self.b_exp * self.N + MANTISSA_BITS
        if need > precision:
            raise PrecisionExhausted(
                f"truncation {self.N} needs {need} bits, angles carry {precision}"
            )

    def values(self, angles):
        """gamma_N at every angle of an :class:`AngleArray`."""
        self.check_precision(angles.precision)
        out = np.zeros(len(angles), dtype=complex)
        for n, c in enumerate(self.coefficients, start=1):
            out += c * angles.exp(self.b_exp * n)
        return out

    def psi_values(self, angles):
        """psi_N = gamma_N(z) + gamma_N(1/z), both halves evaluated separately."""
        return self.values(angles) + self.values(angles.conj())

    def __call__(self, angles):
        return self.values(angles)


def gamma_eval(z, N=DEFAULT_TRUNCATION):
    """``(gamma_N(z), bound)`` where the bound covers the tail and rounding."""
    series = LacunarySeries(N)
    value = series.values(AngleArray.from_angles([z]))[0]
    return complex(value), series.error_bound()


def psi_eval(z, N=DEFAULT_TRUNCATION):
    series = LacunarySeries(N)
    value = series.psi_values(AngleArray.from_angles([z]))[0]
    return complex(value), 2.0 * series.error_bound()


def gamma_function(N=DEFAULT_TRUNCATION):
    return LacunarySeries(N).values


def psi_function(N=DEFAULT_TRUNCATION):
    return LacunarySeries(N).psi_values


def holder_constant(a, b):
    """Exponent and constant for ``sum(a**-n z**(b**n))``.

    ``alpha = log_b a`` and ``C = a 2**-alpha / (b - a) + 2a (2b)**(1 - alpha) / (a - 1)``.
    Note that gamma is ``a`` times this series, so its own constant is ``a*C``.
    """
    if not (b > a > 1):
        raise DomainViolation(f"need b > a > 1, got a={a}, b={b}")
    alpha = math.log(a) / math.log(b)
    C = a * 2.0**-alpha / (b - a) + 2.0 * a * (2.0 * b) ** (1.0 - alpha) / (a - 1.0)
    return alpha, C


def gamma_holder(a=A_BASE, b_exp=B_EXP):
    """Rigorous ``(alpha, C)`` for gamma itself (``a`` times the series constant)."""
    alpha, C = holder_constant(a, 2**b_exp)
    return alpha, a * C


# ---------------------------------------------------------------------------
# Exact hypothesis checker
# ---------------------------------------------------------------------------

#: rational enclosure of 2*pi
TWO_PI_LO = Fraction("6.28318530717958")
TWO_PI_HI = Fraction("6.28318530717959")


class TauPoly:
    """Polynomial in ``tau = 2*pi`` with rational coefficients.

    Keeping ``tau`` symbolic lets identical powers cancel exactly; only
    genuinely mixed comparisons fall back to the rational enclosure.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def const(cls, c):
        return cls({0: Fraction(c)})

    @classmethod
    def tau(cls, c=1, power=1):
        return cls({power: Fraction(c)})

    def __add__(self, other):
        other = other if isinstance(other, TauPoly) else TauPoly.const(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return TauPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return TauPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = other if isinstance(other, TauPoly) else TauPoly.const(other)
        return self + (-other)

    def __mul__(self, other):
        other = other if isinstance(other, TauPoly) else TauPoly.const(other)
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + v1 * v2
        return TauPoly(out)

    __rmul__ = __mul__

    def enclosure(self):
        """Rational interval containing the value at ``tau = 2*pi``."""
        lo = hi = Fraction(0)
        for k, v in self.terms.items():
            a, b = v * TWO_PI_LO**k, v * TWO_PI_HI**k
            lo += min(a, b)
            hi += max(a, b)
        return lo, hi

    def sign_certain(self):
        """+1 / -1 / 0 if the sign holds for every tau > 0 by coefficient signs, else None."""
        if not self.terms:
            return 0
        signs = {v > 0 for v in self.terms.values()}
        if signs == {True}:
            return 1
        if signs == {False}:
            return -1
        return None

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms):
            v = self.terms[k]
            parts.append(str(v) if k == 0 else f"{v}*(2pi)" + (f"^{k}" if k > 1 else ""))
        return " + ".join(parts)


@dataclass(frozen=True)
class GeometricRule:
    """``a_n = first * ratio**(n-1)`` with ``0 < ratio < 1``."""

    first: Fraction
    ratio: Fraction

    def term(self, n):
        return self.first * self.ratio ** (n - 1)

    def tail_after(self, m):
        """Exact ``sum(|a_n| for n > m)``."""
        return abs(self.term(m + 1)) / (1 - self.ratio)

    def total(self):
        return abs(self.first) / (1 - self.ratio)


@dataclass(frozen=True)
class FrequencyRule:
    """``lambda_n = 2*pi * scale * growth**n``."""

    scale: Fraction
    growth: Fraction

    def term(self, n):
        return TauPoly.tau(self.scale * self.growth**n)


@dataclass(frozen=True)
class BelovParams:
    alpha: Fraction = Fraction(1, 8)
    beta: Fraction = Fraction(7)
    lam: Fraction = Fraction(2**9)
    M: Fraction = Fraction(0)
    a_rule: object = field(default_factory=lambda: GeometricRule(Fraction(1), Fraction(1, 8)))
    freq_rule: object = field(default_factory=lambda: FrequencyRule(Fraction(1), Fraction(2**9)))
    x0: float = 0.0

    def delta(self):
        """Half-width ``2 pi lam / ((lam - 2) lambda_1)`` of the interval I."""
        return TauPoly.tau(self.lam) * _reciprocal(self.freq_rule.term(1) * (self.lam - 2))


def _reciprocal(p):
    if len(p.terms) != 1:
        raise Unsupported("only monomials in 2pi can be inverted exactly")
    (k, v), = p.terms.items()
    return TauPoly({-k: 1 / v})


@dataclass
class Inequality:
    name: str
    m: int
    lhs: TauPoly
    rhs: TauPoly
    relation: str = "<="  # lhs <= rhs, or "==" for the boundary constants
    passed: bool = False
    margin: Fraction = Fraction(0)
    exact: bool = True

    def evaluate(self):
        diff = self.rhs - self.lhs
        lo, hi = diff.enclosure()
        if self.relation == "==":
            self.passed = not diff.terms
            self.margin = lo if diff.terms else Fraction(0)
            self.exact = True
            return self
        sign = diff.sign_certain()
        if sign is not None:
            self.passed = sign >= 0
            self.exact = True
            self.margin = lo if sign > 0 else (hi if sign < 0 else Fraction(0))
        else:
            self.exact = False
            self.passed = lo >= 0
            self.margin = lo
        return self

    def record(self):
        lhs_lo, lhs_hi = self.lhs.enclosure()
        rhs_lo, rhs_hi = self.rhs.enclosure()
        return {
            "name": self.name,
            "m": self.m,
            "lhs": str(self.lhs),
            "rhs": str(self.rhs),
            "lhs_value": float((lhs_lo + lhs_hi) / 2),
            "rhs_value": float((rhs_lo + rhs_hi) / 2),
            "relation": self.relation,
            "pass": self.passed,
            "margin": str(self.margin),
            "margin_value": float(self.margin),
            "exact": self.exact,
        }


@dataclass
class BelovReport:
    params: BelovParams
    inequalities: list

    @property
    def passed(self):
        return all(q.passed for q in self.inequalities)

    def records(self):
        return [q.record() for q in self.inequalities]

    def failures(self):
        return [q for q in self.inequalities if not q.passed]

    def by_name(self, name):
        return [q for q in self.inequalities if q.name == name]


def belov_check(params=None, m_max=20):
    """Check every hypothesis inequality for ``m = 1..m_max`` exactly."""
    p = params or BelovParams()
    if not isinstance(p.a_rule, GeometricRule):
        raise Unsupported("only geometric coefficient rules have closed-form tails")
    if not 0 < p.a_rule.ratio < 1:
        raise Unsupported("coefficient ratio must lie in (0, 1)")
    if p.lam <= 2:
        raise DomainViolation("lambda must exceed 2")
    a, lam_n = p.a_rule, p.freq_rule
    const = TauPoly.const
    total = a.total()
    out = [
        Inequality("alpha*(1+beta) <= 1", 0, const(p.alpha * (1 + p.beta)), const(1)),
        Inequality("beta/(1+beta)*sum|a_n| == 1", 0, const(p.beta / (1 + p.beta) * total), const(1), "=="),
        Inequality("(1-alpha)*sum|a_n| == 1", 0, const((1 - p.alpha) * total), const(1), "=="),
        Inequality("M >= 0", 0, const(0), const(p.M)),
    ]
    growth_factor = TauPoly.tau((p.lam - 1) / (p.lam - 2))
    partial = const(p.M)
    for m in range(1, m_max + 1):
        partial = partial + lam_n.term(m) * abs(a.term(m))
        ratio = lam_n.term(m + 1) * _reciprocal(lam_n.term(m))
        out.append(Inequality("lambda_{m+1}/lambda_m >= lambda", m, const(p.lam), ratio))
        out.append(Inequality("|a_m| <= beta*sum_{n>m}|a_n|", m, const(abs(a.term(m))), const(p.beta * a.tail_after(m))))
        out.append(
            Inequality(
                "2pi(lam-1)/(lam-2)*(M+sum_{n<=m}|a_n|lambda_n) <= alpha|a_{m+1}|lambda_{m+1}",
                m,
                growth_factor * partial,
                lam_n.term(m + 1) * (p.alpha * abs(a.term(m + 1))),
            )
        )
    return BelovReport(p, [q.evaluate() for q in out])
