"""Quadrature on the unit circle with respect to normalised arc length.

Every rule here has positive weights summing to one, so a sampled function
together with its grid is a vector in a finite-dimensional Hilbert space and
:func:`inner_product` is an exact inner product on that space.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import GridMismatch, MissingCertificate
from .angles import AngleArray, BinaryAngle, offsets
from .laurent import LaurentPoly

#: graded levels per side of the singular window in :func:`conjugate_integral`
SINGULAR_LEVELS = 48


@dataclass(frozen=True)
class Grid:
    """Nodes (as exact angles) and positive weights summing to one."""

    nodes: AngleArray
    weights: np.ndarray
    singular_marks: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.nodes),):
            raise ValueError("one weight per node required")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", w)
        marks = self.singular_marks
        if marks is None:
            marks = np.zeros(len(self.nodes), dtype=bool)
        object.__setattr__(self, "singular_marks", np.asarray(marks, dtype=bool))

    def __len__(self):
        return len(self.nodes)

    @property
    def t(self):
        return self.nodes.to_float()

    @property
    def z(self):
        return self.nodes.to_complex()

    def sample(self, func):
        """Evaluate ``func`` (a callable on :class:`AngleArray`) at the nodes."""
        return GridFunction(self, np.asarray(func(self.nodes), dtype=complex))

    def constant(self, c=1.0):
        return GridFunction(self, np.full(len(self), complex(c)))


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def weights(self):
        return self.grid.weights

    @property
    def singular_marks(self):
        return self.grid.singular_marks

    def norm(self):
        return math.sqrt(max(inner_product(self, self).real, 0.0))

    def to_csv(self, path):
        """Columns ``angle_hex, re, im, weight, singular_flag``."""
        hexes = self.nodes.hex()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["angle_hex", "re", "im", "weight", "singular_flag"])
            for h, v, w, s in zip(hexes, self.values, self.weights, self.singular_marks):
                writer.writerow([h, repr(float(v.real)), repr(float(v.imag)), repr(float(w)), int(s)])

    @classmethod
    def from_csv(cls, path, precision=None):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if precision is None:
            precision = 4 * len(rows[0]["angle_hex"][3:]) if rows else 256
        nodes = AngleArray.from_angles(
            [BinaryAngle.from_hex(r["angle_hex"], precision) for r in rows], precision
        )
        values = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
        weights = np.array([float(r["weight"]) for r in rows])
        marks = np.array([bool(int(r["singular_flag"])) for r in rows])
        return cls(Grid(nodes, weights, marks), values)


def uniform_grid(m, offset=0.0, precision=256):
    """``m`` equispaced nodes ``(j + offset) / m`` with trapezoid weights ``1/m``."""
    if m < 1:
        raise ValueError("m must be positive")
    t = (np.arange(m) + offset) / m
    return Grid(AngleArray.from_floats(t, precision), np.full(m, 1.0 / m))


def gauss_panels(breaks, order):
    """Composite Gauss-Legendre nodes and weights on consecutive panels.

    ``breaks`` are increasing panel endpoints (in turns, any real offset);
    returns flat ``(t, w)`` arrays with ``w`` measured in turns.
    """
    x, wx = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (hi - lo)
    t = (lo + hi) * 0.5 + half * x[None, :]
    w = half * wx[None, :]
    return t.reshape(-1), w.reshape(-1)


def panel_grid(panels, order=16, precision=256):
    """Equal Gauss-Legendre panels covering the circle: ``panels * order`` nodes."""
    t, w = gauss_panels(np.linspace(0.0, 1.0, panels + 1), order)
    return Grid(AngleArray.from_floats(t, precision), w)


def inner_product(f, g):
    """``sum(w_i f(z_i) conj(g(z_i)))``, approximating the integral of ``f conj(g)``."""
    if f.grid is not g.grid:
        same = (
            len(f.grid) == len(g.grid)
            and np.array_equal(f.nodes.words, g.nodes.words)
            and np.array_equal(f.weights, g.weights)
        )
        if not same:
            raise GridMismatch("inner product of functions sampled on different grids")
    return complex(np.sum(f.weights * f.values * np.conj(g.values)))


def _graded_side(length, levels, order):
    """Nodes in ``(0, length]`` accumulating at 0 with ratio 1/2."""
    edges = length * 2.0 ** -np.arange(levels + 1)[::-1]
    return gauss_panels(edges, order)


def singular_window_rule(breaks, eps, levels=SINGULAR_LEVELS, order=16, sub_order=4):
    """Offsets ``u`` (turns, relative to the singular point) and weights.

    Panels of the outer rule are clipped to ``|u| >= eps``; the window
    ``[-eps, eps]`` is covered by geometrically graded panels on each side.
    Returns ``(u, w, marks, gap)`` where ``gap`` is the half-width of the
    innermost uncovered interval.
    """
    breaks = np.asarray(breaks, dtype=float)
    outer = breaks[(breaks > eps) & (breaks < 1.0 - eps)]
    outer = np.concatenate([[eps], outer, [1.0 - eps]])
    uo, wo = gauss_panels(outer, order)
    uo = np.where(uo >= 0.5, uo - 1.0, uo)
    ui, wi = _graded_side(eps, levels, sub_order)
    u = np.concatenate([uo, ui, -ui])
    w = np.concatenate([wo, wi, wi])
    marks = np.concatenate([np.zeros(uo.size, bool), np.ones(2 * ui.size, bool)])
    order_idx = np.argsort(u, kind="stable")
    return u[order_idx], w[order_idx], marks[order_idx], eps * 2.0**-levels


@functools.lru_cache(maxsize=32)
def _cached_window_rule(panels, order, eps):
    u, w, _marks, gap = singular_window_rule(np.linspace(0.0, 1.0, panels + 1), eps, order=order)
    u.flags.writeable = False
    w.flags.writeable = False
    return u, w, gap


def _holder_of(f, holder):
    if holder is not None:
        return holder
    cert = getattr(f, "holder_certificate", None)
    if cert is None:
        raise MissingCertificate(
            "conjugate integral needs a Hölder certificate (alpha, C) to control the singular node"
        )
    return cert() if callable(cert) else cert


def conjugate_integral(f, z, panels=256, order=16, holder=None, eps=None, return_error=False):
    """``∫ w (f(w) - f(z)) / (z - w) dμ(w)`` for Hölder continuous ``f``.

    The outer rule is ``panels`` Gauss-Legendre panels of ``order`` nodes.
    Nodes within ``eps`` turns of ``z`` (default: one panel) are replaced by
    panels graded geometrically toward ``z`` on both sides, so no node ever
    sits on the singular point.  The uncovered innermost interval is bounded
    with ``|integrand| <= C |z - w|**(alpha - 1)``.

    ``f`` is a :class:`LaurentPoly` or a callable on :class:`AngleArray`;
    ``holder`` is ``(alpha, C)``, required unless ``f`` carries one.
    """
    alpha, C = _holder_of(f, holder)
    if not isinstance(z, BinaryAngle):
        raise TypeError("z must be a BinaryAngle")
    eps = 1.0 / panels if eps is None else eps
    u, w, gap = _cached_window_rule(panels, order, float(eps))
    zc = z.to_complex()
    wc = zc * np.exp(2j * np.pi * u)
    if isinstance(f, LaurentPoly):
        # evaluate at the same rounded points used for z - w below
        fz, fw = f(zc), f(wc)
    else:
        fz = complex(np.asarray(f(_single(z)))[0])
        fw = np.asarray(f(offsets(z, u)), dtype=complex)
    # z - w = -z (e(u) - 1); expm1 keeps the small differences accurate
    z_minus_w = -zc * np.expm1(2j * np.pi * u)
    integrand = wc * (fw - fz) / z_minus_w
    value = complex(np.sum(w * integrand))
    if not return_error:
        return value
    # two sides of width `gap` in turns, chord ~ 2 pi u
    err = 2.0 * C * (2.0 * math.pi) ** (alpha - 1.0) * gap**alpha / alpha
    return value, err


def _single(z):
    return AngleArray.from_angles([z])


def _evaluate(f, angles):
    if isinstance(f, LaurentPoly):
        return f(angles.to_complex())
    return np.asarray(f(angles), dtype=complex)


def holder_ratio_sup(f, alpha, num_pairs, rng_seed=0, min_scale=2.0**-40, precision=256):
    """Largest sampled ``|f(z) - f(w)| / |z - w|**alpha``.

    Separations are drawn log-uniformly between ``min_scale`` and 1/2 turn so
    that every scale is probed; the result is a lower bound for the best
    Hölder constant.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if isinstance(f, LaurentPoly):
        # polynomials are evaluated in doubles; below ~1e-6 turns the
        # difference quotient is dominated by rounding
        min_scale = max(min_scale, 2.0**-20)
    rng = np.random.default_rng(rng_seed)
    t = rng.random(num_pairs)
    z = AngleArray.from_floats(t, precision, rng=rng)
    logs = rng.uniform(math.log(min_scale), math.log(0.5), num_pairs)
    sep = np.exp(logs) * rng.choice([-1.0, 1.0], num_pairs)
    delta = np.rint(np.ldexp(sep, 64)).astype(np.int64).view(np.uint64)
    wwords = np.array(z.words)
    wwords[:, 0] = wwords[:, 0] + delta
    w = AngleArray(wwords, precision)
    fz = _evaluate(f, z)
    fw = _evaluate(f, w)
    if isinstance(f, LaurentPoly):
        # f saw the rounded points, so measure the distance between those
        dist = np.abs(z.to_complex() - w.to_complex())
    else:
        dist = 2.0 * np.abs(np.sin(np.pi * np.ldexp(delta.view(np.int64).astype(float), -64)))
    keep = dist > 0
    fz, fw, dist = fz[keep], fw[keep], dist[keep]
    ratio = np.abs(fz - fw) / dist**alpha
    return float(np.max(ratio)) if ratio.size else 0.0
