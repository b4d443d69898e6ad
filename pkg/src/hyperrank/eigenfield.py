"""The functions g, g1, h and the eigenvector field h_lambda.

    g(z)  = -i z**-1 dist(z, K)**(-1/3)
    g1(z) = z g(z) = -i dist(z, K)**(-1/3)
    h(z)  = psi(z) dist(z, K)**(1/3)
    h_lambda(w) = h(w) / (lambda - w)

On the circle ``h conj(g) = i w psi(w)`` and ``h conj(g1) = i psi(w)``, so the
dist factors cancel in the pairings.  Expanding ``psi`` in monomials and using
the principal value ``PV int w w**m / (lam - w) dmu = -lam**m / 2`` for
``m >= 0`` and ``+lam**m / 2`` for ``m < 0`` gives the closed forms

    <h_lam, g>  = i (psi_-(lam) - psi(lam) / 2)
    <h_lam, g1> = i lam**-1 (psi_-(lam) + psi_0 - psi(lam) / 2)
    <h, g1>     = i psi_0

(``psi_0`` the constant coefficient, zero for the lacunary psi) which reduce
to ``1``, ``1/lam`` and ``0`` when ``gamma(lam) = i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cantor import dist_to_K, turn_distance
from .circle.angles import AngleArray, BinaryAngle
from .circle.laurent import LaurentPoly, negative_part
from .circle.quadrature import Grid, gauss_panels
from .errors import AccuracyUnattainable, SingularPoint
from .lacunary import DEFAULT_TRUNCATION, LacunarySeries, gamma_holder, tail

_U = np.uint64
_TWO64 = 2.0**64
THIRD = 1.0 / 3.0


def _as_array(w):
    if isinstance(w, AngleArray):
        return w
    if isinstance(w, BinaryAngle):
        return AngleArray.from_angles([w])
    return AngleArray.from_u64(np.asarray(w, dtype=_U))


def _as_complex(lam):
    if isinstance(lam, BinaryAngle):
        return lam.to_complex()
    return complex(lam)


def cauchy_denominator(lam, w):
    """``lam - w`` for each node, exact in the separation when both are angles.

    With ``lam = e(a)`` and ``w = e(a + d)`` this is ``-lam expm1(2 pi i d)``
    where ``d`` is the 64-bit wrapped difference, so nodes 1e-15 turns from
    ``lam`` keep full relative accuracy.  Complex inputs fall back to plain
    subtraction.
    """
    if isinstance(lam, BinaryAngle) and isinstance(w, AngleArray):
        base = np.uint64(lam.bits >> (lam.precision - 64))
        d = (w.top64(0) - base).view(np.int64).astype(float) / _TWO64
        return -lam.to_complex() * np.expm1(2j * np.pi * d)
    z = w.to_complex() if isinstance(w, AngleArray) else np.asarray(w, dtype=complex)
    return _as_complex(lam) - z


class ConstructedFunctions:
    """g, g1, h and psi built from a Cantor tree.

    ``psi`` defaults to the lacunary psi_N; a :class:`LaurentPoly` may be
    passed instead (test geometries), in which case the closed-form pairings
    use its exact negative part.
    """

    def __init__(self, tree, N=DEFAULT_TRUNCATION, psi=None, delta=None):
        self.tree = tree
        self.N = N
        self.series = LacunarySeries(N) if psi is None else None
        self.psi_poly = psi
        self.delta = tree.meta.get("delta", 0.0) if delta is None else delta

    # -- pointwise values -------------------------------------------------
    def psi(self, w):
        w = _as_array(w)
        if self.series is not None:
            return self.series.psi_values(w)
        return self.psi_poly(w.to_complex())

    def dist(self, w):
        """Chordal distance to the deepest-level arcs (lower bracket)."""
        return 2.0 * np.sin(np.pi * turn_distance(_as_array(w), self.tree))

    def g(self, w):
        w = _as_array(w)
        d = self.dist(w)
        with np.errstate(divide="ignore"):
            return -1j * np.conj(w.to_complex()) * d**-THIRD

    def g1(self, w):
        d = self.dist(_as_array(w))
        with np.errstate(divide="ignore"):
            return -1j * d**-THIRD

    def h(self, w):
        w = _as_array(w)
        return self.psi(w) * self.dist(w) ** THIRD

    def h_lambda(self, lam, w):
        w = _as_array(w)
        return self.h(w) / cauchy_denominator(lam, w)

    # -- closed forms --------------------------------------------------------
    def psi_minus(self, lam):
        """Negative-frequency part of psi at ``lam``: ``gamma(1/lam)`` for the lacunary psi."""
        if self.series is not None:
            z = _as_array(lam)
            return complex(self.series.values(z.conj())[0])
        return complex(negative_part(self.psi_poly)(_as_complex(lam)))

    def psi_at(self, lam):
        if self.series is not None:
            return complex(self.psi(_as_array(lam))[0])
        return complex(self.psi_poly(_as_complex(lam)))

    def pairing_reference(self, lam):
        """Exact ``(<h_lam, g>, <h_lam, g1>, <h, g1>)`` for the given psi."""
        z = _as_complex(lam)
        pm, p = self.psi_minus(lam), self.psi_at(lam)
        hg = 1j * (pm - p / 2)
        # psi0 = w**-1 psi: its negative part is w**-1 psi_- plus the w**-1 term of psi's constant
        hg1 = 1j * (pm - p / 2) / z
        c0 = 0.0 if self.series is not None else self.psi_poly[0]
        if c0:
            hg1 = hg1 + 1j * c0 / z  # the constant moves to frequency -1
        return hg, hg1, 1j * c0

    def analytic_pairings(self, lam):
        """The pairings with ``psi(lam) = 0`` substituted: ``i psi_-(lam)`` etc."""
        z = _as_complex(lam)
        pm = self.psi_minus(lam)
        c0 = 0.0 if self.series is not None else self.psi_poly[0]
        return 1j * pm, 1j * pm / z + 1j * c0 / z, 1j * c0


@dataclass
class FunctionValues:
    g: complex
    g1: complex
    h: complex
    psi: complex
    dist: tuple
    errors: dict = field(default_factory=dict)


def eval_functions(tree, N, w, funcs=None):
    """Values of g, g1, h, psi at ``w`` with error bars.

    Error bars combine the distance bracket (``dist`` is only known to lie in
    ``[lower, upper]``), the lacunary tail and rounding.  ``g`` and ``g1`` are
    singular on K: a point inside a deepest-level arc raises
    :class:`SingularPoint`.
    """
    f = funcs or ConstructedFunctions(tree, N)
    lo, hi = dist_to_K(w, tree)
    psi_v = complex(f.psi(w)[0])
    psi_err = 2 * (tail(N) + N * 2.0**-50) if f.series is not None else 1e-15
    h_v = psi_v * lo**THIRD
    h_err = (abs(psi_v) + psi_err) * (hi**THIRD - lo**THIRD) + psi_err * lo**THIRD
    errors = {"psi": psi_err, "h": h_err}
    if lo <= 0.0:
        bound = (abs(psi_v) + psi_err) * hi**THIRD
        raise SingularPoint(
            f"{w.hex()} lies in a deepest-level arc of K; g and g1 are unbounded there (|h| <= {bound:.3g})"
        )
    z = w.to_complex()
    g1_v = -1j * lo**-THIRD
    g_v = g1_v / z
    errors["g1"] = errors["g"] = lo**-THIRD - hi**-THIRD
    return FunctionValues(g_v, g1_v, h_v, psi_v, (lo, hi), errors)


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------


def clusters(tree, merge_gap=1e-9):
    """Merge deepest arcs separated by less than ``merge_gap`` turns; returns u64 edges."""
    a, b = tree.deepest
    gaps = (a[1:] - b[:-1]).astype(float) / _TWO64
    breaks = np.flatnonzero(gaps >= merge_gap)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [a.size - 1]])
    return a[starts].copy(), b[ends].copy()


@dataclass
class Mesh:
    """A positive quadrature rule graded toward the clusters of K."""

    grid: Grid
    c0: np.ndarray
    c1: np.ndarray
    window: float
    inner: float

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def weights(self):
        return self.grid.weights


def eigen_mesh(tree, panels=2048, order=16, levels=36, sub_order=8, merge_gap=1e-9):
    """Gauss-Legendre panels away from K, geometric grading toward each cluster edge.

    Around every cluster ``[c0, c1]`` a window of one panel width ``W`` on each
    side is covered by panels ``[W 2**-(k+1), W 2**-k]``; the innermost
    ``W 2**-levels`` next to each edge and the cluster itself carry no nodes.
    Graded nodes are placed by exact integer offsets from the edges.
    """
    c0, c1 = clusters(tree, merge_gap)
    W = 1.0 / panels
    sep = ((np.roll(c0, -1) - c1).astype(float) / _TWO64)
    if np.any(sep <= 2 * W):
        raise AccuracyUnattainable(
            "clusters closer than two panel widths", required_nodes=int(order * 2 / sep.min()) + 1
        )
    Wu = _U(int(W * _TWO64))
    # outer panels between consecutive windows
    t_parts, w_parts = [], []
    lo = (c1 + Wu).astype(float) / _TWO64
    hi = lo + ((np.roll(c0, -1) - Wu) - (c1 + Wu)).astype(float) / _TWO64
    for s, e in zip(lo, hi):
        n = max(1, math.ceil((e - s) * panels))
        t, w = gauss_panels(np.linspace(s, e, n + 1), order)
        t_parts.append(np.mod(t, 1.0))
        w_parts.append(w)
    outer_t = np.concatenate(t_parts)
    outer_w = np.concatenate(w_parts)
    outer = AngleArray.from_floats(outer_t).top64(0)
    # graded panels on each side of each cluster
    edges = W * 2.0 ** -np.arange(levels + 1)[::-1]
    u, wu = gauss_panels(edges, sub_order)
    du = np.rint(u * _TWO64).astype(_U)
    left = (c0[:, None] - du[None, :]).reshape(-1)
    right = (c1[:, None] + du[None, :]).reshape(-1)
    wg = np.tile(wu, c0.size)
    nodes = np.concatenate([outer, left, right])
    weights = np.concatenate([outer_w, wg, wg])
    marks = np.concatenate([np.zeros(outer.size, bool), np.ones(2 * wg.size, bool)])
    order_idx = np.argsort(nodes, kind="stable")
    grid = Grid(AngleArray.from_u64(nodes[order_idx]), weights[order_idx], marks[order_idx])
    return Mesh(grid, c0, c1, W, W * 2.0**-levels)


def g_norm_squared(funcs, mesh):
    """``||g||**2 = int dist**(-2/3)`` on the mesh plus the analytic inner pieces."""
    d = funcs.dist(mesh.nodes)
    body = float(np.sum(mesh.weights * d ** (-2.0 / 3.0)))
    # two sides per cluster, leading term (2 pi u)**(-2/3) integrated over [0, inner]
    inner = 2 * mesh.c0.size * (2 * math.pi) ** (-2 / 3) * mesh.inner ** (1 / 3) / (1 / 3)
    return body + inner, inner


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------


@dataclass
class IdentityRecord:
    lam_hex: str
    identity: str
    path: str
    target: complex
    measured: complex
    residual: float
    error_bar: float

    @property
    def within(self):
        return self.residual <= self.error_bar

    def row(self):
        return {
            "lambda_hex": self.lam_hex,
            "identity": self.identity,
            "target": f"{self.target.real:.17g}{self.target.imag:+.17g}j",
            "measured_re": self.measured.real,
            "measured_im": self.measured.imag,
            "residual": self.residual,
            "error_bar": self.error_bar,
            "path": self.path,
        }


NODES_PER_WAVE = 4.5  # order-20 panels holding at most 4.4 periods of the top frequency


class DirectPath:
    """Fine Gauss-Legendre quadrature of the pairings with dist factors kept.

    ``psi`` is truncated to ``N_d`` terms (top frequency ``512**N_d``); the
    discarded terms contribute at most ``tail(N_d) - tail(N)`` to each pairing
    by the monomial principal-value formula.  The singularity at ``lam`` is
    removed by subtracting ``i psi(lam) w / (lam - w)`` and adding its
    principal value back in closed form.  The error estimate is the
    difference between order-``order`` and order-``order - 4`` rules on the
    same panels.
    """

    def __init__(self, funcs, N_d=2, nodes=None, order=20):
        self.funcs = funcs
        if funcs.series is not None:
            self.N_d = N_d
            top = 512.0**N_d
            self.psi_d = LacunarySeries(N_d)
            self.trunc_bar = tail(N_d) - tail(funcs.N)
        else:
            self.N_d = None
            top = float(max(funcs.psi_poly.degree, 1))
            self.psi_d = None
            self.trunc_bar = 0.0
        required = int(math.ceil(NODES_PER_WAVE * top / order)) * order
        nodes = required if nodes is None else nodes
        if nodes < required:
            raise AccuracyUnattainable(
                f"{nodes} nodes cannot resolve frequency {top:.0f}; need {required}",
                required_nodes=required,
            )
        self.panels = max(64, nodes // order)
        self.order = order
        self.rules = [self._sample(order), self._sample(order - 4)]

    def _sample(self, order):
        t, w = gauss_panels(np.linspace(0.0, 1.0, self.panels + 1), order)
        z = AngleArray.from_floats(t)
        zc = z.to_complex()
        psi = self.psi_d.psi_values(z) if self.psi_d is not None else self.funcs.psi_poly(zc)
        d = self.funcs.dist(z)
        on_k = d <= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            h = psi * d**THIRD
            g = -1j * np.conj(zc) * d**-THIRD
            g1 = -1j * d**-THIRD
            hg = h * np.conj(g)
            hg1 = h * np.conj(g1)
        # on K the product is 0 * inf; use its cancelled value
        hg = np.where(on_k, 1j * zc * psi, hg)
        hg1 = np.where(on_k, 1j * psi, hg1)
        return {"w": w, "z": zc, "hg": hg, "hg1": hg1}

    def _psi_d_at(self, lam):
        if self.psi_d is not None:
            return complex(self.psi_d.psi_values(_as_array(lam))[0])
        return complex(self.funcs.psi_poly(_as_complex(lam)))

    def pairings(self, lam):
        """``(values, error_estimates)`` for the three pairings at ``lam``."""
        lz = _as_complex(lam)
        p = self._psi_d_at(lam)
        out = []
        for r in self.rules:
            z, w = r["z"], r["w"]
            den = lz - z
            v_g = np.sum(w * (r["hg"] - 1j * p * z) / den) - 1j * p / 2
            v_g1 = np.sum(w * (r["hg1"] - 1j * p) / den) + 1j * p / (2 * lz)
            v_h = np.sum(w * r["hg1"])
            out.append(np.array([v_g, v_g1, v_h]))
        fine, coarse = out
        return fine, np.abs(fine - coarse)


def verify_identity_m02(funcs, lam, path="both", direct=None):
    """Residual records for <h_lam, g> = 1, <h_lam, g1> = 1/lam and <h, g1> = 0.

    The analytic path evaluates ``i psi_-(lam)`` (the pairing once
    ``psi(lam) = 0``); its bound is the level-set tolerance plus the tail.
    The direct path integrates the product of separately evaluated h and g on
    a fine rule, see :class:`DirectPath`.
    """
    if path not in ("analytic", "direct", "both"):
        raise ValueError("path is analytic, direct or both")
    lz = _as_complex(lam)
    lam_hex = lam.hex() if isinstance(lam, BinaryAngle) else repr(lam)
    names = ("<h_lam,g>=1", "<h_lam,g1>=1/lam", "<h,g1>=0")
    targets = (1.0 + 0j, 1.0 / lz, 0j)
    bound = funcs.delta + (tail(funcs.N) if funcs.series is not None else 0.0) + 1e-12
    bars = (bound, bound, 1e-15)
    records = []
    if path in ("analytic", "both"):
        vals = funcs.analytic_pairings(lam)
        for name, t, v, bar in zip(names, targets, vals, bars):
            records.append(IdentityRecord(lam_hex, name, "analytic", t, complex(v), abs(v - t), bar))
    if path in ("direct", "both"):
        direct = direct or DirectPath(funcs)
        vals, est = direct.pairings(lam)
        for j, (name, t, v, bar) in enumerate(zip(names, targets, vals, bars)):
            trunc = direct.trunc_bar if j < 2 else 0.0  # |1/lam| = 1 for the second
            err = float(est[j]) + trunc + (bar if j < 2 else 0.0) + 1e-13
            records.append(IdentityRecord(lam_hex, name, "direct", t, complex(v), abs(v - t), err))
    return records


def verify_uhl(lam, w, h_values):
    """Pointwise ``U h_lam = lam h_lam - h`` and ``U^-1 h_lam = (h_lam + U^-1 h) / lam``.

    The second identity follows from ``1/(w(lam - w)) = (1/(lam - w) + 1/w)/lam``;
    it is the form used when ``U^-1`` is applied to combinations of the h_lam.
    Returns the larger of the two maximal relative residuals; ``lam`` may be
    any complex number (the identities are algebraic).
    """
    lz = _as_complex(lam)
    z = w.to_complex() if isinstance(w, (AngleArray, BinaryAngle)) else np.asarray(w, dtype=complex)
    h = np.asarray(h_values, dtype=complex)
    hl = h / (lz - z)
    fwd = np.abs(z * hl - (lz * hl - h)) / np.maximum(np.abs(lz * hl) + np.abs(h), 1e-300)
    bwd = np.abs(hl / z - (hl + h / z) / lz) / np.maximum((np.abs(hl) + np.abs(h)) / abs(lz), 1e-300)
    return float(max(np.max(fwd), np.max(bwd)))


# ---------------------------------------------------------------------------
# Continuity of lam -> h_lam
# ---------------------------------------------------------------------------


def sample_lambdas(tree, m=None, merge_gap=1e-9):
    """One point of K per cluster (its left edge), thinned by a fixed stride.

    The stride keeps the sets nested: the m-point set contains the m/2-point set.
    """
    c0, _ = clusters(tree, merge_gap)
    if m is None or m >= c0.size:
        pts = c0
    else:
        stride = c0.size / m
        pts = c0[(np.arange(m) * stride).astype(int)]
    return [BinaryAngle(int(p) << 192) for p in pts]


def h_difference_norm2(funcs, mesh, z, s, h_values=None):
    """``||h_z - h_s||**2`` on the mesh (both points must be cluster edges)."""
    h = funcs.h(mesh.nodes) if h_values is None else h_values
    diff = h * (1.0 / cauchy_denominator(z, mesh.nodes) - 1.0 / cauchy_denominator(s, mesh.nodes))
    return float(np.sum(mesh.weights * np.abs(diff) ** 2))


def continuity_modulus(funcs, pairs, mesh):
    """Rows ``{chord, norm2, ratio}`` with ratio ``||h_z - h_s||**2 / |z - s|**(1/3)``."""
    h = funcs.h(mesh.nodes)
    rows = []
    for z, s in pairs:
        r = abs(_as_complex(z) - _as_complex(s))
        n2 = h_difference_norm2(funcs, mesh, z, s, h)
        rows.append({"z_hex": z.hex(), "s_hex": s.hex(), "chord": r, "norm2": n2, "ratio": n2 / r**THIRD if r else 0.0})
    return rows


def octave_table(rows):
    """Group rows by octave of the chord; per octave the median ratio."""
    out = {}
    for r in rows:
        if r["chord"] <= 0:
            continue
        k = math.floor(math.log2(r["chord"]))
        out.setdefault(k, []).append(r["ratio"])
    return {k: float(np.median(v)) for k, v in sorted(out.items())}


def octave_pairs(lambdas, per_octave=8):
    """Pairs of ``lambdas`` binned by octave of the chord, at most ``per_octave`` each.

    Pairs are taken in index order so the selection is deterministic.
    """
    z = np.array([_as_complex(l) for l in lambdas])
    bins = {}
    for i in range(len(lambdas)):
        for j in range(i + 1, len(lambdas)):
            r = abs(z[i] - z[j])
            if r <= 0:
                continue
            k = math.floor(math.log2(r))
            if len(bins.setdefault(k, [])) < per_octave:
                bins[k].append((lambdas[i], lambdas[j]))
    return [p for k in sorted(bins) for p in bins[k]]


def eigen_residual(funcs, mesh, lam, pairing=None):
    """``(||T h_lam - lam h_lam|| / ||h||, |<h_lam, g> - 1|)`` on the mesh.

    ``T = U + <., g> h`` with ``U`` multiplication by ``w``; the pairing is
    the analytic one unless given.  Pointwise the residual is
    ``(<h_lam, g> - 1) h`` by (uhl), so the two numbers must agree.
    """
    s = funcs.analytic_pairings(lam)[0] if pairing is None else pairing
    w = mesh.nodes.to_complex()
    h = funcs.h(mesh.nodes)
    hl = h / cauchy_denominator(lam, mesh.nodes)
    v = w * hl + s * h - _as_complex(lam) * hl
    wt = mesh.weights
    return math.sqrt(np.sum(wt * np.abs(v) ** 2) / np.sum(wt * np.abs(h) ** 2)), abs(s - 1)
