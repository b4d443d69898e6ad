"""The level set F = {gamma = i}, a finite-depth Cantor set K inside it, and
distances to K.

Arcs are dyadic: an arc of level ``L`` has length ``2**-L`` turns and its left
end is stored as the leading 64 bits of its angle.  Every arc midpoint then
has at most 64 bits, and for such points gamma_N is evaluated exactly (the
terms with ``9n >= 64`` equal 1).

gamma is ``1/512``-periodic in the turn variable, so the cover is computed on
one cell ``[0, 1/512)`` and replicated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circle.angles import AngleArray, BinaryAngle
from .errors import DepthUnreachable, LevelSetEmpty, Unsupported
from .lacunary import A_BASE, B_EXP, DEFAULT_TRUNCATION, LacunarySeries, tail

EXCLUDED, CANDIDATE, UNDECIDED = 0, 1, 2
STATUS_NAMES = {EXCLUDED: "excluded", CANDIDATE: "candidate", UNDECIDED: "undecided"}

_U = np.uint64
_TWO64 = 2.0**64
MAX_LEVEL = 63  # midpoints of level-63 arcs still fit in 64 bits
DEFAULT_DEPTH = 8


def gamma_modulus(N=DEFAULT_TRUNCATION, a=A_BASE, b_exp=B_EXP):
    """Termwise bound on ``|gamma_N(z) - gamma_N(mid)|`` for ``|z - mid| <= h`` turns."""
    coef = float(a) ** (1 - np.arange(1, N + 1))
    freq = 2.0 ** (b_exp * np.arange(1, N + 1))

    def omega(h):
        return float(np.sum(coef * np.minimum(2.0, 2.0 * math.pi * freq * h)))

    return omega


def lipschitz_modulus(L=1.0):
    """Modulus of a function with ``|f(z) - f(w)| <= L |z - w|``."""
    return lambda h: L * 2.0 * math.pi * h


def _children(lefts, level, step):
    k = np.arange(1 << step, dtype=_U) << _U(64 - level - step)
    return (lefts[:, None] + k[None, :]).reshape(-1)


def _midpoints(lefts, level):
    return lefts + (_U(1) << _U(63 - level))


@dataclass
class _Classifier:
    func: object
    modulus: object
    target: complex
    delta: float
    tail_bound: float

    def residual(self, points):
        return np.abs(np.asarray(self.func(AngleArray.from_u64(points)), dtype=complex) - self.target)

    def lower_bound(self, resid, level):
        return resid - self.modulus(2.0 ** (-level - 1)) - self.tail_bound


@dataclass
class LevelSetCover:
    """Disjoint dyadic arcs covering the circle, each excluded, candidate or undecided.

    Arrays describe the arcs of one period cell; :meth:`arcs` replicates them.
    ``witness`` holds, for candidate arcs, a point of the arc (64-bit angle)
    with ``|f - target| <= delta``.
    """

    left: np.ndarray
    level: np.ndarray
    status: np.ndarray
    witness: np.ndarray
    witness_residual: np.ndarray
    delta: float
    N: int
    resolution: int
    period: int
    tail_bound: float
    classifier: _Classifier = field(repr=False, default=None)

    @property
    def period_level(self):
        return int(round(math.log2(self.period)))

    def count(self, status=None):
        n = len(self.left) if status is None else int(np.sum(self.status == status))
        return n * self.period

    @property
    def n_candidates(self):
        return self.count(CANDIDATE)

    def arcs(self):
        """Full-circle ``(left, level, status, witness)`` arrays, sorted by angle."""
        p = self.period_level
        shifts = (np.arange(self.period, dtype=_U) << _U(64 - p)) if p > 0 else np.zeros(1, _U)
        left = (shifts[:, None] + self.left[None, :]).reshape(-1)
        wit = (shifts[:, None] + self.witness[None, :]).reshape(-1)
        rep = lambda a: np.tile(a, self.period)
        return left, rep(self.level), rep(self.status), wit

    def measure(self, status=None):
        lengths = np.ldexp(1.0, -self.level.astype(int))
        if status is not None:
            lengths = lengths[self.status == status]
        return float(np.sum(lengths)) * self.period

    def candidate_arcs(self):
        """Candidate arcs as ``(left, right)`` :class:`BinaryAngle` pairs."""
        left, level, status, _ = self.arcs()
        sel = status == CANDIDATE
        out = []
        for l, L in zip(left[sel], level[sel]):
            a = BinaryAngle(int(l) << 192)
            out.append((a, BinaryAngle(((int(l) + (1 << (64 - int(L)))) % (1 << 64)) << 192)))
        return out

    def candidate_points(self):
        left, _, status, wit = self.arcs()
        return [BinaryAngle(int(w) << 192) for w in wit[status == CANDIDATE]]

    def candidate_runs(self):
        """Maximal runs of adjacent candidate arcs as ``(left, right)`` turn fractions."""
        left, level, status, _ = self.arcs()
        runs = []
        for l, L, s in zip(left, level, status):
            lo = int(l) / _TWO64
            hi = lo + 2.0 ** -int(L)
            if s != CANDIDATE:
                continue
            if runs and abs(runs[-1][1] - lo) < 1e-18:
                runs[-1][1] = hi
            else:
                runs.append([lo, hi])
        if len(runs) > 1 and runs[-1][1] >= 1.0 and runs[0][0] == 0.0:
            runs[0][0] = runs[-1][0] - 1.0
            runs.pop()
        return [tuple(r) for r in runs]

    def summary(self):
        return {
            "delta": self.delta,
            "N": self.N,
            "resolution": self.resolution,
            "period": self.period,
            "arcs": self.count(),
            "candidate": self.count(CANDIDATE),
            "excluded": self.count(EXCLUDED),
            "undecided": self.count(UNDECIDED),
            "candidate_measure": self.measure(CANDIDATE),
            "excluded_measure": self.measure(EXCLUDED),
        }

    def refine_arc(self, left, level, target_level, max_survivors=2_000_000):
        """Midpoints of level-``target_level`` sub-arcs of one arc that are witnesses.

        Sub-arcs certified free of the level set are dropped on the way down;
        returns sorted 64-bit witness points.
        """
        c = self.classifier
        lefts = np.array([left], dtype=_U)
        L = int(level)
        while L < target_level and lefts.size:
            step = min(3, target_level - L)
            lefts = _children(lefts, L, step)
            L += step
            resid = c.residual(_midpoints(lefts, L))
            keep = c.lower_bound(resid, L) <= c.delta
            lefts = lefts[keep]
            if lefts.size > max_survivors:
                raise DepthUnreachable(f"refinement beyond {max_survivors} arcs", max_depth=None)
        mids = _midpoints(lefts, L)
        if lefts.size:
            mids = mids[c.residual(mids) <= c.delta]
        return np.sort(mids)


def _witness_search(c, lefts, level, max_level, beam):
    """Beam search for a witness inside each arc; returns ``(found, points, residuals)``."""
    n = lefts.size
    found = np.zeros(n, dtype=bool)
    points = np.zeros(n, dtype=_U)
    resid_out = np.full(n, np.inf)
    cur, origin, L = lefts.copy(), np.arange(n), level
    while cur.size and L < max_level:
        step = min(3, max_level - L)
        cur = _children(cur, L, step)
        origin = np.repeat(origin, 1 << step)
        L += step
        mids = _midpoints(cur, L)
        resid = c.residual(mids)
        wit = resid <= c.delta
        if np.any(wit):
            # best witness per origin
            idx = np.flatnonzero(wit)
            order = idx[np.lexsort((resid[idx], origin[idx]))]
            first = np.unique(origin[order], return_index=True)
            for o, j in zip(first[0], order[first[1]]):
                if not found[o]:
                    found[o] = True
                    points[o] = mids[j]
                    resid_out[o] = resid[j]
        lb = c.lower_bound(resid, L)
        keep = (lb <= c.delta) & ~found[origin]
        cur, origin, lb = cur[keep], origin[keep], lb[keep]
        if cur.size:
            # keep at most `beam` sub-arcs per origin, most promising first
            order = np.lexsort((lb, origin))
            cur, origin = cur[order], origin[order]
            start = np.searchsorted(origin, origin, side="left")
            rank = np.arange(origin.size) - start
            sel = rank < beam
            cur, origin = cur[sel], origin[sel]
    return found, points, resid_out


def cover_level_set(
    N=DEFAULT_TRUNCATION,
    delta=1e-3,
    resolution=2**20,
    *,
    func=None,
    modulus=None,
    target=1j,
    period=None,
    search_level=48,
    beam=256,
):
    """Classify the circle into excluded / candidate / undecided arcs.

    An arc with midpoint ``m`` and half-length ``h`` is excluded when
    ``|f_N(m) - target| - omega(h) - tail(N) > delta``; it is then certified
    to contain no point where ``f`` (untruncated) equals the target.  Arcs are
    refined by factors of 8 until shorter than ``1/resolution``.  A surviving
    arc becomes a candidate once it contains a witness, a point with
    ``|f_N - target| <= delta``: first its midpoint is tried, then a beam
    search down to ``search_level``.  Arcs with neither certificate are
    undecided.

    ``func``, ``modulus`` and ``period`` replace gamma_N, its termwise modulus
    and its period 512 (for tests with simple functions).
    """
    if func is None:
        series = LacunarySeries(N)
        func = series.values
        modulus = modulus or gamma_modulus(N)
        period = 2**B_EXP if period is None else period
        tail_bound = tail(N)
        if delta <= tail_bound:
            raise ValueError("delta must exceed the truncation tail")
    else:
        if modulus is None:
            raise ValueError("a custom function needs its modulus of continuity")
        period = 1 if period is None else period
        tail_bound = 0.0
    p = int(round(math.log2(period)))
    if 2**p != period:
        raise ValueError("period must be a power of two")
    final = max(p, math.ceil(math.log2(resolution)))
    if final > MAX_LEVEL or search_level > MAX_LEVEL:
        raise ValueError(f"levels above {MAX_LEVEL} are not supported")
    c = _Classifier(func, modulus, complex(target), float(delta), tail_bound)

    ex_left, ex_level = [], []
    lefts = np.zeros(1, dtype=_U)
    L = p
    # the starting cell itself
    resid = c.residual(_midpoints(lefts, L))
    if c.lower_bound(resid, L)[0] > delta:
        ex_left.append(lefts), ex_level.append(np.full(1, L))
        lefts = lefts[:0]
    while L < final and lefts.size:
        step = min(3, final - L)
        lefts = _children(lefts, L, step)
        L += step
        resid = c.residual(_midpoints(lefts, L))
        out = c.lower_bound(resid, L) > delta
        ex_left.append(lefts[out])
        ex_level.append(np.full(int(out.sum()), L))
        lefts = lefts[~out]

    n = lefts.size
    found, wpts, wres = _witness_search(c, lefts, L, max(search_level, L), beam) if n else (
        np.zeros(0, bool), np.zeros(0, _U), np.zeros(0))
    if n:
        # a witness at the midpoint itself beats any searched point
        mids = _midpoints(lefts, L)
        mres = c.residual(mids)
        at_mid = mres <= delta
        wpts = np.where(at_mid, mids, wpts)
        wres = np.where(at_mid, mres, wres)
        found = found | at_mid

    all_left = np.concatenate(ex_left + [lefts]) if ex_left else lefts
    all_level = np.concatenate(ex_level + [np.full(n, L)]).astype(np.int64) if ex_left else np.full(n, L)
    status = np.concatenate(
        [np.full(sum(a.size for a in ex_left), EXCLUDED, np.int8), np.where(found, CANDIDATE, UNDECIDED).astype(np.int8)]
    )
    witness = np.concatenate([np.zeros(all_left.size - n, _U), np.where(found, wpts, _U(0))])
    wres_all = np.concatenate([np.full(all_left.size - n, np.inf), np.where(found, wres, np.inf)])
    order = np.argsort(all_left, kind="stable")
    cover = LevelSetCover(
        left=all_left[order],
        level=all_level[order],
        status=status[order],
        witness=witness[order],
        witness_residual=wres_all[order],
        delta=float(delta),
        N=N,
        resolution=int(resolution),
        period=period,
        tail_bound=tail_bound,
        classifier=c,
    )
    if cover.n_candidates == 0:
        raise LevelSetEmpty(
            f"no candidate arcs at delta={delta}, N={N}, resolution={resolution}", cover=cover
        )
    return cover


# ---------------------------------------------------------------------------
# The Cantor tree
# ---------------------------------------------------------------------------


def _hex64(u):
    return "0x." + format(int(u), "016x") + "0" * 48


def _from_hex64(text):
    return BinaryAngle.from_hex(text).bits >> 192


@dataclass
class CantorTree:
    """Nested families of closed arcs ``[a, b]``; ``levels[n-1]`` has ``2**n`` arcs.

    Endpoints are 64-bit angles (``uint64``, units of ``2**-64`` turns) and
    each level is sorted, so index ``j`` at level ``n`` is the binary word
    ``epsilon`` read as an integer.
    """

    a: list
    b: list
    meta: dict = field(default_factory=dict)

    @property
    def depth(self):
        return len(self.a)

    def level(self, n):
        """``(a, b)`` arrays of level ``n`` (1-based)."""
        return self.a[n - 1], self.b[n - 1]

    @property
    def deepest(self):
        return self.level(self.depth)

    def endpoints(self, n=None):
        a, b = self.level(n or self.depth)
        return np.sort(np.concatenate([a, b]))

    def truncate(self, depth):
        if not 1 <= depth <= self.depth:
            raise ValueError("depth out of range")
        meta = dict(self.meta, depth=depth)
        return CantorTree(self.a[:depth], self.b[:depth], meta)

    def lengths(self, n=None):
        a, b = self.level(n or self.depth)
        return (b - a).astype(float) / _TWO64

    def max_length(self, n=None):
        a, b = self.level(n or self.depth)
        return int(np.max(b - a)) / _TWO64

    # -- invariants -------------------------------------------------------
    def check(self):
        """Exact checks of nesting, ordering and shrinkage at every level."""
        nesting = ordering = shrink = True
        worst = []
        for n in range(1, self.depth + 1):
            a, b = (np.array([int(x) for x in arr], dtype=object) for arr in self.level(n))
            # ordering: a_0 < b_0 < a_1 < b_1 < ...
            seq = np.empty(2 * a.size, dtype=object)
            seq[0::2], seq[1::2] = a, b
            ordering &= all(int(x) < int(y) for x, y in zip(seq[:-1], seq[1:]))
            bound = Fraction(1, math.factorial(n))
            longest = max(Fraction(int(y) - int(x), 1 << 64) for x, y in zip(a, b))
            shrink &= longest < bound
            worst.append(float(longest / bound))
            if n > 1:
                pa, pb = (np.array([int(x) for x in arr], dtype=object) for arr in self.level(n - 1))
                nesting &= bool(np.all(a[0::2] == pa) and np.all(b[1::2] == pb))
                nesting &= all(int(pa[j]) <= int(b[2 * j]) and int(a[2 * j + 1]) <= int(pb[j]) for j in range(pa.size))
        return {"com1": bool(nesting), "com2": bool(ordering), "com3": bool(shrink), "length_ratio": worst}

    def level_measure(self, n):
        return float(np.sum(self.lengths(n)))

    # -- persistence -------------------------------------------------------
    def to_json(self):
        return {
            "depth": self.depth,
            "levels": [
                [{"a_hex": _hex64(x), "b_hex": _hex64(y)} for x, y in zip(*self.level(n))]
                for n in range(1, self.depth + 1)
            ],
            "meta": self.meta,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def from_json(cls, data):
        a, b = [], []
        for lev in data["levels"]:
            a.append(np.array([_from_hex64(r["a_hex"]) for r in lev], dtype=_U))
            b.append(np.array([_from_hex64(r["b_hex"]) for r in lev], dtype=_U))
        tree = cls(a, b, dict(data.get("meta", {})))
        if tree.depth != data["depth"]:
            raise ValueError("depth field does not match levels")
        return tree

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def tree_from_points(points, depth, meta=None):
    """Recursive halving of ``2**(depth+1)`` sorted points.

    The level-``n`` arc for word ``epsilon`` spans the block of points whose
    index starts with ``epsilon``; both nesting identities hold by construction.
    """
    pts = np.sort(np.asarray(points, dtype=_U))
    if pts.size != 2 ** (depth + 1):
        raise ValueError("need exactly 2**(depth+1) points")
    a, b = [], []
    for n in range(1, depth + 1):
        blocks = pts.reshape(2**n, -1)
        a.append(blocks[:, 0].copy())
        b.append(blocks[:, -1].copy())
    return CantorTree(a, b, dict(meta or {}, depth=depth))


def spread_widths(period, depth, span_bound):
    """Cell widths ``w_n`` (arcs at level ``n`` span ``w_n + 1`` cells).

    ``w_0 = period - 1`` and ``w_n`` is the largest width with room for two
    disjoint children (``2 w_n + 1 <= w_{n-1}``) and length
    ``w_n/period + span_bound < 1/n!``.
    """
    widths = [period - 1]
    for n in range(1, depth + 1):
        cap = Fraction(1, math.factorial(n)) - Fraction(span_bound)
        w = (widths[-1] - 1) // 2
        while w > 0 and Fraction(w, period) >= cap:
            w -= 1
        if widths[-1] == 0:
            w = 0
        widths.append(max(w, 0))
    return widths


def _spread_cells(widths, period):
    """First cell of every arc at the first level whose width is 0."""
    cells = [0]
    n = 0
    while widths[n] > 0:
        off = widths[n] - widths[n + 1]
        cells = [c + d for c in cells for d in (0, off)]
        n += 1
    return cells, n


def build_cantor(cover, depth=DEFAULT_DEPTH, seed=0, max_level=None, max_anchors=8, max_survivors=500_000, probe=True):
    """Nested arcs satisfying nesting, ordering and ``b - a < 1/n!``.

    The top levels spread over period cells (widths from :func:`spread_widths`);
    below the first single-cell level every arc holds a translate of one tight
    cluster of witnesses, found by refining a seed-chosen candidate arc.
    Cluster points are midpoints of distinct candidate sub-arcs.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    period = cover.period
    p = cover.period_level
    cand = np.flatnonzero(cover.status == CANDIDATE)
    if cand.size == 0:
        raise DepthUnreachable("cover has no candidate arcs", max_depth=0)
    # shallower trees are prefixes of the default-depth tree
    full = max(depth, DEFAULT_DEPTH)
    span_target = min(1e-9, 0.25 / math.factorial(full))
    widths = spread_widths(period, full, span_target)
    cells, s = _spread_cells(widths, period)
    k = 2 ** (full - s + 1)
    level = max_level or min(MAX_LEVEL, max(45, math.ceil(math.log2(4 * k / span_target)) + 1))

    rng = np.random.default_rng(seed)
    chosen = None
    for j in rng.permutation(cand.size)[:max_anchors]:
        idx = cand[j]
        try:
            mids = cover.refine_arc(cover.left[idx], cover.level[idx], level, max_survivors)
        except DepthUnreachable:
            continue
        if mids.size < 2:
            continue
        # tightest window of k consecutive witnesses
        kk = min(k, 2 ** int(math.log2(mids.size)))
        spans = mids[kk - 1:] - mids[: mids.size - kk + 1]
        i0 = int(np.argmin(spans))
        span = int(spans[i0]) / _TWO64
        if span < span_target and kk == k:
            chosen = (idx, mids[i0: i0 + k], span)
            break
    if chosen is None:
        raise DepthUnreachable(
            f"no cluster of {k} witnesses within {span_target:.3g} turns",
            max_depth=_max_feasible_depth(cover, depth - 1, seed, max_survivors) if probe else None,
        )
    idx, cluster, span = chosen
    # translate the cluster into cell 0, then into every cell of the spread
    cell_mask = ~((_U(1) << _U(64 - p)) - _U(1)) if p > 0 else _U(0)
    rel = cluster - (cluster[0] & cell_mask)
    shifts = np.array(cells, dtype=_U) << _U(64 - p) if p > 0 else np.zeros(1, _U)
    points = (shifts[:, None] + rel[None, :]).reshape(-1)
    meta = {
        "seed": int(seed),
        "delta": cover.delta,
        "N": cover.N,
        "period": period,
        "widths": widths,
        "spread_levels": s,
        "cluster_span": span,
        "cluster_size": int(k),
        "refine_level": int(level),
        "anchor_hex": _hex64(cover.left[idx]),
        "cluster_hex": [_hex64(x) for x in rel],
    }
    tree = tree_from_points(points, full, meta).truncate(depth)
    chk = tree.check()
    if not (chk["com1"] and chk["com2"] and chk["com3"]):
        raise DepthUnreachable(f"tree fails its invariants: {chk}", max_depth=depth - 1)
    return tree


def _max_feasible_depth(cover, start, seed, max_survivors):
    for d in range(start, DEFAULT_DEPTH, -1):
        try:
            build_cantor(cover, d, seed, max_anchors=2, max_survivors=max_survivors, probe=False)
            return d
        except DepthUnreachable:
            continue
    return min(start, DEFAULT_DEPTH)


# ---------------------------------------------------------------------------
# Distances and integrability
# ---------------------------------------------------------------------------


def _as_top64(z):
    if isinstance(z, BinaryAngle):
        return np.array([z.bits >> (z.precision - 64)], dtype=_U)
    if isinstance(z, AngleArray):
        return z.top64(0)
    return np.asarray(z, dtype=_U)


def turn_distance(z, tree):
    """Arc distance in turns from each point to the union of deepest arcs."""
    a, b = tree.deepest
    u = _as_top64(z)
    i = np.searchsorted(a, u, side="right") - 1  # last arc starting at or before u
    i = np.where(i < 0, a.size - 1, i)  # wraps to the last arc
    inside = (u - a[i]) <= (b[i] - a[i])
    right = (u - b[i]).astype(float)  # distance past the end (mod 1)
    nxt = (i + 1) % a.size
    left = (a[nxt] - u).astype(float)
    d = np.minimum(right, left) / _TWO64
    return np.where(inside, 0.0, np.minimum(d, 1.0 - d))


def dist_to_K(z, tree):
    """Chordal distance bracket ``(lower, upper)`` from ``z`` to K.

    ``lower`` is the distance to the union of deepest arcs, which contains K;
    each deepest arc meets K, so ``upper = lower + chord(longest arc)``.
    Works elementwise on arrays.
    """
    d = turn_distance(z, tree)
    lower = 2.0 * np.sin(np.pi * d)
    upper = lower + 2.0 * math.sin(math.pi * tree.max_length())
    if isinstance(z, BinaryAngle):
        return float(lower[0]), float(upper[0])
    return lower, upper


def jnj_closed_form(length, alpha):
    """``2**alpha L**(1-alpha) / (1-alpha)``: integral over a straight gap of length L."""
    if alpha >= 1:
        raise Unsupported("exponent must be below 1")
    return 2.0**alpha * np.asarray(length, dtype=float) ** (1.0 - alpha) / (1.0 - alpha)


def half_gap_integral(h, alpha, geometry="chord", levels=40, order=16):
    """``int_0^h d(u)**-alpha du`` with ``d(u) = u`` (line) or ``2 sin(pi u)`` (chord).

    Panels graded geometrically toward 0; the innermost piece uses the
    leading-order term analytically.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = 2.0 ** -np.arange(levels + 1)[::-1]  # 2**-levels .. 1
    lo, hi = edges[:-1], edges[1:]
    s = ((lo + hi)[:, None] + (hi - lo)[:, None] * x[None, :]).reshape(-1) / 2
    ws = ((hi - lo)[:, None] * w[None, :]).reshape(-1) / 2
    u = h[:, None] * s[None, :]
    if geometry == "line":
        f = u**-alpha
        lead = 1.0
    elif geometry == "chord":
        f = (2.0 * np.sin(np.pi * u)) ** -alpha
        lead = (2.0 * math.pi) ** -alpha
    else:
        raise ValueError("geometry is 'line' or 'chord'")
    body = h * (f @ ws)
    inner = h * 2.0**-levels
    return body + lead * inner ** (1 - alpha) / (1 - alpha)


@dataclass
class IntegrabilityReport:
    alpha: float
    depth: int
    total: float
    gap_lengths: np.ndarray
    gap_values: np.ndarray
    gap_line_values: np.ndarray
    series_partial_sums: list
    gap_measure: float

    def table(self):
        return [
            {"gap": j, "length": float(L), "value": float(v), "line_value": float(lv)}
            for j, (L, v, lv) in enumerate(zip(self.gap_lengths, self.gap_values, self.gap_line_values))
        ]


def gaps(tree):
    """Lengths (turns) of the complementary arcs of the deepest level, wrap gap last."""
    a, b = tree.deepest
    inner = (a[1:] - b[:-1]).astype(float) / _TWO64
    wrap = float((a[:1] - b[-1:])[0]) / _TWO64  # uint64 difference wraps mod 1
    return np.concatenate([inner, [wrap]])


def integrability_report(tree, alpha):
    """``int dist(x, K)**-alpha dmu`` summed over the gaps of the depth-d representation."""
    if alpha >= 1:
        raise Unsupported("dist**-alpha is not integrable for alpha >= 1")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    L = gaps(tree)
    vals = 2.0 * half_gap_integral(L / 2, alpha, "chord")
    line = jnj_closed_form(L, alpha)
    series = np.cumsum([2.0**n / math.factorial(n - 1) ** (1 - alpha) for n in range(1, tree.depth + 1)])
    return IntegrabilityReport(
        alpha=float(alpha),
        depth=tree.depth,
        total=float(np.sum(vals)),
        gap_lengths=L,
        gap_values=vals,
        gap_line_values=line,
        series_partial_sums=[float(x) for x in series],
        gap_measure=float(np.sum(L)),
    )
