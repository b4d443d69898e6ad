"""Orbit experiments on the finite models.

No operator on a finite-dimensional space is hypercyclic, so everything here
is a trend or a surrogate: coverage of projected orbits, growth of log-norms,
and how well subsets of eigenvectors span the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import StepLimit

RENORM_EVERY = 64


def phase_cells(eps):
    """Number of arcs of length at most ``eps`` covering the circle."""
    return max(1, math.ceil(2 * math.pi / eps))


@dataclass
class OrbitRun:
    """Log-norms and projected phases of ``mat**n x0`` for ``n = 0..n_steps``.

    ``coverage[k]`` is the fraction of the ``cells`` phase arcs visited by
    ``<x_n, d_k> / |<x_n, d_k>|``; ``visited[k]`` the count.
    """

    x0: np.ndarray
    n_steps: int
    eps: float
    directions: np.ndarray
    lognorms: np.ndarray
    coords: np.ndarray | None
    visited: list
    cells: int
    meta: dict = field(default_factory=dict)

    @property
    def coverage(self):
        return [v / self.cells for v in self.visited]

    def norm_drift(self):
        """``max_n | ||x_n|| / ||x_0|| - 1 |``."""
        return float(np.max(np.abs(np.expm1(self.lognorms - self.lognorms[0]))))

    def lognorm_variance(self):
        return float(np.var(self.lognorms))


def _safe_norm(x, step):
    a = np.max(np.abs(x))
    if not np.isfinite(a) or a == 0:
        raise StepLimit(f"orbit norm left the floating-point range at step {step}")
    return float(a * np.linalg.norm(x / a))


def default_directions(dim, seed=0, n_fixed=2):
    """The first ``n_fixed`` coordinate axes plus one seeded random unit direction."""
    rng = np.random.default_rng(seed)
    fixed = np.eye(dim, dtype=complex)[:, : min(n_fixed, dim)]
    r = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    r /= np.linalg.norm(r)
    return np.column_stack([fixed, r])


def run_orbit(mat, x0, n_steps, *, eps=0.05, directions=None, seed=0, store=True, stream=None, renorm_every=RENORM_EVERY):
    """Iterate ``x -> mat x`` with log-norm bookkeeping.

    The vector is renormalised every ``renorm_every`` steps (and earlier if
    an entry leaves ``[1e-150, 1e150]``) and the discarded scale accumulated
    in log form, so non-normal growth cannot overflow.  ``stream(step, lognorm, coords)`` receives every iterate when
    given; with ``store=False`` projected coordinates are not kept.
    """
    M = np.atleast_2d(np.asarray(mat, dtype=complex))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    x = np.asarray(x0, dtype=complex).reshape(-1)
    if x.size != M.shape[0]:
        raise ValueError("x0 has the wrong dimension")
    n0 = np.linalg.norm(x)
    if n0 == 0:
        raise ValueError("x0 must be nonzero")
    D = default_directions(x.size, seed) if directions is None else np.asarray(directions, dtype=complex)
    cells = phase_cells(eps)
    hits = np.zeros((D.shape[1], cells), dtype=bool)
    lognorms = np.empty(n_steps + 1)
    coords = np.empty((n_steps + 1, D.shape[1]), dtype=complex) if store else None
    offset = math.log(n0)
    x = x / n0
    for n in range(n_steps + 1):
        if n:
            with np.errstate(over="ignore", invalid="ignore"):  # caught below as StepLimit
                x = M @ x
            big = np.max(np.abs(x))
            if n % renorm_every == 0 or not 1e-150 < big < 1e150:
                s = _safe_norm(x, n)
                offset += math.log(s)
                x = x / s
        s = _safe_norm(x, n)
        lognorms[n] = offset + math.log(s)
        c = D.conj().T @ x
        nz = np.abs(c) > 0
        k = np.floor((np.angle(c[nz]) % (2 * math.pi)) / (2 * math.pi) * cells).astype(int) % cells
        hits[np.flatnonzero(nz), k] = True
        if store:
            coords[n] = c / s
        if stream is not None:
            stream(n, lognorms[n], c / s)
    visited = [int(v) for v in hits.sum(axis=1)]
    return OrbitRun(x0=np.asarray(x0, dtype=complex), n_steps=n_steps, eps=eps, directions=D,
                    lognorms=lognorms, coords=coords, visited=visited, cells=cells)


def weyl_coverage(theta, n_steps=100_000, eps=0.05):
    """Coverage of the one-dimensional rotation by ``exp(2 pi i theta)``."""
    run = run_orbit(np.array([[np.exp(2j * np.pi * theta)]]), np.array([1.0]), n_steps, eps=eps,
                    directions=np.ones((1, 1)), store=False)
    return run.coverage[0]


def density_surrogate(model, subset_fraction, rng_seed=0):
    """Largest residual of a frame vector of K_m against ``span{h_lam : lam in B}``.

    ``B`` is a prefix of a seeded random permutation, so for a fixed seed
    growing fractions give nested subsets.
    """
    m = model.rank
    if model.m < 4:
        raise ValueError("density surrogate needs m >= 4")
    perm = np.random.default_rng(rng_seed).permutation(model.m)
    k = min(model.m, max(1, math.ceil(subset_fraction * model.m)))
    cols = np.stack([model.coordinates(np.eye(model.m)[j]) for j in perm[:k]], axis=1)
    q, r, _ = sla.qr(cols, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    q = q[:, d > 1e-12 * d[0]]
    resid = np.eye(m) - q @ (q.conj().T)
    return float(np.max(np.linalg.norm(resid, axis=0)))


def min_separation(lambdas):
    z = np.array([l.to_complex() if hasattr(l, "to_complex") else complex(l) for l in lambdas])
    if z.size < 2:
        return float("inf")
    d = np.abs(z[:, None] - z[None, :])
    d[np.diag_indices(z.size)] = np.inf
    return float(d.min())


def compare_orbits(model, splitting, steps, eps, seed):
    """Orbit statistics of T and V from the same seeded start."""
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=model.rank) + 1j * rng.normal(size=model.rank)
    out = {}
    for name, mat in (("T", model.T_mat), ("V", splitting.V_mat)):
        run = run_orbit(mat, x0, steps, eps=eps, seed=seed, store=False)
        out[name] = {"coverage": run.coverage, "lognorm_var": run.lognorm_variance(), "drift": run.norm_drift()}
    return out


def eigen_crowding_report(models, splittings, steps=512, eps=0.05, seeds=range(5)):
    """Per model: Gram condition number, smallest lambda separation and orbit statistics.

    Coverage and log-norm variances are medians over ``seeds``.
    """
    rows = []
    for model, split in zip(models, splittings):
        stats = [compare_orbits(model, split, steps, eps, s) for s in seeds]
        cov = np.median([st["T"]["coverage"] for st in stats], axis=0)
        rows.append(
            {
                "m": model.m,
                "cond": model.condition_number,
                "min_sep": min_separation(model.lambdas),
                "coverage_T": [float(c) for c in cov],
                "lognorm_var_T": float(np.median([st["T"]["lognorm_var"] for st in stats])),
                "lognorm_var_V": float(np.median([st["V"]["lognorm_var"] for st in stats])),
                "drift_V": float(np.max([st["V"]["drift"] for st in stats])),
            }
        )
    return rows
