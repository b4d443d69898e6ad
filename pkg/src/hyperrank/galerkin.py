"""Finite-dimensional model of T = U + S on K_m = span{h_lam_1, ..., h_lam_m}.

Everything lives in a weighted discrete L2 space: node values ``f_k`` with
inner product ``sum(w_k f_k conj(g_k))``.  Multiplication by the node points
is exactly unitary there, so the algebra of the infinite-dimensional
construction carries over verbatim.  Vectors are stored scaled by
``sqrt(weights)``, which turns the weighted inner product into the Euclidean
one.

The pairing ``<h_lam, g>`` is forced to 1 (the analytic value) unless other
pairings are passed, which makes ``T h_lam = lam h_lam`` exact and ``K_m``
exactly invariant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .circle.angles import AngleArray, BinaryAngle
from .eigenfield import cauchy_denominator
from .errors import HyperplaneDegenerate, QuadratureInconsistency

RANK_TOL = 1e-10  # relative singular-value cutoff for the spanning family
GRAM_TOL = 1e-12  # tolerated negative eigenvalue of the Gram matrix, relative
DEGENERATE_TOL = 1e-8  # h counts as a member of K_m below this relative residual


@dataclass
class DiscreteSpace:
    """Nodes, positive weights and the values of h on them."""

    nodes: object  # AngleArray, or complex points for synthetic spaces
    weights: np.ndarray
    h: np.ndarray

    @property
    def points(self):
        if isinstance(self.nodes, AngleArray):
            return self.nodes.to_complex()
        return np.asarray(self.nodes, dtype=complex)

    @property
    def size(self):
        return self.weights.size

    def scaled(self, values):
        return np.sqrt(self.weights) * values

    def h_lambda(self, lam):
        den = cauchy_denominator(lam, self.nodes)
        if np.any(den == 0):
            raise ValueError(f"lambda {_lam_label(lam)} coincides with a node")
        return self.h / den


def discrete_space(funcs, mesh):
    return DiscreteSpace(mesh.nodes, np.asarray(mesh.weights, dtype=float), funcs.h(mesh.nodes))


def _lam_complex(lam):
    return lam.to_complex() if isinstance(lam, BinaryAngle) else complex(lam)


def _lam_label(lam):
    if isinstance(lam, BinaryAngle):
        return lam.hex()
    return f"{complex(lam).real:.17g}{complex(lam).imag:+.17g}j"


def check_gram(gram, tol=GRAM_TOL):
    """Hermitian part of ``gram`` and its eigenvalues; raise if it is indefinite."""
    G = np.asarray(gram, dtype=complex)
    if G.size == 0:
        return G, np.zeros(0)
    herm = (G + G.conj().T) / 2
    ev = np.linalg.eigvalsh(herm)
    scale = max(abs(ev[-1]), np.finfo(float).tiny)
    if ev[0] < -tol * scale:
        raise QuadratureInconsistency(
            f"Gram matrix indefinite: smallest eigenvalue {ev[0]:.3e} against largest {ev[-1]:.3e}"
        )
    return herm, ev


def _phase_fix(v):
    """Scale a vector so its coordinate of largest modulus is real positive."""
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k]) if v[k] != 0 else v


@dataclass
class GalerkinModel:
    """Matrices of U, S and T on K_m in an orthonormal frame.

    ``coeffs[:, k]`` holds the coefficients of frame vector ``k`` over the
    spanning family (``m`` eigenvectors, then ``h`` when appended).
    ``U_core`` is ``P U`` on K_m and ``U_out`` the row of ``U`` along the
    unit vector ``(I - P) h / ||(I - P) h||``; when U maps K_m into
    ``K_m + span{h}`` the two together have orthonormal columns.  ``S``
    acts as ``phi(u) h``.
    """

    lambdas: list
    labels: list
    gram: np.ndarray
    gram_eigs: np.ndarray
    coeffs: np.ndarray
    r_factor: np.ndarray
    pivots: np.ndarray
    rank: int
    singular_values: np.ndarray
    T_mat: np.ndarray
    U_core: np.ndarray
    U_out: np.ndarray
    phi: np.ndarray
    h_coords: np.ndarray
    h_residual: float
    h_norm: float
    uinv_h_coords: np.ndarray
    uinv_h_residual: float
    pairings: np.ndarray
    appended_h: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return len(self.lambdas)

    @property
    def lam(self):
        return np.array([_lam_complex(l) for l in self.lambdas], dtype=complex)

    @property
    def condition_number(self):
        sv = self.singular_values
        return float((sv[0] / sv[-1]) ** 2) if sv.size else 1.0

    @property
    def eigen_columns(self):
        """Frame indices of the eigenvectors that survived rank revealing."""
        return [j for j in self.pivots[: self.rank] if j < self.m]

    def coordinates(self, c):
        """Frame coordinates of ``sum(c_j v_j)`` over the spanning family."""
        R = self.r_factor[: self.rank]
        return R[:, np.argsort(self.pivots)] @ np.asarray(c, dtype=complex)

    def diagonal_form(self):
        """``Rf diag(lam) Rf^-1`` on the eigenvector frame (no appended h)."""
        if self.appended_h:
            raise ValueError("the diagonal form needs a frame of eigenvectors only")
        cols = self.pivots[: self.rank]
        R = self.r_factor[: self.rank, : self.rank]
        return R @ np.diag(self.lam[cols]) @ sla.solve_triangular(R, np.eye(self.rank, dtype=complex))

    @property
    def invariance_defect(self):
        """``||(I - P) T||`` on K_m, measured when the model was built."""
        return self.meta["invariance_defect"]

    # -- persistence --------------------------------------------------------
    def to_json(self):
        def cm(a):
            a = np.asarray(a, dtype=complex)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "lambdas": [
                l.hex() if isinstance(l, BinaryAngle) else {"re": complex(l).real, "im": complex(l).imag}
                for l in self.lambdas
            ],
            "labels": self.labels,
            "gram": cm(self.gram),
            "gram_eigs": self.gram_eigs.tolist(),
            "frame": cm(self.coeffs),
            "r_factor": cm(self.r_factor),
            "pivots": [int(p) for p in self.pivots],
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
            "T_mat": cm(self.T_mat),
            "U_core": cm(self.U_core),
            "U_out": cm(self.U_out),
            "phi": cm(self.phi),
            "h_coords": cm(self.h_coords),
            "h_residual": self.h_residual,
            "h_norm": self.h_norm,
            "uinv_h_coords": cm(self.uinv_h_coords),
            "uinv_h_residual": self.uinv_h_residual,
            "pairings": cm(self.pairings),
            "appended_h": self.appended_h,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data):
        def ca(d):
            return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)

        lambdas = [
            BinaryAngle.from_hex(l) if isinstance(l, str) else complex(l["re"], l["im"]) for l in data["lambdas"]
        ]
        return cls(
            lambdas=lambdas,
            labels=list(data["labels"]),
            gram=ca(data["gram"]),
            gram_eigs=np.asarray(data["gram_eigs"], dtype=float),
            coeffs=ca(data["frame"]),
            r_factor=ca(data["r_factor"]),
            pivots=np.asarray(data["pivots"], dtype=int),
            rank=int(data["rank"]),
            singular_values=np.asarray(data["singular_values"], dtype=float),
            T_mat=ca(data["T_mat"]),
            U_core=ca(data["U_core"]),
            U_out=ca(data["U_out"]),
            phi=ca(data["phi"]),
            h_coords=ca(data["h_coords"]),
            h_residual=float(data["h_residual"]),
            h_norm=float(data["h_norm"]),
            uinv_h_coords=ca(data["uinv_h_coords"]),
            uinv_h_residual=float(data["uinv_h_residual"]),
            pairings=ca(data["pairings"]),
            appended_h=bool(data["appended_h"]),
            meta=dict(data.get("meta", {})),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_lambdas(lambdas, min_separation):
    lam = np.array([_lam_complex(l) for l in lambdas], dtype=complex)
    if lam.size < 2:
        return
    d = np.abs(lam[:, None] - lam[None, :])
    d[np.diag_indices(lam.size)] = np.inf
    if np.min(d) == 0.0:
        raise ValueError("lambdas must be distinct")
    if min_separation and np.min(d) < min_separation:
        raise ValueError(f"lambdas closer than {min_separation:.3g} (chordal)")


def build_model(lambdas, space, *, pairings=None, h_pairing=0.0, append_h=False, min_separation=None, rank_tol=RANK_TOL):
    """Assemble the Galerkin model on ``span{h_lam}`` (plus ``h`` with ``append_h``).

    ``pairings`` are the values of ``<h_lam, g>`` (default 1) and
    ``h_pairing`` that of ``<h, g>``; S acts on K_m through them.  The frame
    comes from a column-pivoted QR of the scaled spanning vectors; columns
    whose pivot falls below ``rank_tol`` times the largest are dropped.
    """
    lambdas = list(lambdas)
    _check_lambdas(lambdas, min_separation)
    m = len(lambdas)
    pairings = np.ones(m, dtype=complex) if pairings is None else np.asarray(pairings, dtype=complex)
    if pairings.shape != (m,):
        raise ValueError("one pairing per lambda")
    w = space.points
    bh = space.scaled(space.h)
    cols = [space.scaled(space.h_lambda(l)) for l in lambdas]
    labels = [_lam_label(l) for l in lambdas]
    sigma = list(pairings)
    if append_h:
        cols.append(bh)
        labels.append("h")
        sigma.append(h_pairing)
    n_span = len(cols)
    B = np.stack(cols, axis=1) if cols else np.zeros((space.size, 0), dtype=complex)
    gram, gram_eigs = check_gram(B.conj().T @ B)

    if n_span:
        Q, R, piv = sla.qr(B, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > rank_tol * diag[0])) if diag[0] > 0 else 0
        # make the diagonal of R real positive so frames are canonical
        ph = np.ones(R.shape[0], dtype=complex)
        nz = diag > 0
        ph[nz] = np.diag(R)[nz] / diag[nz]
        Q = Q * ph[None, :]
        R = R / ph[:, None]
        Q = Q[:, :rank]
        C = np.zeros((n_span, rank), dtype=complex)
        C[piv[:rank], :] = sla.solve_triangular(R[:rank, :rank], np.eye(rank, dtype=complex))
        sv = sla.svdvals(B)
    else:
        Q = np.zeros((space.size, 0), dtype=complex)
        R = np.zeros((0, 0), dtype=complex)
        piv = np.zeros(0, dtype=int)
        rank = 0
        C = np.zeros((0, 0), dtype=complex)
        sv = np.zeros(0)

    UQ = w[:, None] * Q
    U_core = Q.conj().T @ UQ
    E = UQ - Q @ U_core
    phi = np.asarray(sigma, dtype=complex) @ C if n_span else np.zeros(0, dtype=complex)
    c_h = Q.conj().T @ bh
    h_perp = bh - Q @ c_h
    r_h = float(np.linalg.norm(h_perp))
    # U leaves K_m only along h_perp; its row in that direction
    U_out = (h_perp.conj() @ E) / r_h if r_h > 0 else np.zeros(rank, dtype=complex)
    defect = float(np.linalg.norm(E + np.outer(h_perp, phi), 2)) if rank else 0.0
    binv = np.conj(w) * bh
    c_hinv = Q.conj().T @ binv
    r_hinv = float(np.linalg.norm(binv - Q @ c_hinv))
    T_mat = U_core + np.outer(c_h, phi)
    return GalerkinModel(
        lambdas=lambdas,
        labels=labels,
        gram=gram,
        gram_eigs=gram_eigs,
        coeffs=C,
        r_factor=R,
        pivots=np.asarray(piv, dtype=int),
        rank=rank,
        singular_values=sv,
        T_mat=T_mat,
        U_core=U_core,
        U_out=U_out,
        phi=phi,
        h_coords=c_h,
        h_residual=r_h,
        h_norm=float(np.linalg.norm(bh)),
        uinv_h_coords=c_hinv,
        uinv_h_residual=r_hinv,
        pairings=pairings,
        appended_h=append_h,
        meta={"nodes": int(space.size), "invariance_defect": defect},
    )


def model_from_tree(funcs, mesh, lambdas, **kw):
    """Convenience: the model on the graded mesh of the tree, with the 10/d! separation check."""
    kw.setdefault("min_separation", 10.0 / math.factorial(funcs.tree.depth))
    return build_model(lambdas, discrete_space(funcs, mesh), **kw)


@dataclass
class Hyperplanes:
    """Unit normals ``x`` of X_m and ``y`` of Y_m, and orthonormal bases of both."""

    x: np.ndarray
    y: np.ndarray
    X_basis: np.ndarray
    Y_basis: np.ndarray
    ell_x: np.ndarray
    ell_y: np.ndarray

    @property
    def dims(self):
        return self.X_basis.shape[1], self.Y_basis.shape[1]


def _complement(v):
    """Orthonormal basis of the orthogonal complement of the unit vector ``v``."""
    n = v.size
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(n, dtype=complex)]))
    return q[:, 1:n]


def hyperplanes(model, tol=DEGENERATE_TOL):
    """X_m = {sum c_j h_lam_j : sum c_j = 0}, Y_m = {sum d_j h_lam_j : sum d_j / lam_j = 0}.

    In frame coordinates the functionals are ``ell_x = 1^T C`` and
    ``ell_y = (1/lam)^T C``, and the normals are their conjugates, scaled to
    unit length with the largest coordinate real positive.
    """
    if model.appended_h:
        raise HyperplaneDegenerate("h is in the spanning set, so U leaves K_m invariant")
    rel = min(model.h_residual, model.uinv_h_residual) / model.h_norm
    if rel < tol:
        raise HyperplaneDegenerate(f"h is within {rel:.2e} (relative) of K_m")
    if model.rank < 1:
        raise HyperplaneDegenerate("empty model")
    C = model.coeffs
    ell_x = np.ones(model.m) @ C[: model.m]
    ell_y = (1.0 / model.lam) @ C[: model.m]
    x = _phase_fix(ell_x.conj() / np.linalg.norm(ell_x))
    y = _phase_fix(ell_y.conj() / np.linalg.norm(ell_y))
    return Hyperplanes(x, y, _complement(x), _complement(y), ell_x, ell_y)


def membership_residuals(model):
    """``(||h - P h||, ||U^-1 h - P U^-1 h||)``."""
    return model.h_residual, model.uinv_h_residual


def residual_trend(lambdas, space, sizes):
    """Membership residuals for the nested prefixes ``lambdas[:k]`` (stride-nested sets)."""
    rows = []
    for k in sizes:
        mod = build_model(lambdas[:k], space)
        rows.append({"m": k, "res_h": mod.h_residual, "res_uinv_h": mod.uinv_h_residual, "cond": mod.condition_number})
    return rows


def eigen_residuals(model, funcs, mesh):
    """Per-lambda rows: pairing residual, eigen residual and the (uhl) residual on the mesh."""
    from .eigenfield import eigen_residual, verify_uhl

    h = funcs.h(mesh.nodes)
    rows = []
    for lam, label in zip(model.lambdas, model.labels):
        eig, pair = eigen_residual(funcs, mesh, lam)
        rows.append(
            {
                "lambda_hex": label,
                "pairing_residual": pair,
                "eigen_residual": eig,
                "uhl_residual": verify_uhl(lam, mesh.nodes, h),
            }
        )
    return rows
