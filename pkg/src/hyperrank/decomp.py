"""Unitary plus low-rank splittings of the Galerkin model.

``lemma_te_split`` builds ``V u = U u + <u, x>(y - U x)`` on K_m with x, y
the unit normals of the hyperplanes X_m, Y_m, so that ``T = V + R``.
``contraction_split`` writes ``T = A + S_part`` with ``A = P U`` on K_m.
Diagnostics are always recomputed from the matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import AuditFailure, HyperplaneDegenerate
from .galerkin import hyperplanes

RANK_RATIO = 1e-8
UNITARY_TOL = 1e-8
CONTRACTION_TOL = 1e-10


def _ratio(sv, k):
    """``sv[k] / sv[0]`` (0 when the matrix is zero or too small)."""
    if sv.size <= k or sv[0] == 0.0:
        return 0.0
    return float(sv[k] / sv[0])


def diagnose(V, R, A=None):
    """Fresh diagnostics of a splitting: unitarity of V, singular values of R and A."""
    n = V.shape[0]
    sv_R = sla.svdvals(R) if n else np.zeros(0)
    out = {
        "unitarity_defect": float(np.linalg.norm(V.conj().T @ V - np.eye(n), 2)) if n else 0.0,
        "singvals_R": sv_R.tolist(),
        "rank_ratio_R": _ratio(sv_R, 2),
        "rank1_ratio_R": _ratio(sv_R, 1),
    }
    if A is not None:
        sv_A = sla.svdvals(A) if n else np.zeros(0)
        out["norm_A"] = float(sv_A[0]) if sv_A.size else 0.0
        out["rank1_ratio_A"] = _ratio(sv_A, 1)
    return out


@dataclass
class Splitting:
    """``T_mat = V_mat + R_mat``; ``A_mat`` is the rank-one (te) or contraction part."""

    V_mat: np.ndarray
    R_mat: np.ndarray
    method: str
    branch: str
    A_mat: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def report(self):
        d = dict(self.diagnostics)
        d.update({"method": self.method, "branch": self.branch})
        d.setdefault("norm_A", None)
        return d


def lemma_te_split(model):
    """``T = V + R`` with V unitary on K_m and rank(R) <= 2.

    Generic branch (h and U^-1 h outside K_m): V from the hyperplane normals,
    ``A = U|_K - V`` of rank at most one inside K_m.  When h lies in K_m,
    U leaves K_m invariant: ``V = P U`` and ``R = S|_K`` of rank at most
    one, or ``R = 0`` if S vanishes on K_m.
    """
    T = model.T_mat
    U = model.U_core
    try:
        hp = hyperplanes(model)
    except HyperplaneDegenerate:
        R = T - U
        branch = "h_in_K" if np.any(model.phi != 0) else "S_zero"
        if branch == "S_zero":
            R = np.zeros_like(T)
        V = T - R
        return Splitting(V, R, "te", branch, None, diagnose(V, R))
    x, y = hp.x, hp.y
    V = U + np.outer(y - U @ x, x.conj())
    R = T - V
    A = U - V
    return Splitting(V, R, "te", "h_not_in_K", A, diagnose(V, R, A))


def contraction_split(model):
    """``T = A + S_part`` with ``A = P U`` restricted to K_m (a contraction) and S_part of rank one."""
    A = model.U_core.copy()
    S_part = model.T_mat - A
    d = diagnose(A, S_part, A)
    sv_S = np.asarray(d["singvals_R"])
    d["rank1_ratio_S"] = _ratio(sv_S, 1)
    return Splitting(A, S_part, "contraction", "contraction", A, d)


def _spectrum_match(ev, lam):
    """Largest distance from a target lambda to the nearest eigenvalue, and vice versa."""
    if lam.size == 0:
        return 0.0
    d = np.abs(ev[:, None] - lam[None, :])
    return float(max(d.min(axis=0).max(), d.min(axis=1).max()))


def audit_splitting(s, model, tol=UNITARY_TOL):
    """Recompute every diagnostic from scratch and raise on the first regression."""
    T = model.T_mat
    report = {"method": s.method, "branch": s.branch}
    scale = max(np.linalg.norm(T, 2), 1.0) if T.size else 1.0
    resum = float(np.linalg.norm(T - (s.V_mat + s.R_mat), 2)) if T.size else 0.0
    report["resummation"] = resum
    if resum > 1e-14 * scale:
        raise AuditFailure(f"T differs from V + R by {resum:.3e}", quantity="resummation")

    fresh = diagnose(s.V_mat, s.R_mat, s.A_mat)
    report.update(fresh)
    for key in ("unitarity_defect", "rank_ratio_R"):
        if key in s.diagnostics and abs(s.diagnostics[key] - fresh[key]) > 1e-12:
            raise AuditFailure(f"stored {key} differs from recomputation", quantity=key)

    if not model.appended_h and model.rank == model.m:
        ev_T = np.linalg.eigvals(T) if T.size else np.zeros(0)
        report["spectrum_T"] = _spectrum_match(ev_T, model.lam)
        if report["spectrum_T"] > tol:
            raise AuditFailure(f"spectrum of T off the lambdas by {report['spectrum_T']:.3e}", quantity="spectrum_T")

    if s.method == "contraction":
        if fresh["norm_A"] > 1 + CONTRACTION_TOL:
            raise AuditFailure(f"||P U|| = {fresh['norm_A']:.15f} > 1", quantity="norm_A")
        report["rank1_ratio_S"] = _ratio(np.asarray(fresh["singvals_R"]), 1)
        if report["rank1_ratio_S"] > RANK_RATIO:
            raise AuditFailure("S part is not rank one", quantity="rank1_ratio_S")
        return report

    ev_V = np.linalg.eigvals(s.V_mat) if s.V_mat.size else np.zeros(0)
    report["spectrum_V"] = float(np.max(np.abs(np.abs(ev_V) - 1))) if ev_V.size else 0.0
    checks = [
        ("unitarity_defect", fresh["unitarity_defect"]),
        ("spectrum_V", report["spectrum_V"]),
        ("rank_ratio_R", fresh["rank_ratio_R"]),
    ]
    if s.A_mat is not None:
        checks.append(("rank1_ratio_A", fresh["rank1_ratio_A"]))
    for name, value in checks:
        limit = RANK_RATIO if name.startswith("rank") else tol
        if value > limit:
            raise AuditFailure(f"{name} = {value:.3e} exceeds {limit:.0e}", quantity=name)
    return report
