"""Unitary plus low-rank splittings and their audit."""

import numpy as np
import pytest

from hyperrank.decomp import audit_splitting, contraction_split, lemma_te_split
from hyperrank.eigenfield import sample_lambdas
from hyperrank.errors import AuditFailure
from hyperrank.galerkin import DiscreteSpace, build_model, discrete_space, hyperplanes


@pytest.fixture(scope="module")
def space(default_funcs, default_mesh):
    return discrete_space(default_funcs, default_mesh)


@pytest.fixture(scope="module", params=[8, 16, 32])
def model(request, space, default_tree):
    return build_model(sample_lambdas(default_tree, request.param), space)


def _full_space(n=6):
    t = (np.arange(n) + 0.3) / n
    rng = np.random.default_rng(1)
    h = rng.normal(size=n) + 1j * rng.normal(size=n)
    return DiscreteSpace(np.exp(2j * np.pi * t), np.full(n, 1.0 / n), h)


def _tiny_lambdas(k):
    return list(np.exp(2j * np.pi * (np.arange(k) / k + 0.07)))


def test_te_split_is_unitary_plus_rank_two(model):
    s = lemma_te_split(model)
    d = s.diagnostics
    assert s.branch == "h_not_in_K"
    assert d["unitarity_defect"] <= 1e-8
    assert d["rank_ratio_R"] <= 1e-8
    assert d["rank1_ratio_A"] <= 1e-8
    assert np.array_equal(s.V_mat + s.R_mat, s.V_mat + (model.T_mat - s.V_mat))


def test_V_maps_x_to_y_and_agrees_with_U_on_X(model):
    s = lemma_te_split(model)
    hp = hyperplanes(model)
    assert np.allclose(s.V_mat @ hp.x, hp.y, atol=1e-13)
    assert np.max(np.abs((s.V_mat - model.U_core) @ hp.X_basis)) <= 1e-13


def test_contraction_split(model):
    s = contraction_split(model)
    assert s.diagnostics["norm_A"] <= 1 + 1e-10
    assert s.diagnostics["rank1_ratio_S"] <= 1e-8
    assert np.array_equal(s.V_mat + s.R_mat, s.V_mat + (model.T_mat - s.V_mat))


def test_audit_passes(model):
    for s in (lemma_te_split(model), contraction_split(model)):
        rep = audit_splitting(s, model)
        assert rep["spectrum_T"] <= 1e-8
    rep = audit_splitting(lemma_te_split(model), model)
    assert rep["spectrum_V"] <= 1e-8


def test_audit_detects_broken_unitary(model):
    s = lemma_te_split(model)
    s.V_mat = s.V_mat * 1.001
    s.R_mat = model.T_mat - s.V_mat
    with pytest.raises(AuditFailure) as err:
        audit_splitting(s, model)
    assert err.value.quantity in {"unitarity_defect", "spectrum_V"}


def test_audit_detects_tampered_resummation(model):
    s = lemma_te_split(model)
    s.R_mat = s.R_mat + 1e-9
    with pytest.raises(AuditFailure) as err:
        audit_splitting(s, model)
    assert err.value.quantity == "resummation"


def test_audit_detects_stale_diagnostics(model):
    s = lemma_te_split(model)
    s.diagnostics = dict(s.diagnostics, unitarity_defect=0.5)
    with pytest.raises(AuditFailure):
        audit_splitting(s, model)


def test_h_in_K_branch():
    sp = _full_space()
    mod = build_model(_tiny_lambdas(5), sp, append_h=True)
    s = lemma_te_split(mod)
    assert s.branch == "h_in_K"
    assert s.diagnostics["unitarity_defect"] <= 1e-12
    assert s.diagnostics["rank1_ratio_R"] <= 1e-8
    audit_splitting(s, mod)


def test_S_zero_branch_makes_T_unitary():
    # g := 0: all pairings vanish, so S = 0 and T is U on an invariant space
    sp = _full_space()
    mod = build_model(_tiny_lambdas(5), sp, append_h=True, pairings=np.zeros(5))
    s = lemma_te_split(mod)
    assert s.branch == "S_zero"
    assert np.all(s.R_mat == 0)
    assert np.linalg.norm(mod.T_mat.conj().T @ mod.T_mat - np.eye(mod.rank)) <= 1e-12
    audit_splitting(s, mod)


def test_report_fields(model):
    rep = lemma_te_split(model).report()
    assert {"unitarity_defect", "singvals_R", "norm_A", "branch"} <= set(rep)
