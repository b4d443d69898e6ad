"""The Galerkin model on span{h_lam} and its hyperplanes."""

import numpy as np
import pytest

from hyperrank.cantor import tree_from_points
from hyperrank.circle import BinaryAngle, LaurentPoly
from hyperrank.eigenfield import ConstructedFunctions, eigen_mesh, sample_lambdas
from hyperrank.errors import HyperplaneDegenerate, QuadratureInconsistency
from hyperrank.galerkin import (
    DiscreteSpace,
    GalerkinModel,
    build_model,
    check_gram,
    discrete_space,
    eigen_residuals,
    hyperplanes,
    membership_residuals,
    model_from_tree,
    residual_trend,
)


@pytest.fixture(scope="module")
def space(default_funcs, default_mesh):
    return discrete_space(default_funcs, default_mesh)


@pytest.fixture(scope="module")
def lambdas(default_tree):
    return sample_lambdas(default_tree)


@pytest.fixture(scope="module")
def model16(space, lambdas):
    return build_model(sample_lambdas_from(lambdas, 16), space)


def sample_lambdas_from(lams, m):
    stride = len(lams) / m
    return [lams[int(k * stride)] for k in range(m)]


@pytest.fixture(scope="module")
def antipodal():
    """K ~ {1, -1}, psi = z - 1/z, and the model on lam = 1, -1."""
    pts = np.array([0, 1 << 20, 1 << 63, (1 << 63) + (1 << 20)], dtype=np.uint64)
    tree = tree_from_points(pts, 1)
    f = ConstructedFunctions(tree, 12, psi=LaurentPoly({1: 1.0, -1: -1.0}), delta=0.0)
    sp = discrete_space(f, eigen_mesh(tree))
    return build_model([BinaryAngle.zero(), BinaryAngle.from_fraction(0.5)], sp)


def test_single_eigenvector(space, lambdas):
    mod = build_model(lambdas[:1], space)
    norm = np.sqrt(np.real(mod.gram[0, 0]))
    assert mod.coeffs[0, 0] == pytest.approx(1 / norm, rel=1e-13)
    assert mod.T_mat[0, 0] == pytest.approx(lambdas[0].to_complex(), abs=1e-14)


def test_two_eigenvalues(space, lambdas):
    mod = build_model([lambdas[0], lambdas[40]], space)
    ev = np.sort_complex(np.linalg.eigvals(mod.T_mat))
    target = np.sort_complex(mod.lam)
    assert np.max(np.abs(ev - target)) <= 1e-8


def test_gram_is_hermitian_and_psd(model16):
    assert np.array_equal(model16.gram, model16.gram.conj().T)
    assert model16.gram_eigs[0] > 0


def test_indefinite_gram_rejected():
    with pytest.raises(QuadratureInconsistency):
        check_gram(np.array([[1.0, 0.0], [0.0, -0.5]]))


def test_frame_reproduces_gram(model16):
    C = model16.coeffs
    assert np.allclose(C.conj().T @ model16.gram @ C, np.eye(16), atol=1e-12)


def test_T_is_similar_to_diagonal(model16):
    assert np.max(np.abs(model16.T_mat - model16.diagonal_form())) <= 1e-12
    ev = np.linalg.eigvals(model16.T_mat)
    d = np.abs(ev[:, None] - model16.lam[None, :])
    assert d.min(axis=0).max() <= 1e-8


def test_invariance_is_exact(model16):
    assert model16.invariance_defect <= 1e-12


def test_U_columns_orthonormal(model16):
    A = np.vstack([model16.U_core, model16.U_out[None, :]])
    assert np.allclose(A.conj().T @ A, np.eye(16), atol=1e-12)


def test_separation_precondition(default_funcs, default_mesh, lambdas):
    close = BinaryAngle(lambdas[0].bits + (1 << 236))  # 2**-20 turns away
    with pytest.raises(ValueError):
        model_from_tree(default_funcs, default_mesh, [lambdas[0], close])
    with pytest.raises(ValueError):
        build_model([lambdas[0], lambdas[0]], discrete_space(default_funcs, default_mesh))


def test_condition_number_grows_with_m(space, lambdas):
    # nested prefixes: the Gram of a subset is a principal submatrix
    conds = [build_model(lambdas[:k], space).condition_number for k in (1, 2, 4, 8, 16)]
    assert conds[0] == pytest.approx(1.0)
    assert all(b >= a * (1 - 1e-12) for a, b in zip(conds, conds[1:]))


# -- hyperplanes ------------------------------------------------------------------


def test_hyperplanes_for_plus_minus_one(antipodal):
    hp = hyperplanes(antipodal)
    assert hp.dims == (1, 1)
    u = antipodal.coordinates([1, -1])
    v = antipodal.coordinates([1, 1])
    # X is spanned by h_1 - h_-1, Y by h_1 + h_-1
    assert abs(np.vdot(hp.x, u)) <= 1e-12 * np.linalg.norm(u)
    assert abs(np.vdot(hp.y, v)) <= 1e-12 * np.linalg.norm(v)
    assert abs(np.vdot(hp.X_basis[:, 0], u)) == pytest.approx(np.linalg.norm(u), rel=1e-12)


def test_U_maps_X_into_K(model16):
    hp = hyperplanes(model16)
    assert np.max(np.abs(model16.U_out @ hp.X_basis)) <= 1e-12
    # U (sum c h_lam) = sum c lam h_lam when sum c = 0
    c = np.zeros(16, complex)
    c[[2, 9]] = [1, -1]
    u = model16.coordinates(c)
    assert np.allclose(model16.U_core @ u, model16.coordinates(c * model16.lam), atol=1e-12)


def test_x_orthogonal_to_X(model16):
    hp = hyperplanes(model16)
    m = model16.m
    cs = np.eye(m, dtype=complex)[:, :-1] - np.eye(m, dtype=complex)[:, 1:]  # sum c = 0
    X = np.linalg.qr(model16.coordinates(cs))[0]
    assert np.max(np.abs(hp.x.conj() @ X)) <= 1e-10
    assert hp.dims == (m - 1, m - 1)


def test_hyperplanes_degenerate_when_h_in_span():
    sp = _full_space(5)
    mod = build_model(_tiny_lambdas(4), sp, append_h=True)
    assert mod.h_residual <= 1e-12 * mod.h_norm
    with pytest.raises(HyperplaneDegenerate):
        hyperplanes(mod)


# -- membership ------------------------------------------------------------------


def test_membership_empty_model(space):
    mod = build_model([], space)
    res_h, res_uinv = membership_residuals(mod)
    assert res_h == pytest.approx(mod.h_norm, rel=1e-15)
    assert res_uinv == pytest.approx(res_h, rel=1e-12)


def test_membership_residuals_decrease(space, lambdas):
    rows = residual_trend(lambdas, space, [0, 1, 2, 4, 8, 16, 32])
    res = [r["res_h"] for r in rows]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))
    assert all(r["res_uinv_h"] > 0 for r in rows)


def test_uinv_h_norm_equals_h_norm(space):
    assert np.linalg.norm(space.scaled(np.conj(space.points) * space.h)) == pytest.approx(
        np.linalg.norm(space.scaled(space.h)), rel=1e-12
    )


# -- persistence and residual table -------------------------------------------------


def test_json_round_trip(model16, tmp_path):
    path = tmp_path / "model.json"
    model16.save(path)
    back = GalerkinModel.load(path)
    assert [l.hex() for l in back.lambdas] == [l.hex() for l in model16.lambdas]
    assert np.array_equal(back.T_mat, model16.T_mat)
    assert np.array_equal(back.gram, model16.gram)
    assert back.invariance_defect == model16.invariance_defect


def test_eigen_residual_rows(model16, default_funcs, default_mesh):
    rows = eigen_residuals(model16, default_funcs, default_mesh)
    assert len(rows) == 16
    for r in rows:
        assert r["eigen_residual"] == pytest.approx(r["pairing_residual"], rel=1e-10)
        assert r["uhl_residual"] <= 1e-14


# -- synthetic spaces ----------------------------------------------------------------


def _full_space(n):
    t = (np.arange(n) + 0.3) / n
    rng = np.random.default_rng(n)
    h = rng.normal(size=n) + 1j * rng.normal(size=n)
    return DiscreteSpace(np.exp(2j * np.pi * t), np.full(n, 1.0 / n), h)


def _tiny_lambdas(k):
    return list(np.exp(2j * np.pi * (np.arange(k) / k + 0.07)))
