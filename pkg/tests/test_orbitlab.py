"""Orbit coverage, log-norm bookkeeping and the density surrogate."""

import numpy as np
import pytest

from hyperrank.decomp import lemma_te_split
from hyperrank.eigenfield import sample_lambdas
from hyperrank.errors import StepLimit
from hyperrank.galerkin import build_model, discrete_space
from hyperrank.orbitlab import (
    density_surrogate,
    eigen_crowding_report,
    phase_cells,
    run_orbit,
    weyl_coverage,
)

GOLDEN = (5**0.5 - 1) / 2


@pytest.fixture(scope="module")
def space(default_funcs, default_mesh):
    return discrete_space(default_funcs, default_mesh)


@pytest.fixture(scope="module")
def models(space, default_tree):
    return [build_model(sample_lambdas(default_tree, m), space) for m in (8, 16, 32)]


@pytest.fixture(scope="module")
def splits(models):
    return [lemma_te_split(m) for m in models]


def test_identity_orbit_is_one_cell():
    run = run_orbit(np.eye(3), np.array([1.0, 2.0, 0.5]), 500)
    assert all(v == 1 for v in run.visited)
    assert run.norm_drift() == 0.0


def test_weyl_rotation_covers_circle():
    assert weyl_coverage(GOLDEN, 100_000, eps=0.05) >= 0.95


def test_weyl_coverage_grows_with_steps():
    cov = [weyl_coverage(GOLDEN, n) for n in (10, 40, 160)]
    assert cov[0] < cov[1] < cov[2]


def test_rational_rotation_stays_on_few_cells():
    # start mid-cell so rounding never crosses a cell boundary
    cells = phase_cells(0.05)
    x0 = np.array([np.exp(1j * np.pi / cells)])
    run = run_orbit(np.array([[1j]]), x0, 10_000, directions=np.ones((1, 1)), store=False)
    assert run.visited == [4]


def test_lognorm_bookkeeping_avoids_overflow():
    mat = np.array([[1e3, 1.0], [0.0, 0.5]])
    run = run_orbit(mat, np.array([1.0, 1.0]), 2000, store=False)
    assert np.isfinite(run.lognorms[-1])
    assert run.lognorms[-1] == pytest.approx(2000 * np.log(1e3), rel=1e-6)


def test_step_limit_when_a_single_step_overflows():
    with pytest.raises(StepLimit):
        # finite entries whose product with a unit vector exceeds the double range
        run_orbit(np.full((2, 2), 1.7e308), np.ones(2), 10)


def test_orbit_is_deterministic():
    rng = np.random.default_rng(0)
    mat = np.linalg.qr(rng.normal(size=(5, 5)))[0]
    a = run_orbit(mat, np.ones(5), 300, seed=4)
    b = run_orbit(mat, np.ones(5), 300, seed=4)
    assert a.visited == b.visited and np.array_equal(a.lognorms, b.lognorms)


def test_stream_receives_every_step():
    rows = []
    run_orbit(np.eye(2), np.ones(2), 9, store=False, stream=lambda n, ln, c: rows.append(n))
    assert rows == list(range(10))


def test_input_validation():
    with pytest.raises(ValueError):
        run_orbit(np.ones((2, 3)), np.ones(2), 5)
    with pytest.raises(ValueError):
        run_orbit(np.eye(2), np.zeros(2), 5)


def test_unitary_part_preserves_norm(splits):
    V = splits[-1].V_mat
    run = run_orbit(V, np.ones(V.shape[0]), 10_000, store=False)
    assert run.norm_drift() <= 1e-5


def test_T_lognorms_vary_more_than_V(models, splits):
    rows = eigen_crowding_report(models, splits, steps=512, seeds=range(5))
    for r in rows:
        assert r["lognorm_var_T"] > r["lognorm_var_V"]


def test_crowding_report_shape(models, splits):
    rows = eigen_crowding_report(models[:2], splits[:2], steps=64, seeds=range(2))
    assert [r["m"] for r in rows] == [8, 16]
    assert rows[0]["min_sep"] > rows[1]["min_sep"]
    assert rows[0]["cond"] <= rows[1]["cond"]
    assert len(rows[0]["coverage_T"]) == 3


def test_single_eigenvector_condition_number(space, default_tree):
    assert build_model(sample_lambdas(default_tree, 1), space).condition_number == pytest.approx(1.0)


def test_density_surrogate(models):
    model = models[1]
    assert density_surrogate(model, 1.0, 3) == pytest.approx(0.0, abs=1e-12)
    assert density_surrogate(model, (model.m - 1) / model.m, 3) > 0
    vals = [density_surrogate(model, f, 3) for f in (0.25, 0.5, 0.75, 1.0)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_density_surrogate_needs_four(space, default_tree):
    with pytest.raises(ValueError):
        density_surrogate(build_model(sample_lambdas(default_tree, 2), space), 0.5)
