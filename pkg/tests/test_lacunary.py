"""gamma, psi, the Hölder constant and the exact hypothesis checker."""

import time
from fractions import Fraction

import numpy as np
import pytest

from hyperrank.circle import AngleArray, BinaryAngle, holder_ratio_sup, uniform_grid, inner_product
from hyperrank.errors import DomainViolation, PrecisionExhausted, Unsupported
from hyperrank.lacunary import (
    BelovParams,
    LacunarySeries,
    belov_check,
    gamma_eval,
    gamma_function,
    holder_constant,
    psi_eval,
    psi_function,
    tail,
)

EIGHT_SEVENTHS = 8 / 7


@pytest.mark.parametrize("t", [Fraction(0), Fraction(1, 2), Fraction(1, 4)])
def test_gamma_at_dyadic_points_is_geometric_sum(t):
    value, err = gamma_eval(BinaryAngle.from_fraction(t), N=20)
    assert abs(value - EIGHT_SEVENTHS) <= err


def test_psi_at_one():
    value, err = psi_eval(BinaryAngle.zero(), N=20)
    assert abs(value - 16 / 7) <= err


def test_tail_formula():
    assert tail(12) == pytest.approx(8.0**-11 / 7, rel=1e-15)
    assert tail(12) < 1.7e-11


def test_error_bound_is_honest():
    rng = np.random.default_rng(0)
    angles = AngleArray.from_floats(rng.random(2000), rng=rng)
    coarse = LacunarySeries(6)
    fine = LacunarySeries(20).values(angles)
    assert np.max(np.abs(coarse.values(angles) - fine)) <= coarse.tail()


def test_truncation_limited_by_precision():
    with pytest.raises(PrecisionExhausted):
        gamma_eval(BinaryAngle.from_fraction("0.1"), N=23)
    gamma_eval(BinaryAngle.from_fraction("0.1"), N=22)


def test_psi_is_twice_real_part_and_conjugation_symmetric():
    rng = np.random.default_rng(1)
    angles = AngleArray.from_floats(rng.random(500), rng=rng)
    g = gamma_function()(angles)
    p = psi_function()(angles)
    assert np.max(np.abs(p - 2 * g.real)) < 1e-13
    assert np.max(np.abs(gamma_function()(angles.conj()) - np.conj(g))) < 1e-13
    assert np.max(np.abs(psi_function()(angles.conj()) - np.conj(p))) < 1e-13


@pytest.mark.parametrize("N, k", [(1, 10), (2, 19)])
def test_psi_has_mean_zero(N, k):
    # a 2**k grid integrates z**m to zero unless 2**k divides m; 2**(9N) < 2**k
    grid = uniform_grid(2**k)
    vals = grid.sample(LacunarySeries(N).psi_values)
    assert abs(inner_product(vals, grid.constant())) <= 1e-12


def test_psi_mean_zero_on_random_rule():
    rng = np.random.default_rng(3)
    angles = AngleArray.from_floats(rng.random(200000), rng=rng)
    assert abs(np.mean(psi_function()(angles))) < 0.02


def test_holder_constant_default_pair():
    alpha, C = holder_constant(8, 512)
    assert alpha == pytest.approx(1 / 3, abs=1e-15)
    expected = 8 * 2 ** (-1 / 3) / 504 + 16 * 1024 ** (2 / 3) / 7
    assert C == pytest.approx(expected, rel=1e-14)


def test_holder_constant_small_pair():
    alpha, _ = holder_constant(2, 4)
    assert alpha == pytest.approx(0.5)


@pytest.mark.parametrize("a, b", [(1, 4), (8, 8), (8, 4), (0.5, 2)])
def test_holder_constant_domain(a, b):
    with pytest.raises(DomainViolation):
        holder_constant(a, b)


def test_empirical_holder_ratio_below_constant():
    alpha, C = holder_constant(8, 512)
    assert holder_ratio_sup(gamma_function(), 1 / 3, 20000, rng_seed=4) <= C
    assert holder_ratio_sup(psi_function(), 1 / 3, 20000, rng_seed=5) <= 2 * C


def test_belov_default_parameters_pass():
    start = time.perf_counter()
    report = belov_check(BelovParams(), m_max=20)
    assert time.perf_counter() - start < 1.0
    assert report.passed, [q.record() for q in report.failures()]
    assert {r["m"] for r in report.records()} == set(range(21))


def test_belov_boundary_constants_exactly_one():
    report = belov_check(BelovParams(), m_max=3)
    for name in ("beta/(1+beta)*sum|a_n| == 1", "(1-alpha)*sum|a_n| == 1"):
        (q,) = report.by_name(name)
        assert q.lhs.enclosure() == (Fraction(1), Fraction(1))
        assert q.passed and q.margin == 0


def test_belov_tight_inequality_is_exact():
    (q,) = belov_check(BelovParams(), m_max=1).by_name("alpha*(1+beta) <= 1")
    assert q.passed and q.exact and q.margin == 0


def test_belov_detects_violation():
    p = BelovParams(alpha=Fraction(1, 7))  # alpha*(1+beta) = 8/7 > 1
    report = belov_check(p, m_max=2)
    assert not report.passed
    names = {q.name for q in report.failures()}
    assert "alpha*(1+beta) <= 1" in names


def test_belov_growth_fails_for_slow_frequencies():
    from hyperrank.lacunary import FrequencyRule

    p = BelovParams(freq_rule=FrequencyRule(Fraction(1), Fraction(16)), lam=Fraction(16))
    report = belov_check(p, m_max=3)
    assert any(q.name.startswith("2pi") for q in report.failures())


def test_belov_rejects_non_geometric_rule():
    with pytest.raises(Unsupported):
        belov_check(BelovParams(a_rule=lambda n: Fraction(1, n * n)), m_max=2)


def test_belov_records_have_required_fields():
    rec = belov_check(m_max=1).records()[0]
    assert {"m", "lhs", "rhs", "pass", "margin"} <= set(rec)


def test_delta_half_width():
    assert BelovParams().delta().enclosure() == (Fraction(1, 510), Fraction(1, 510))
