"""
Tests for the Wald and score statistics, their sandwich covariance and the Benjamini-Hochberg screen.
"""

import numpy as np
import pytest

from mepoisson.ADMM import FitResult, SolverConfig, default_radii, select_lambda
from mepoisson.Constraints import HypothesisSpec
from mepoisson.Errors import IllConditioned, InvalidInput
from mepoisson.Inference import (
    TestKind,
    bh_adjusted,
    bh_fdr,
    chisq_sf,
    coefficient_screen,
    one_sided_p_value,
    psi,
    run_test,
    score_statistic,
    score_test,
    wald_statistic,
    wald_test,
)

from conftest import poisson_data, random_spd

GRID = [0.1, 0.2]


def test_psi_scalar():
    rng = np.random.default_rng(0)
    Q = random_spd(rng, 3, 1.0)
    sigma = random_spd(rng, 3, 1.0)
    spec = HypothesisSpec([[2.0]], [0.0], (0,))
    expected = 4.0 * sigma[0, 0] / Q[0, 0] ** 2
    np.testing.assert_allclose(psi(sigma, Q, spec), [[expected]], rtol=1e-10)


def test_psi_identity_constraint():
    rng = np.random.default_rng(1)
    Q = random_spd(rng, 4, 1.0)
    sigma = random_spd(rng, 4, 1.0)
    spec = HypothesisSpec(np.eye(2), np.zeros(2), (1, 2))
    inv = np.linalg.inv(Q[1:3, 1:3])
    np.testing.assert_allclose(psi(sigma, Q, spec), inv @ sigma[1:3, 1:3] @ inv, rtol=1e-9)


def test_psi_dense_oracle():
    rng = np.random.default_rng(2)
    Q = random_spd(rng, 6, 1.0)
    sigma = random_spd(rng, 6, 1.0)
    spec = HypothesisSpec([[1.0, -2.0]], [0.0], (1, 3))
    idx = [1, 3, 4]
    inv = np.linalg.inv(Q[np.ix_(idx, idx)])
    G = spec.C @ inv[:2, :]
    expected = G @ sigma[np.ix_(idx, idx)] @ G.T
    np.testing.assert_allclose(psi(sigma, Q, spec, support=(4,)), expected, rtol=1e-9)
    # tested indices in the support are not counted twice
    np.testing.assert_allclose(psi(sigma, Q, spec, support=(1, 4)), expected, rtol=1e-9)


def test_psi_failures():
    spec = HypothesisSpec([[1.0]], [0.0], (0,))
    with pytest.raises(IllConditioned):
        psi(np.eye(2), np.zeros((2, 2)), spec)
    with pytest.raises(InvalidInput):
        psi(np.eye(2), np.eye(2), HypothesisSpec.empty())


def test_chisq_sf():
    assert chisq_sf(3.841459, 1) == pytest.approx(0.05, abs=1e-6)
    assert chisq_sf(9.487729, 4) == pytest.approx(0.05, abs=1e-6)
    assert chisq_sf(0.0, 3) == 1.0
    with pytest.raises(InvalidInput):
        chisq_sf(-1.0, 1)


def test_one_sided_p_value():
    assert one_sided_p_value(1.6448536, "greater") == pytest.approx(0.05, abs=1e-6)
    assert one_sided_p_value(1.6448536, "less") == pytest.approx(0.95, abs=1e-6)
    with pytest.raises(InvalidInput):
        one_sided_p_value(1.0, "two-sided")


def test_wald_is_zero_at_the_estimate():
    data = poisson_data(1, 300, 8)
    spec = HypothesisSpec([[1.0]], [0.0], (0,))
    fit = select_lambda(data, "scad", GRID, spec)
    at_estimate = HypothesisSpec([[1.0]], [fit.beta[0]], (0,))
    result = wald_statistic(data, at_estimate, fit)
    assert result.statistic == pytest.approx(0.0, abs=1e-12)
    assert result.p_value == pytest.approx(1.0)


def test_statistics_are_scale_invariant():
    data = poisson_data(2, 300, 8, omega_scale=0.05)
    spec = HypothesisSpec([[1.0, 1.0]], [0.1], (0, 4))
    scaled = HypothesisSpec([[3.0, 3.0]], [0.3], (0, 4))
    fit = select_lambda(data, "scad", GRID, spec)
    assert wald_statistic(data, spec, fit).statistic == pytest.approx(
        wald_statistic(data, scaled, fit).statistic, rel=1e-8
    )
    null_fit = select_lambda(data, "scad", GRID, spec, null_constrained=True)
    assert score_statistic(data, spec, null_fit).statistic == pytest.approx(
        score_statistic(data, scaled, null_fit).statistic, rel=1e-8
    )


def test_score_vanishes_at_the_unpenalized_optimum():
    data = poisson_data(3, 400, 4)
    everything = HypothesisSpec(np.zeros((0, 4)), np.zeros(0), (0, 1, 2, 3))
    config = SolverConfig(tol=1e-10)
    mle = select_lambda(data, "scad", [0.1], everything, config=config).beta
    spec = HypothesisSpec([[1.0, 0.0, 0.0, 0.0]], [mle[0]], (0, 1, 2, 3))
    result = score_test(data, spec, grid=[0.1], config=config)
    assert result.statistic < 1e-6
    assert result.support == (0, 1, 2, 3)


def test_false_null_is_rejected():
    data = poisson_data(4, 300, 10, omega_scale=0.05)
    spec = HypothesisSpec([[1.0]], [0.0], (1,))
    for kind in ("wald", "score"):
        result = run_test(kind, data, spec, grid=GRID)
        assert result.kind is TestKind.from_name(kind)
        assert result.df == 1
        assert result.rejects(0.01)
        assert 1 in result.support
        less = run_test(kind, data, spec, grid=GRID, alternative="less")
        greater = run_test(kind, data, spec, grid=GRID, alternative="greater")
        assert less.p_value < 0.01
        assert less.p_value + greater.p_value == pytest.approx(1.0)


def test_naive_flag_and_json():
    data = poisson_data(5, 200, 6, omega_scale=0.05)
    spec = HypothesisSpec([[1.0]], [0.0], (2,))
    result = wald_test(data, spec, grid=GRID, naive=True)
    assert result.naive
    out = result.to_json()
    assert out["kind"] == "wald"
    assert out["support"][0] == 3
    assert 0.0 <= out["p_value"] <= 1.0


def test_alternative_validation():
    data = poisson_data(6, 100, 4)
    with pytest.raises(InvalidInput):
        wald_test(data, HypothesisSpec([[1.0]], [0.0], (0,)), grid=GRID, alternative="both")
    with pytest.raises(InvalidInput):
        wald_test(data, HypothesisSpec(np.eye(2), np.zeros(2), (0, 1)), grid=GRID, alternative="greater")
    with pytest.raises(InvalidInput):
        TestKind.from_name("lrt")


def test_bh_examples():
    p_values = [0.01, 0.04, 0.03, 0.2]
    np.testing.assert_array_equal(bh_fdr(p_values, 0.05), [True, False, False, False])
    np.testing.assert_allclose(bh_adjusted(p_values), [0.04, 0.16 / 3, 0.16 / 3, 0.2])
    p_values = [0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205]
    assert bh_fdr(p_values, 0.05).sum() == 2
    assert bh_fdr([], 0.05).size == 0


def test_bh_is_monotone_in_q():
    rng = np.random.default_rng(9)
    p_values = rng.uniform(0, 0.2, 40)
    previous = 0
    for q in (0.01, 0.05, 0.1, 0.2):
        count = bh_fdr(p_values, q).sum()
        assert count >= previous
        previous = count
    with pytest.raises(InvalidInput):
        bh_fdr([0.5, 1.5])
    with pytest.raises(InvalidInput):
        bh_fdr([0.5], 1.0)


def test_coefficient_screen():
    data = poisson_data(7, 300, 4)
    screen = coefficient_screen(data, kind="wald", grid=GRID)
    assert screen.indices == (0, 1, 2, 3)
    assert screen.rejected[0] and screen.rejected[1]
    rows = screen.rows()
    assert [row["index"] for row in rows] == [1, 2, 3, 4]
    assert all(row["q_value"] >= row["p_value"] for row in rows)


@pytest.mark.parametrize(
    "p_values, expected",
    [((0.001, 0.02, 0.9), [True, True, False]), ((0.04, 0.04), [True, True])],
)
def test_bh_step_up(p_values, expected):
    np.testing.assert_array_equal(bh_fdr(p_values, 0.05), expected)


def test_statistics_need_more_observations_than_restricted_coefficients():
    data = poisson_data(8, 4, 6)
    fit = FitResult(np.zeros(6), (1, 2, 3), 0.1, True, 1, 0.0, 1.0, 0.0, default_radii(np.zeros(6)))
    spec = HypothesisSpec([[1.0]], [0.0], (0,))
    with pytest.raises(InvalidInput, match="m \\+ \\|S\\| = 4"):
        wald_statistic(data, spec, fit)
    with pytest.raises(InvalidInput):
        score_statistic(data, spec, fit)
