"""
Tests for the data generators and the size/power harness.
"""

import io
import math

import numpy as np
import pytest
from scipy.stats import kurtosis

from mepoisson.Errors import InvalidInput
from mepoisson.Hypotheses import HypothesisId
from mepoisson.Simulation import (
    TABLE_COLUMNS,
    ReplicationOutcome,
    SimDesign,
    gen_covariates,
    gen_dataset,
    gen_outcome,
    hypothesis_block,
    naive_design,
    profile_designs,
    replication_rng,
    run_experiment,
    summarize,
    write_json,
    write_table,
)


def test_normal_covariate_moments():
    design = SimDesign(n=100000, p=4)
    X = gen_covariates(design, np.random.default_rng(0))
    np.testing.assert_allclose(X.var(axis=0), 0.5, rtol=0.02)
    np.testing.assert_allclose(np.corrcoef(X, rowvar=False), np.eye(4), atol=0.02)


def test_ar1_covariate_moments():
    design = SimDesign(n=100000, p=5, sigma_kind="ar1")
    X = gen_covariates(design, np.random.default_rng(1))
    cov = np.cov(X, rowvar=False)
    assert cov[0, 1] == pytest.approx(0.25, abs=0.01)
    assert cov[1, 3] == pytest.approx(0.125, abs=0.01)
    assert cov[2, 2] == pytest.approx(0.5, abs=0.01)


def test_uniform_covariates():
    design = SimDesign(n=100000, p=4, x_dist="uniform")
    X = gen_covariates(design, np.random.default_rng(2))
    np.testing.assert_allclose(X.var(axis=0), 0.5, rtol=0.02)
    np.testing.assert_allclose(kurtosis(X, axis=0, fisher=False), 1.8, atol=0.05)
    assert np.max(np.abs(X)) <= math.sqrt(6) / 2


def test_outcome_mean():
    design = SimDesign(n=100000, p=6, omega_scale=0.0)
    data = gen_dataset(design, 0)
    # β'X ~ N(0, 0.5625)
    assert np.mean(data.Y) == pytest.approx(math.exp(0.5625 / 2), rel=0.02)
    assert not np.any(data.omega)


def test_measurement_error_covariance():
    design = SimDesign(n=100000, p=4, omega_scale=0.2)
    np.testing.assert_allclose(design.omega(), 0.1 * np.eye(4))
    data = gen_dataset(design, 0)
    np.testing.assert_allclose(data.W.var(axis=0), 0.6, rtol=0.03)


def test_replications_are_reproducible():
    design = SimDesign(n=50, p=5)
    first, again, other = gen_dataset(design, 3), gen_dataset(design, 3), gen_dataset(design, 4)
    np.testing.assert_array_equal(first.W, again.W)
    np.testing.assert_array_equal(first.Y, again.Y)
    assert not np.array_equal(first.W, other.W)
    assert replication_rng(0, 1).random() == replication_rng(0, 1).random()


def test_design_validation():
    with pytest.raises(InvalidInput):
        SimDesign(p=3)
    with pytest.raises(InvalidInput):
        SimDesign(p=10, hypothesis="h10")
    with pytest.raises(InvalidInput):
        SimDesign(reps=0)
    with pytest.raises(ValueError):
        SimDesign(x_dist="cauchy")


def test_design_beta_follows_h():
    design = SimDesign(p=10, hypothesis="h01", h=0.2)
    np.testing.assert_allclose(design.beta()[:3], [0.75, -0.55, 0.0])
    design = SimDesign(p=10, hypothesis="h03", h=0.4)
    assert design.beta()[-1] == 0.4


def test_naive_design():
    design = naive_design(reps=10)
    assert design.reps == 10
    np.testing.assert_allclose(design.sigma(), 0.7 * np.eye(50))
    np.testing.assert_allclose(design.omega(), 0.3 * np.eye(50))


def test_summarize_excludes_failures():
    design = SimDesign(reps=3)
    outcomes = [
        ReplicationOutcome(2, failure="SingularHessian: boom"),
        ReplicationOutcome(1, 0.5, 6.0, 0.4, 0.01),
        ReplicationOutcome(0, 5.0, 0.1, 0.02, 0.7),
    ]
    row = summarize(design, outcomes)
    assert row.reps == 3 and row.failures == 1 and row.valid == 2
    assert row.wald_rate == 0.5 and row.score_rate == 0.5
    assert row.wald_se == pytest.approx(math.sqrt(0.125))
    assert row.wald_statistics == (5.0, 0.5)


def test_summarize_all_failed():
    row = summarize(SimDesign(reps=1), [ReplicationOutcome(0, failure="AllFitsFailed")])
    assert math.isnan(row.wald_rate)


def test_profiles_and_blocks():
    designs = profile_designs("desk")
    assert len(designs) == 40
    assert {d.hypothesis for d in designs} == set(HypothesisId)
    block = hypothesis_block(SimDesign(hypothesis="h08"))
    assert [d.h for d in block] == [0.0, 0.2, 0.4, 0.8]
    assert len(profile_designs("desk", ["h01"], reps=5)) == 4
    with pytest.raises(InvalidInput):
        profile_designs("fast")


def test_run_experiment_is_worker_independent():
    design = SimDesign(n=120, p=6, reps=3, hypothesis="h02")
    serial = run_experiment(design, grid=[0.2], workers=1)
    pooled = run_experiment(design, grid=[0.2], workers=2)
    assert serial.reps == 3
    assert serial.wald_statistics == pooled.wald_statistics
    assert serial.score_statistics == pooled.score_statistics
    assert all(s >= 0 for s in serial.wald_statistics)


def test_table_output():
    outcomes = [ReplicationOutcome(0, 1.0, 1.0, 0.5, 0.5), ReplicationOutcome(1, 9.0, 9.0, 0.01, 0.01)]
    row = summarize(SimDesign(reps=2), outcomes)
    stream = io.StringIO()
    write_table([row], stream)
    lines = stream.getvalue().splitlines()
    assert lines[0].split("\t") == TABLE_COLUMNS
    assert lines[1].split("\t")[:3] == ["H02", "0", "0.5"]
    stream = io.StringIO()
    write_json([row], stream)
    assert '"T_S_rate": 0.5' in stream.getvalue()


def test_outcome_at_zero_coefficients_has_unit_rate():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((100000, 3))
    assert np.mean(gen_outcome(X, np.zeros(3), rng)) == pytest.approx(1.0, abs=0.02)
