"""
Tests for the ADMM solver, the Newton subproblem and the BIC walk over the λ grid.
"""

import warnings

import numpy as np
import pytest
import statsmodels.api as sm

import mepoisson.ADMM
from mepoisson.ADMM import (
    ADMM_Core,
    FitResult,
    SolverConfig,
    _cholesky_solve,
    admm_fit,
    bic,
    bic_constant,
    default_lambda_grid,
    default_radii,
    newton_subproblem,
    select_lambda,
)
from mepoisson.Constraints import HypothesisSpec
from mepoisson.CorrectedLoss import gradient, loss
from mepoisson.Errors import (
    AllFitsFailed,
    DimensionMismatch,
    InvalidInput,
    MaxIterationsWarning,
    NonConvexProx,
    SingularHessian,
)
from mepoisson.Penalties import SCAD_Penalty

from conftest import poisson_data


def _unpenalized(p):
    return HypothesisSpec(np.zeros((0, p)), np.zeros(0), tuple(range(p)))


def _glm(data):
    return sm.GLM(np.asarray(data.Y), np.asarray(data.W), family=sm.families.Poisson()).fit(tol=1e-12).params


def test_newton_without_quadratic_term_is_the_poisson_mle():
    data = poisson_data(1, 200, 5)
    p = data.p
    beta = newton_subproblem(data, None, np.zeros(p), np.zeros(p), SolverConfig(), np.zeros(p), rho=0.0)
    np.testing.assert_allclose(beta, _glm(data), atol=1e-6)


def test_newton_stationarity_with_error(rng):
    data = poisson_data(2, 150, 4, omega_scale=0.02)
    config = SolverConfig(rho=1.0)
    theta = 0.2 * rng.standard_normal(4)
    v = 0.1 * rng.standard_normal(4)
    beta = newton_subproblem(data, None, theta, v, config, np.zeros(4))
    g = gradient(data, beta) + v + config.rho * (beta - theta)
    assert np.linalg.norm(g) < 1e-6


def test_newton_large_rho_pins_the_penalized_block():
    data = poisson_data(3, 100, 4)
    spec = HypothesisSpec(np.zeros((0, 1)), np.zeros(0), (0,))
    theta = np.array([0.3, -0.2, 0.1])
    beta = newton_subproblem(data, spec, theta, np.zeros(3), SolverConfig(), np.zeros(4), rho=1e6)
    np.testing.assert_allclose(beta[1:], theta, atol=1e-4)


def test_newton_rejects_wrong_dual_length():
    data = poisson_data(3, 50, 3)
    with pytest.raises(DimensionMismatch):
        newton_subproblem(data, None, np.zeros(3), np.zeros(5), SolverConfig(), np.zeros(3))


def test_cholesky_ridge():
    x = _cholesky_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 1.0]), 1e-8)
    np.testing.assert_allclose(x, [0.5, 0.5], rtol=1e-6)
    with pytest.raises(SingularHessian):
        _cholesky_solve(-np.eye(2), np.ones(2), 1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_unpenalized_fit_matches_glm(seed):
    data = poisson_data(seed, 500, 5)
    fit = select_lambda(data, "scad", [0.1], _unpenalized(5), config=SolverConfig(tol=1e-9))
    np.testing.assert_allclose(fit.beta, _glm(data), rtol=0, atol=1e-6)
    assert fit.support == ()


@pytest.mark.parametrize("seed", range(10))
def test_small_lambda_matches_glm(seed):
    data = poisson_data(100 + seed, 500, 5)
    fit = select_lambda(data, "scad", [1e-6], config=SolverConfig(tol=1e-9))
    assert np.max(np.abs(fit.beta - _glm(data))) <= 1e-4


def test_zero_signal_gives_empty_support():
    data = poisson_data(5, 300, 10, beta=np.zeros(10))
    fit = admm_fit(data, SCAD_Penalty(0.3))
    assert fit.converged
    assert fit.support == ()
    assert np.max(np.abs(fit.beta)) < 0.05


def test_recovers_strong_signal():
    data = poisson_data(6, 400, 10)
    fit = select_lambda(data, "scad")
    assert set(fit.support) >= {0, 1}
    assert fit.beta[0] == pytest.approx(0.75, abs=0.25)
    assert fit.beta[1] == pytest.approx(-0.75, abs=0.25)


def test_null_constrained_fit_satisfies_the_constraint():
    data = poisson_data(7, 300, 8)
    spec = HypothesisSpec([[1.0]], [-0.75], (1,))
    fit = admm_fit(data, SCAD_Penalty(0.2), spec, null_constrained=True)
    assert fit.null_constrained
    assert fit.beta[1] == pytest.approx(-0.75, abs=1e-6)
    assert fit.constraint_residual <= 1e-6
    assert 1 not in fit.support


def test_unconstrained_partial_fit_leaves_tested_block_free():
    data = poisson_data(7, 300, 8)
    spec = HypothesisSpec([[1.0]], [0.0], (1,))
    fit = admm_fit(data, SCAD_Penalty(0.2), spec)
    assert not fit.null_constrained
    assert fit.constraint_residual == 0.0
    assert fit.beta[1] < -0.4


def test_prox_weight_must_exceed_mu():
    data = poisson_data(8, 50, 3)
    with pytest.raises(NonConvexProx):
        admm_fit(data, SCAD_Penalty(0.3), config=SolverConfig(rho=0.2))


def test_solver_config_validation():
    with pytest.raises(InvalidInput):
        SolverConfig(rho=0.0)
    with pytest.raises(InvalidInput):
        SolverConfig(t_max=0)
    with pytest.raises(InvalidInput):
        SolverConfig(R2=-1.0)
    with pytest.raises(InvalidInput):
        SolverConfig(meat="robust")


def test_default_radii():
    radii = default_radii(np.zeros(3))
    assert radii.R2 == 10.0
    assert radii.R1 == pytest.approx(10 * np.sqrt(2))
    radii = default_radii([3.0, 4.0])
    assert radii.R2 == pytest.approx(7.5)


def test_bic():
    assert bic_constant(300, 50) == pytest.approx(6.81133884, abs=1e-7)
    assert bic_constant(300, 2) == pytest.approx(np.log(300))
    data = poisson_data(9, 40, 3)
    assert bic(data, np.zeros(3)) == pytest.approx(40.0)


def test_default_lambda_grid():
    grid = default_lambda_grid()
    assert grid.size == 41
    assert grid[0] == pytest.approx(np.exp(-2.5))
    assert grid[-1] == pytest.approx(np.exp(0.5))
    np.testing.assert_allclose(np.diff(np.log(grid)), 0.075)


def test_select_lambda_ties_go_to_the_larger_lambda():
    data = poisson_data(5, 300, 10, beta=np.zeros(10))
    fit = select_lambda(data, "scad", [0.3, 0.5])
    assert fit.lam == 0.5
    assert fit.bic == pytest.approx(300.0)


def test_select_lambda_single_point_and_determinism():
    data = poisson_data(10, 200, 6)
    first = select_lambda(data, "mcp", [0.2])
    assert first.lam == 0.2
    again = select_lambda(data, "mcp", [0.2])
    np.testing.assert_array_equal(first.beta, again.beta)


def test_select_lambda_rejects_bad_grids():
    data = poisson_data(10, 50, 3)
    with pytest.raises(InvalidInput):
        select_lambda(data, "scad", [])
    with pytest.raises(InvalidInput):
        select_lambda(data, "scad", [0.1, -0.2])


def test_all_fits_failed(monkeypatch):
    def failing(*args, **kwargs):
        raise SingularHessian("boom")

    monkeypatch.setattr(mepoisson.ADMM, "admm_fit", failing)
    data = poisson_data(11, 50, 3)
    with pytest.raises(AllFitsFailed):
        select_lambda(data, "scad", [0.1, 0.2])


def test_failed_grid_points_are_skipped(monkeypatch):
    original = mepoisson.ADMM.admm_fit

    def flaky(data, penalty, *args, **kwargs):
        if penalty.lam > 0.3:
            raise SingularHessian("boom")
        return original(data, penalty, *args, **kwargs)

    monkeypatch.setattr(mepoisson.ADMM, "admm_fit", flaky)
    data = poisson_data(11, 100, 3)
    fit = select_lambda(data, "scad", [0.2, 0.5])
    assert fit.lam == 0.2


def test_fit_result_json_is_one_based():
    data = poisson_data(6, 200, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = admm_fit(data, SCAD_Penalty(0.1))
    assert isinstance(fit, FitResult)
    out = fit.to_json()
    assert out["support"] == [j + 1 for j in fit.support]
    assert len(out["beta"]) == 5
    assert out["R2"] == 10.0


def test_bic_counts_nonzero_coefficients():
    data = poisson_data(9, 60, 8)
    beta = np.zeros(8)
    beta[:3] = 1e-3
    beta[5] = 1e-9
    expected = 60 * loss(data, beta) + 3 * bic_constant(60, 8)
    assert bic(data, beta) == pytest.approx(expected)


class _RecordingCore(ADMM_Core):
    def stopping_rule(self):
        self.history.append((self.primal_residual, self.objective, self.beta.copy()))
        return False


def test_budget_exhaustion_reports_the_best_iterate():
    data = poisson_data(12, 200, 6, omega_scale=0.02)
    config = SolverConfig(t_max=8, tol=1e-12)
    penalty = SCAD_Penalty(0.2)
    core = _RecordingCore(data, penalty, HypothesisSpec.empty(), False, config, np.zeros(6), default_radii(np.zeros(6)))
    core.history = []
    with pytest.warns(MaxIterationsWarning):
        fit = core.fit()
    assert not fit.converged
    assert fit.iterations == 8
    keys = [(max(res, 10 * config.tol), obj) for res, obj, _ in core.history]
    best = min(range(len(keys)), key=keys.__getitem__)
    assert fit.primal_residual == core.history[best][0]
    np.testing.assert_array_equal(core.beta, core.history[best][2])
