# -*- coding: utf-8 -*-
#
"""
ADMM solver of the partially penalized, possibly constrained, corrected Poisson programs.

Three programs are handled by the same loop; :math:`M` is the tested block, :math:`M^c` its complement:

* fully penalized (:math:`M = \\emptyset`)::

    min L(β) + Σ_j ρ_λ(β_j)                  s.t. ‖β‖₁ ≤ R₁, ‖β‖₂ ≤ R₂

* partially penalized, unconstrained (the estimator behind the Wald statistic)::

    min L(β) + Σ_{j ∈ Mᶜ} ρ_λ(β_j)           s.t. ‖β‖₁ ≤ R₁, ‖β‖₂ ≤ R₂

* partially penalized under the null (the estimator behind the score statistic)::

    min L(β) + Σ_{j ∈ Mᶜ} ρ_λ(β_j)           s.t. Cβ_M = t, ‖β‖₁ ≤ R₁, ‖β‖₂ ≤ R₂

The penalized block is split off as :math:`\\theta = \\beta_{M^c}`; the residual :math:`\\text{res}(\\beta)` stacks
:math:`C\\beta_M - t` (null constrained programs only) and :math:`\\beta_{M^c} - \\theta`, with dual :math:`v`. One
iteration:

1. Newton-Raphson on :math:`L(\\beta) + v^T\\text{res} + (\\rho/2)\\|\\text{res}\\|^2`;
2. projection on the L1 ball, then shrink into the L2 ball;
3. elementwise penalty prox of :math:`\\beta_{M^c} + v_\\theta/\\rho` with weight :math:`\\rho`;
4. dual ascent :math:`v \\leftarrow v + \\rho\\,\\text{res}`;
5. stop when the change of β or the change of θ falls below the tolerance and the primal residual is at most
   ten times the tolerance; when the budget runs out, the best iterate seen is kept.

The reported estimate takes the M block from β and the :math:`M^c` block from θ (so that untested coefficients are
exact zeros where the prox set them), is mapped back into the balls and, for null constrained programs, onto the
null set by alternating projections.

The λ path is walked by :func:`select_lambda`, from the largest to the smallest value, each fit warm-started from the
previous one; BIC picks the winner.

**Requires**: `numpy`_, `scipy`_.

.. _numpy: https://numpy.org
.. _scipy: https://scipy.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .Constraints import FeasibleSet, HypothesisSpec, constraint_residual, project_feasible
from .CorrectedLoss import Dataset, check_coefficients, gradient, hessian, loss
from .Errors import (
    AllFitsFailed,
    BoundaryWarning,
    DimensionMismatch,
    ExponentOverflow,
    InvalidInput,
    MaxIterationsWarning,
    NonConvexProx,
    NumericalFailure,
    SingularHessian,
)
from .Penalties import Penalty, PenaltyFamily, make_penalty

logger = logging.getLogger(__name__)

MAX_RIDGE = 1e-2
HALVINGS = 20
MEATS = ("model", "empirical")


@dataclass(frozen=True)
class SolverConfig:
    """
    Tuning of the ADMM loop.

    :param rho: Augmented Lagrangian weight; also the prox weight, so it must exceed the μ of the penalty.
    :param t_max: Maximal number of outer iterations.
    :param tol: Stopping tolerance on the change of β or θ. The loop also requires the primal residual to be at most
        10·tol before it stops.
    :param newton_max: Maximal number of Newton iterations per subproblem.
    :param newton_tol: Gradient norm at which a Newton solve stops.
    :param ridge: First ridge added to a Newton system whose Cholesky factorization fails; escalated by ×10 up to
        1e-2.
    :param R1: L1 radius; None means :func:`default_radii`.
    :param R2: L2 radius; None means :func:`default_radii`.
    :param support_threshold: Coefficients above this in absolute value count as nonzero.
    :param meat: Score covariance used by the inference, :code:`"model"` (closed form) or :code:`"empirical"`.
    """

    rho: float = 1.0
    t_max: int = 1000
    tol: float = 1e-4
    newton_max: int = 50
    newton_tol: float = 1e-8
    ridge: float = 1e-8
    R1: Optional[float] = None
    R2: Optional[float] = None
    support_threshold: float = 1e-6
    meat: str = "model"

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidInput(f"rho must be positive, got {self.rho}")
        if not (isinstance(self.t_max, int) and self.t_max >= 1):
            raise InvalidInput(f"t_max must be a positive integer, got {self.t_max}")
        if not (isinstance(self.newton_max, int) and self.newton_max >= 1):
            raise InvalidInput(f"newton_max must be a positive integer, got {self.newton_max}")
        if not self.tol > 0:
            raise InvalidInput(f"tol must be positive, got {self.tol}")
        if not self.newton_tol > 0:
            raise InvalidInput(f"newton_tol must be positive, got {self.newton_tol}")
        if not self.ridge >= 0:
            raise InvalidInput(f"ridge must be nonnegative, got {self.ridge}")
        for name in ("R1", "R2"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InvalidInput(f"{name} must be positive, got {value}")
        if self.meat not in MEATS:
            raise InvalidInput(f"meat must be one of {MEATS}, got {self.meat!r}")

    def validate_against(self, penalty: Penalty) -> "SolverConfig":
        """
        Check that the prox of step 3 is convex, ie, :math:`\\rho > \\mu`. Returns self.
        """
        if not self.rho > penalty.mu:
            raise NonConvexProx(
                f"rho={self.rho} does not exceed the weak convexity constant {penalty.mu:.6g} of "
                f"{penalty.family.name}(shape={penalty.shape}); increase rho or the shape"
            )
        return self


@dataclass(frozen=True, eq=False)
class FitResult:
    """
    Outcome of one ADMM fit (or of the BIC winner of a λ grid).

    :var beta: Estimated coefficients.
    :var support: Untested indices with a nonzero estimate (the set S).
    :var lam: Penalty level of the fit.
    :var converged: Whether the stopping rule was met with a small primal residual.
    :var iterations: Number of outer iterations.
    :var constraint_residual: :math:`\\|C\\hat\\beta_M - t\\|_\\infty` (0 for unconstrained programs).
    :var objective: Loss plus penalty at the estimate.
    :var primal_residual: Norm of the ADMM residual at the reported iterate.
    :var radii: Norm balls the fit was run in.
    :var bic: BIC value, set by :func:`select_lambda`.
    """

    beta: np.ndarray
    support: tuple
    lam: float
    converged: bool
    iterations: int
    constraint_residual: float
    objective: float
    primal_residual: float
    radii: FeasibleSet
    null_constrained: bool = False
    bic: Optional[float] = None

    @property
    def k(self) -> int:
        return len(self.support)

    def to_json(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "support": [j + 1 for j in self.support],
            "lambda": self.lam,
            "converged": self.converged,
            "iterations": self.iterations,
            "constraint_residual": self.constraint_residual,
            "objective": self.objective,
            "primal_residual": self.primal_residual,
            "R1": self.radii.R1,
            "R2": self.radii.R2,
            "bic": self.bic,
        }


def default_radii(beta_init) -> FeasibleSet:
    """
    :math:`R_2 = 1.5\\|\\beta_{init}\\|_2` and :math:`R_1 = \\sqrt{2}R_2`; :math:`R_2 = 10` when the initial value
    is zero.
    """
    norm = float(np.linalg.norm(np.asarray(beta_init, dtype=float)))
    r2 = 1.5 * norm if norm > 0 else 10.0
    return FeasibleSet(math.sqrt(2.0) * r2, r2)


def _radii_for(config: SolverConfig, beta_init) -> FeasibleSet:
    radii = default_radii(beta_init)
    return FeasibleSet(
        config.R1 if config.R1 is not None else radii.R1,
        config.R2 if config.R2 is not None else radii.R2,
    )


######################################################################################################
class _AugmentedResidual:
    """
    The linear map :math:`\\beta \\mapsto A\\beta` of the ADMM residual and the target it is compared to.
    Rows: the constraint block (if any) first, then one row per untested index.
    """

    def __init__(self, p: int, hypothesis: HypothesisSpec, null_constrained: bool):
        self.M = list(hypothesis.M)
        self.Mc = hypothesis.complement(p)
        self.r = hypothesis.r if null_constrained else 0
        A = np.zeros((self.r + self.Mc.size, p))
        if self.r:
            A[: self.r, self.M] = hypothesis.C
        A[self.r + np.arange(self.Mc.size), self.Mc] = 1.0
        self.A = A
        self.AtA = A.T @ A
        self.t = hypothesis.t if self.r else np.zeros(0)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def target(self, theta: np.ndarray) -> np.ndarray:
        return np.concatenate([self.t, theta])

    def __call__(self, beta: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.A @ beta - self.target(theta)


def _cholesky_solve(H: np.ndarray, g: np.ndarray, ridge: float) -> np.ndarray:
    """
    Solve :math:`Hx = g` through a Cholesky factorization, adding a ridge (escalated ×10 up to
    :data:`MAX_RIDGE`) when the factorization fails.
    """
    levels = [0.0]
    if ridge > 0:
        level = ridge
        while level <= MAX_RIDGE * (1 + 1e-12):
            levels.append(level)
            level *= 10.0
    eye = np.eye(H.shape[0])
    for level in levels:
        try:
            factor = scipy.linalg.cho_factor(H + level * eye if level else H)
        except np.linalg.LinAlgError:
            continue
        if level:
            logger.info("Newton system regularized with ridge %.1e", level)
        return scipy.linalg.cho_solve(factor, g)
    raise SingularHessian(
        f"Newton system of size {H.shape[0]} not positive definite even with ridge {levels[-1]:.1e}"
    )


def newton_subproblem(
    data: Dataset,
    hypothesis: Optional[HypothesisSpec],
    theta,
    v,
    config: SolverConfig,
    beta_start,
    rho: Optional[float] = None,
) -> np.ndarray:
    """
    Step 1 of the ADMM loop: minimize :math:`L(\\beta) + v^T\\text{res}(\\beta) + (\\rho/2)\\|\\text{res}(\\beta)\\|^2`
    by damped Newton-Raphson.

    Whether the residual carries the constraint block is read off the length of :code:`v`: :math:`r + (p - m)` for a
    null constrained program, :math:`p - m` otherwise.

    :param data: The observations.
    :param hypothesis: Tested block and constraint; None means no tested block.
    :param theta: Current split variable, length :math:`p - m`.
    :param v: Current dual variable.
    :param config: Solver settings.
    :param beta_start: Newton starting point.
    :param rho: Override of :code:`config.rho`; 0 drops the quadratic term (plain corrected likelihood).
    :return: The minimizer.
    :rtype: numpy.ndarray
    """
    hypothesis = HypothesisSpec.empty() if hypothesis is None else hypothesis.validate(data.p)
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    p, m, r = data.p, hypothesis.m, hypothesis.r
    if theta.shape != (p - m,):
        raise DimensionMismatch(f"theta must have {p - m} entries, got shape {theta.shape}")
    if v.shape == (r + p - m,):
        null_constrained = True
    elif v.shape == (p - m,):
        null_constrained = False
    else:
        raise DimensionMismatch(f"dual must have {r + p - m} (constrained) or {p - m} entries, got shape {v.shape}")
    residual = _AugmentedResidual(p, hypothesis, null_constrained)
    rho = config.rho if rho is None else rho
    return _newton(data, residual, theta, v, config, check_coefficients(data, beta_start), rho)


def _newton(data, residual, theta, v, config, beta, rho) -> np.ndarray:
    target = residual.target(theta)
    A = residual.A

    def objective(b):
        res = A @ b - target
        return loss(data, b) + v @ res + rho / 2.0 * (res @ res)

    beta = np.array(beta, dtype=float, copy=True)
    current = objective(beta)
    for iteration in range(config.newton_max):
        res = A @ beta - target
        g = gradient(data, beta) + A.T @ (v + rho * res)
        if np.linalg.norm(g) <= config.newton_tol:
            break
        step = _cholesky_solve(hessian(data, beta) + rho * residual.AtA, g, config.ridge)
        scale = 1.0
        for _ in range(HALVINGS + 1):
            candidate = beta - scale * step
            try:
                value = objective(candidate)
            except ExponentOverflow:
                value = np.inf
            if value <= current:
                break
            scale /= 2.0
        else:
            logger.debug("Newton step rejected after %d halvings at iteration %d", HALVINGS, iteration)
            break
        beta, current = candidate, value
    return beta


######################################################################################################
# noinspection PyAttributeOutsideInit
class ADMM_Core:
    """
    One run of the ADMM loop. The steps are separate methods; :meth:`fit` cycles through them until the stopping
    rule holds or the iteration budget is exhausted, then :meth:`post_process` assembles the estimate.

    :param data: The observations.
    :type data: :class:`.CorrectedLoss.Dataset`

    :param penalty: Penalty on the untested block.
    :type penalty: :class:`.Penalties.Penalty`

    :param hypothesis: Tested block and constraint.
    :type hypothesis: :class:`.Constraints.HypothesisSpec`

    :param null_constrained: Whether :math:`C\\beta_M = t` is imposed.
    :type null_constrained: bool

    :param config: Solver settings.
    :type config: :class:`SolverConfig`

    :param beta_init: Starting value.
    :type beta_init: numpy.ndarray

    :param radii: Norm balls.
    :type radii: :class:`.Constraints.FeasibleSet`
    """

    def __init__(self, data, penalty, hypothesis, null_constrained, config, beta_init, radii):
        self.data = data
        self.penalty = penalty
        self.hypothesis = hypothesis
        self.null_constrained = null_constrained and hypothesis.r > 0
        self.config = config
        self.radii = radii
        self.residual = _AugmentedResidual(data.p, hypothesis, self.null_constrained)
        self.beta = np.array(beta_init, dtype=float, copy=True)

    def pre_process(self):
        """
        :math:`\\theta^{(0)} = \\beta^{(0)}_{M^c}`, :math:`v^{(0)} = 0`.
        """
        self.theta = self.beta[self.residual.Mc].copy()
        self.v = np.zeros(self.residual.dim)

    def primal_update(self):
        self.beta_next = _newton(self.data, self.residual, self.theta, self.v, self.config, self.beta, self.config.rho)

    def projection_step(self):
        self.beta_next = self.radii.project(self.beta_next)

    def prox_step(self):
        rho = self.config.rho
        r = self.residual.r
        z = self.beta_next[self.residual.Mc] + self.v[r:] / rho
        self.theta_next = np.asarray(self.penalty.prox(z, rho), dtype=float).reshape(-1)

    def dual_update(self):
        self.v = self.v + self.config.rho * self.residual(self.beta_next, self.theta_next)

    def stopping_rule(self) -> bool:
        """
        Either the β change or the θ change is below the tolerance (the θ change only counts when there is a
        penalized block), and the primal residual is small.
        """
        tol = self.config.tol
        small_step = self.beta_change <= tol or (self.theta.size > 0 and self.theta_change <= tol)
        return small_step and self.primal_residual <= 10 * tol

    def iterate_objective(self) -> float:
        """
        Loss at β plus the penalty at θ.
        """
        try:
            value = loss(self.data, self.beta)
        except ExponentOverflow:
            return math.inf
        return value + (float(np.sum(self.penalty.rho(self.theta))) if self.theta.size else 0.0)

    def keep_best(self):
        """
        Remember the best iterate so far: residuals below 10·tol tie, then the smaller objective wins.
        """
        key = (max(self.primal_residual, 10 * self.config.tol), self.objective)
        if self.best is None or key < self.best[0]:
            self.best = (key, self.beta, self.theta, self.primal_residual, self.iterations)

    def fit(self) -> FitResult:
        """
        Run the loop and return the estimate. When the iteration budget runs out the best iterate is reported.
        """
        self.pre_process()
        self.converged = False
        self.iterations = 0
        self.best = None
        for iteration in range(1, self.config.t_max + 1):
            self.iterations = iteration
            self.primal_update()
            self.projection_step()
            self.prox_step()
            self.dual_update()
            self.beta_change = float(np.linalg.norm(self.beta_next - self.beta))
            self.theta_change = float(np.linalg.norm(self.theta_next - self.theta))
            self.beta, self.theta = self.beta_next, self.theta_next
            self.primal_residual = float(np.linalg.norm(self.residual(self.beta, self.theta)))
            self.objective = self.iterate_objective()
            logger.debug(
                "lambda=%.4g iteration %d: |dbeta|=%.3e |dtheta|=%.3e primal=%.3e",
                self.penalty.lam,
                self.iterations,
                self.beta_change,
                self.theta_change,
                self.primal_residual,
            )
            self.keep_best()
            if self.stopping_rule():
                self.converged = True
                break
        else:
            _, self.beta, self.theta, self.primal_residual, best_iteration = self.best
            warnings.warn(
                f"ADMM reached t_max={self.config.t_max} at lambda={self.penalty.lam:.4g}; reporting iteration "
                f"{best_iteration} (primal residual {self.primal_residual:.3e})",
                MaxIterationsWarning,
                stacklevel=3,
            )
        return self.post_process()

    def post_process(self) -> FitResult:
        """
        Assemble :math:`[\\beta_M; \\theta]`, map it back into the feasible region, and collect diagnostics.
        """
        estimate = self.beta.copy()
        estimate[self.residual.Mc] = self.theta
        if self.null_constrained:
            estimate = project_feasible(self.hypothesis, estimate, self.radii)
        else:
            estimate = self.radii.project(estimate)
        if self.radii.on_boundary(estimate):
            warnings.warn(
                f"estimate at lambda={self.penalty.lam:.4g} lies on the boundary of the norm balls "
                f"(R1={self.radii.R1:.4g}, R2={self.radii.R2:.4g}); consider larger radii",
                BoundaryWarning,
                stacklevel=3,
            )
        Mc = self.residual.Mc
        threshold = self.config.support_threshold
        support = tuple(int(j) for j in Mc[np.abs(estimate[Mc]) > threshold])
        penalty_value = float(np.sum(self.penalty.rho(estimate[Mc]))) if Mc.size else 0.0
        return FitResult(
            beta=estimate,
            support=support,
            lam=self.penalty.lam,
            converged=self.converged,
            iterations=self.iterations,
            constraint_residual=constraint_residual(self.hypothesis, estimate) if self.null_constrained else 0.0,
            objective=loss(self.data, estimate) + penalty_value,
            primal_residual=self.primal_residual,
            radii=self.radii,
            null_constrained=self.null_constrained,
        )


def admm_fit(
    data: Dataset,
    penalty: Penalty,
    hypothesis: Optional[HypothesisSpec] = None,
    null_constrained: bool = False,
    config: Optional[SolverConfig] = None,
    beta_init=None,
    radii: Optional[FeasibleSet] = None,
) -> FitResult:
    """
    Fit one of the three programs at a fixed penalty level.

    :param data: The observations.
    :type data: :class:`.CorrectedLoss.Dataset`

    :param penalty: Penalty on the untested coefficients.
    :type penalty: :class:`.Penalties.Penalty`

    :param hypothesis: Tested block (unpenalized) and its constraint; None penalizes everything.
    :type hypothesis: :class:`.Constraints.HypothesisSpec`

    :param null_constrained: Impose :math:`C\\beta_M = t`.
    :type null_constrained: bool

    :param config: Solver settings, defaults if None.
    :type config: :class:`SolverConfig`

    :param beta_init: Starting value, zero if None.
    :type beta_init: numpy.ndarray

    :param radii: Norm balls; from the config or :func:`default_radii` if None.
    :type radii: :class:`.Constraints.FeasibleSet`

    :rtype: :class:`FitResult`
    """
    config = (config or SolverConfig()).validate_against(penalty)
    hypothesis = HypothesisSpec.empty() if hypothesis is None else hypothesis.validate(data.p)
    beta_init = np.zeros(data.p) if beta_init is None else check_coefficients(data, beta_init)
    if radii is None:
        radii = _radii_for(config, beta_init)
    return ADMM_Core(data, penalty, hypothesis, null_constrained, config, beta_init, radii).fit()


def bic_constant(n: int, p: int) -> float:
    """
    :math:`c_n = \\max\\{\\log n, \\log(\\log n)\\log p\\}`; the second term is dropped when it is undefined
    (:math:`n \\le 1`).
    """
    log_n = math.log(n)
    if n > 1 and p > 1:
        return max(log_n, math.log(log_n) * math.log(p))
    return log_n


def bic(data: Dataset, beta, support_threshold: float = 1e-6) -> float:
    """
    :math:`n L(\\hat\\beta) + c_n \\|\\hat\\beta\\|_0`, entries above :code:`support_threshold` in absolute value
    counting as nonzero.
    """
    beta = check_coefficients(data, beta)
    nonzero = int(np.sum(np.abs(beta) > support_threshold))
    return data.n * loss(data, beta) + bic_constant(data.n, data.p) * nonzero


def default_lambda_grid() -> np.ndarray:
    """
    41 values, log-equally spaced from :math:`e^{-2.5}` to :math:`e^{0.5}`.
    """
    return np.exp(np.linspace(-2.5, 0.5, 41))


def select_lambda(
    data: Dataset,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
    hypothesis: Optional[HypothesisSpec] = None,
    null_constrained: bool = False,
    config: Optional[SolverConfig] = None,
    shape: Optional[float] = None,
    beta_init=None,
) -> FitResult:
    """
    Fit every λ of the grid and return the fit with the smallest BIC.

    The grid is walked from the largest to the smallest value, each fit starting from the previous estimate; the
    radii are fixed once from the initial value. Ties go to the larger λ. Grid points whose fit fails numerically are
    skipped.

    :param data: The observations.
    :param family: Penalty family.
    :param grid: Candidate λ values; :func:`default_lambda_grid` if None.
    :param hypothesis: Tested block and constraint.
    :param null_constrained: Impose the null.
    :param config: Solver settings.
    :param shape: Penalty shape, family default if None.
    :param beta_init: Starting value of the first fit, zero if None.
    :rtype: :class:`FitResult`
    """
    grid = default_lambda_grid() if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidInput("the lambda grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise InvalidInput("lambda grid values must be positive and finite")
    config = config or SolverConfig()
    penalty = make_penalty(family, float(grid.max()), shape)
    config.validate_against(penalty)
    hypothesis = HypothesisSpec.empty() if hypothesis is None else hypothesis.validate(data.p)
    beta_start = np.zeros(data.p) if beta_init is None else check_coefficients(data, beta_init)
    radii = _radii_for(config, beta_start)

    best, best_bic = None, np.inf
    for lam in np.sort(grid)[::-1]:
        try:
            fit = admm_fit(data, penalty.with_lambda(lam), hypothesis, null_constrained, config, beta_start, radii)
        except NumericalFailure as e:
            logger.info("fit at lambda=%.4g failed: %s", lam, e)
            continue
        beta_start = fit.beta
        value = bic(data, fit.beta, config.support_threshold)
        logger.debug("lambda=%.4g: BIC %.6g, %d nonzero untested", lam, value, fit.k)
        if value < best_bic:
            best, best_bic = replace(fit, bic=value), value
    if best is None:
        raise AllFitsFailed(f"all {grid.size} lambda values failed")
    return best


def penalized_initial(
    data: Dataset,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
    shape: Optional[float] = None,
) -> np.ndarray:
    """
    Starting value from the fully penalized program with BIC-selected λ.
    """
    return select_lambda(data, family, grid, None, False, config, shape).beta
