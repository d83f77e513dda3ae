# -*- coding: utf-8 -*-
#
"""
Wald and score tests of linear hypotheses :math:`C\\beta_M = t`.

Both statistics are studentized by the sandwich

.. math:: \\Psi = C [I_m, 0] \\hat Q^{-1}_{M\\cup S} \\hat\\Sigma_{M\\cup S} \\hat Q^{-1}_{M\\cup S} [I_m, 0]^T C^T

where :math:`\\hat Q` is the Hessian of the corrected loss, :math:`\\hat\\Sigma` the covariance of the corrected score,
and :math:`S` the support selected among the untested coefficients. Restricting to :math:`M \\cup S` (the tested
block first, then S in increasing order) is what keeps the inverse well defined in high dimension.

* Wald: fit the partially penalized program without the null, :math:`T_W = n (C\\hat\\beta_M - t)^T \\Psi^{-1}
  (C\\hat\\beta_M - t)`.
* Score: fit under the null, :math:`u = C[\\hat Q^{-1}_{M\\cup S}]_{M,\\cdot} \\nabla L(\\hat\\beta)_{M\\cup S}`,
  :math:`T_S = n u^T \\Psi^{-1} u`.

Both are compared with :math:`\\chi^2(r)`; for :math:`r = 1` a one-sided version uses the signed root against
:math:`N(0, 1)`. The naive versions force :math:`\\Omega = 0`, ie, ignore the measurement error.

The module also has the Benjamini-Hochberg machinery used when many coefficients are screened at once.

**Requires**: `numpy`_, `scipy`_, `statsmodels`_.

.. _numpy: https://numpy.org
.. _scipy: https://scipy.org
.. _statsmodels: https://www.statsmodels.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import gammaincc, ndtr
from statsmodels.stats.multitest import multipletests

from .ADMM import FitResult, SolverConfig, select_lambda
from .Constraints import HypothesisSpec
from .CorrectedLoss import Dataset, gradient, hessian, residual_covariance, sigma_hat
from .Errors import ConditioningWarning, IllConditioned, InvalidInput
from .Penalties import PenaltyFamily
from .Workers import parallel_map

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
ALTERNATIVES = ("two-sided", "greater", "less")


class TestKind(Enum):
    WALD = "wald"
    SCORE = "score"

    __test__ = False

    @classmethod
    def from_name(cls, name: Union[str, "TestKind"]) -> "TestKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidInput(f"unknown test kind {name!r}; use 'wald' or 'score'") from None


@dataclass(frozen=True)
class TestResult:
    """
    :var kind: Wald or score.
    :var statistic: Value of the statistic, nonnegative.
    :var df: Degrees of freedom r.
    :var p_value: p-value (two-sided chi-square, or one-sided normal for r = 1).
    :var support: The index set :math:`M \\cup S` the sandwich was restricted to (0-based).
    :var lam: λ selected for the underlying fit.
    :var alternative: :code:`"two-sided"`, :code:`"greater"` or :code:`"less"`.
    :var naive: Whether :math:`\\Omega` was ignored.
    :var converged: Convergence flag of the underlying fit.
    :var ridged: Whether a ridge had to be added to the restricted Hessian.
    """

    __test__ = False

    kind: TestKind
    statistic: float
    df: int
    p_value: float
    support: Tuple[int, ...]
    lam: float
    alternative: str = "two-sided"
    naive: bool = False
    converged: bool = True
    ridged: bool = False

    def rejects(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "lambda": self.lam,
            "support": [j + 1 for j in self.support],
            "alternative": self.alternative,
            "naive": self.naive,
            "converged": self.converged,
        }


def chisq_sf(x: float, df: int) -> float:
    """
    Chi-square survival function :math:`1 - F(x; df)`, through the regularized upper incomplete gamma function.
    """
    if x < 0:
        raise InvalidInput(f"chi-square argument must be nonnegative, got {x}")
    if df < 1:
        raise InvalidInput(f"degrees of freedom must be positive, got {df}")
    return float(gammaincc(df / 2.0, x / 2.0))


def one_sided_p_value(signed_root: float, alternative: str) -> float:
    """
    Normal tail probability of a signed root statistic: upper tail for :code:`"greater"`, lower for :code:`"less"`.
    """
    if alternative == "greater":
        return float(ndtr(-signed_root))
    elif alternative == "less":
        return float(ndtr(signed_root))
    raise InvalidInput(f"one-sided alternative must be 'greater' or 'less', got {alternative!r}")


def _restricted_factor(Q: np.ndarray, idx: List[int]) -> Tuple[tuple, bool]:
    Qr = Q[np.ix_(idx, idx)]
    Qr = (Qr + Qr.T) / 2.0
    ridged = False
    try:
        factor = scipy.linalg.cho_factor(Qr)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * np.trace(Qr) / len(idx)
        warnings.warn(
            f"restricted Hessian of size {len(idx)} not positive definite; ridge {ridge:.2e} added",
            ConditioningWarning,
            stacklevel=3,
        )
        ridged = True
        Qr = Qr + ridge * np.eye(len(idx))
        try:
            factor = scipy.linalg.cho_factor(Qr)
        except np.linalg.LinAlgError:
            raise IllConditioned(f"restricted Hessian of size {len(idx)} is not positive definite") from None
    condition = np.linalg.cond(Qr)
    if not condition < MAX_CONDITION:
        raise IllConditioned(f"restricted Hessian condition number {condition:.3g} exceeds {MAX_CONDITION:g}")
    return factor, ridged


def _sandwich(sigma: np.ndarray, Q: np.ndarray, spec: HypothesisSpec, support: Sequence[int]):
    """
    Returns :math:`\\Psi`, its Cholesky factor, :math:`G = C[\\hat Q^{-1}_{M\\cup S}]_{M,\\cdot}`, the index set and
    the ridge flag.
    """
    if spec.r == 0:
        raise InvalidInput("a test needs at least one constraint")
    idx = list(spec.M) + sorted(int(j) for j in support if j not in spec.M)
    factor, ridged = _restricted_factor(Q, idx)
    # first m columns of the (symmetric) restricted inverse
    selector = np.eye(len(idx))[:, : spec.m]
    G = spec.C @ scipy.linalg.cho_solve(factor, selector).T
    sigma_r = sigma[np.ix_(idx, idx)]
    Psi = G @ sigma_r @ G.T
    Psi = (Psi + Psi.T) / 2.0
    try:
        psi_factor = scipy.linalg.cho_factor(Psi)
    except np.linalg.LinAlgError:
        raise IllConditioned(f"sandwich matrix of size {spec.r} is not positive definite") from None
    return Psi, psi_factor, G, idx, ridged


def _check_sample_size(n: int, spec: HypothesisSpec, support: Sequence[int]):
    size = spec.m + sum(1 for j in support if j not in spec.M)
    if n <= size:
        raise InvalidInput(f"n={n} must exceed m + |S| = {size} (m={spec.m}, |S|={size - spec.m})")


def psi(sigma, Q, spec: HypothesisSpec, support: Sequence[int] = ()) -> np.ndarray:
    """
    The r x r sandwich :math:`\\Psi` restricted to :math:`M \\cup S`.

    :param sigma: Score covariance, p x p.
    :type sigma: numpy.ndarray

    :param Q: Hessian of the loss, p x p.
    :type Q: numpy.ndarray

    :param spec: The hypothesis.
    :type spec: :class:`.Constraints.HypothesisSpec`

    :param support: The selected untested indices S.
    :type support: sequence of int

    :rtype: numpy.ndarray
    """
    return _sandwich(np.asarray(sigma, dtype=float), np.asarray(Q, dtype=float), spec, support)[0]


def _meat(data: Dataset, beta: np.ndarray, config: SolverConfig) -> np.ndarray:
    if config.meat == "empirical":
        return residual_covariance(data, beta)
    return sigma_hat(data, beta)


def _quadratic_form(factor, x: np.ndarray, n: int) -> float:
    return max(float(n * x @ scipy.linalg.cho_solve(factor, x)), 0.0)


def _finish(kind, statistic, signed, spec, fit, idx, alternative, naive, ridged) -> TestResult:
    if alternative == "two-sided":
        p_value = chisq_sf(statistic, spec.r)
    else:
        if spec.r != 1:
            raise InvalidInput(f"one-sided tests need a single constraint, got r={spec.r}")
        p_value = one_sided_p_value(signed, alternative)
    return TestResult(
        kind=kind,
        statistic=statistic,
        df=spec.r,
        p_value=p_value,
        support=tuple(idx),
        lam=fit.lam,
        alternative=alternative,
        naive=naive,
        converged=fit.converged,
        ridged=ridged,
    )


def _check_alternative(alternative: str):
    if alternative not in ALTERNATIVES:
        raise InvalidInput(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def wald_test(
    data: Dataset,
    spec: HypothesisSpec,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
    shape: Optional[float] = None,
    naive: bool = False,
    alternative: str = "two-sided",
    beta_init=None,
) -> TestResult:
    """
    Wald test of :math:`C\\beta_M = t` from the partially penalized fit without the null.

    :param data: The observations.
    :param spec: The hypothesis.
    :param family: Penalty family on the untested coefficients.
    :param grid: λ grid for BIC selection.
    :param config: Solver settings; :code:`config.meat` picks the score covariance.
    :param shape: Penalty shape.
    :param naive: Ignore the measurement error (:math:`\\Omega = 0`).
    :param alternative: :code:`"two-sided"` (chi-square), or :code:`"greater"`/:code:`"less"` for r = 1.
    :param beta_init: Starting value of the λ path.
    :rtype: :class:`TestResult`
    """
    _check_alternative(alternative)
    config = config or SolverConfig()
    spec = spec.validate(data.p)
    if naive:
        data = data.without_error()
    fit = select_lambda(data, family, grid, spec, False, config, shape, beta_init)
    return wald_statistic(data, spec, fit, config, alternative, naive)


def wald_statistic(
    data: Dataset,
    spec: HypothesisSpec,
    fit: FitResult,
    config: Optional[SolverConfig] = None,
    alternative: str = "two-sided",
    naive: bool = False,
) -> TestResult:
    """
    Wald statistic for an already computed fit of the program without the null.
    """
    config = config or SolverConfig()
    beta = fit.beta
    _check_sample_size(data.n, spec, fit.support)
    _, factor, _, idx, ridged = _sandwich(_meat(data, beta, config), hessian(data, beta), spec, fit.support)
    diff = spec.C @ beta[list(spec.M)] - spec.t
    statistic = _quadratic_form(factor, diff, data.n)
    signed = float(np.sign(diff[0]) * np.sqrt(statistic)) if spec.r == 1 else float("nan")
    return _finish(TestKind.WALD, statistic, signed, spec, fit, idx, alternative, naive, ridged)


def score_test(
    data: Dataset,
    spec: HypothesisSpec,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
    shape: Optional[float] = None,
    naive: bool = False,
    alternative: str = "two-sided",
    beta_init=None,
) -> TestResult:
    """
    Score test of :math:`C\\beta_M = t` from the partially penalized fit under the null. Parameters as in
    :func:`wald_test`.
    """
    _check_alternative(alternative)
    config = config or SolverConfig()
    spec = spec.validate(data.p)
    if naive:
        data = data.without_error()
    fit = select_lambda(data, family, grid, spec, True, config, shape, beta_init)
    return score_statistic(data, spec, fit, config, alternative, naive)


def score_statistic(
    data: Dataset,
    spec: HypothesisSpec,
    fit: FitResult,
    config: Optional[SolverConfig] = None,
    alternative: str = "two-sided",
    naive: bool = False,
) -> TestResult:
    """
    Score statistic for an already computed null constrained fit.
    """
    config = config or SolverConfig()
    beta = fit.beta
    _check_sample_size(data.n, spec, fit.support)
    _, factor, G, idx, ridged = _sandwich(_meat(data, beta, config), hessian(data, beta), spec, fit.support)
    u = G @ gradient(data, beta)[idx]
    statistic = _quadratic_form(factor, u, data.n)
    # the one-step update moves Cβ_M - t by -u
    signed = float(np.sign(-u[0]) * np.sqrt(statistic)) if spec.r == 1 else float("nan")
    return _finish(TestKind.SCORE, statistic, signed, spec, fit, idx, alternative, naive, ridged)


def run_test(kind: Union[str, TestKind], data: Dataset, spec: HypothesisSpec, **kwargs) -> TestResult:
    """
    Dispatch to :func:`wald_test` or :func:`score_test`.
    """
    if TestKind.from_name(kind) is TestKind.WALD:
        return wald_test(data, spec, **kwargs)
    return score_test(data, spec, **kwargs)


######################################################################################################
def bh_fdr(p_values, q: float = 0.05) -> np.ndarray:
    """
    Benjamini-Hochberg step-up rejections at false discovery rate q.

    :param p_values: p-values in [0, 1].
    :param q: Target rate, in (0, 1).
    :return: Boolean rejection mask, in input order.
    """
    p_values = _check_p_values(p_values)
    if not 0 < q < 1:
        raise InvalidInput(f"FDR level must lie in (0, 1), got {q}")
    if p_values.size == 0:
        return np.zeros(0, dtype=bool)
    return multipletests(p_values, alpha=q, method="fdr_bh")[0]


def bh_adjusted(p_values) -> np.ndarray:
    """
    Benjamini-Hochberg adjusted p-values (q-values): hypothesis j is rejected at level q iff its q-value is ≤ q.
    """
    p_values = _check_p_values(p_values)
    if p_values.size == 0:
        return np.zeros(0)
    return multipletests(p_values, method="fdr_bh")[1]


def _check_p_values(p_values) -> np.ndarray:
    p_values = np.asarray(p_values, dtype=float).reshape(-1)
    if np.any(~np.isfinite(p_values)) or np.any(p_values < 0) or np.any(p_values > 1):
        raise InvalidInput("p-values must lie in [0, 1]")
    return p_values


@dataclass(frozen=True)
class ScreenResult:
    """
    One test per coefficient, with BH q-values and the rejection mask at level :attr:`q`.
    """

    indices: Tuple[int, ...]
    results: Tuple[TestResult, ...]
    q_values: np.ndarray = field(compare=False)
    rejected: np.ndarray = field(compare=False)
    q: float = 0.05

    def rows(self) -> List[dict]:
        return [
            dict(index=j + 1, q_value=float(qv), rejected=bool(rej), **res.to_json())
            for j, res, qv, rej in zip(self.indices, self.results, self.q_values, self.rejected)
        ]


def _screen_one(j: int, data: Dataset, kind: TestKind, options: dict) -> TestResult:
    spec = HypothesisSpec(np.ones((1, 1)), np.zeros(1), (j,))
    return run_test(kind, data, spec, **options)


def coefficient_screen(
    data: Dataset,
    indices: Optional[Sequence[int]] = None,
    kind: Union[str, TestKind] = TestKind.WALD,
    q: float = 0.05,
    workers: Optional[int] = 1,
    **options,
) -> ScreenResult:
    """
    Test :math:`\\beta_j = 0` for every j in :code:`indices` (0-based; all coefficients if None), and control the
    false discovery rate over the batch. Remaining keyword arguments go to :func:`wald_test` / :func:`score_test`.
    """
    indices = tuple(range(data.p)) if indices is None else tuple(int(j) for j in indices)
    kind = TestKind.from_name(kind)
    results = tuple(parallel_map(partial(_screen_one, data=data, kind=kind, options=options), indices, workers))
    p_values = np.array([res.p_value for res in results])
    logger.info("screened %d coefficients with the %s test", len(indices), kind.value)
    return ScreenResult(indices, results, bh_adjusted(p_values), bh_fdr(p_values, q), q)
