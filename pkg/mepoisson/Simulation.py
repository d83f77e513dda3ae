# -*- coding: utf-8 -*-
#
"""
Monte Carlo battery for the empirical size and power of the tests.

A :class:`SimDesign` fixes everything about one cell of a table: sample size, dimension, covariate distribution and
covariance, error covariance, the hypothesis and its deviation h, the number of replications and the seed.
Replication :code:`rep` draws its data from :code:`numpy.random.default_rng([seed, rep])`, so the table does not depend
on how the replications are spread over the worker processes (see :mod:`.Workers`). Within a replication the covariates
are drawn first, then the measurement error, then the counts.

A replication whose fit fails numerically is logged and left out of the denominator of both rates; everything else
(including non-converged fits) counts.

Two profiles of designs are predefined: :code:`"desk"` (n=300, p=50) and :code:`"slow"` (adds p=350 at n=300 and
p=600 at n=500).

**Requires**: `numpy`_, `pandas`_.

.. _numpy: https://numpy.org
.. _pandas: https://pandas.pydata.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .ADMM import SolverConfig
from .CorrectedLoss import Dataset, guarded_exp
from .Errors import BoundaryWarning, CholeskyFailure, InvalidInput, MaxIterationsWarning, NumericalFailure
from .Hypotheses import HypothesisId, build_hypothesis, h_vector, template, true_beta
from .Inference import score_test, wald_test
from .Penalties import PenaltyFamily
from .Workers import parallel_map

logger = logging.getLogger(__name__)

ALPHA = 0.05
UNIFORM_HALF_WIDTH = math.sqrt(6.0) / 2.0
UNIFORM_VARIANCE = 0.5
TABLE_COLUMNS = ["hypothesis", "h", "T_W_rate", "T_S_rate", "reps", "failures", "T_W_se", "T_S_se"]


class CovariateDistribution(Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"


class CovarianceKind(Enum):
    IDENTITY = "identity"
    AR1 = "ar1"


@dataclass(frozen=True)
class SimDesign:
    """
    One cell of a size/power table.

    :param n: Sample size.
    :param p: Number of covariates.
    :param x_dist: Covariate distribution.
    :param sigma_kind: Covariate covariance: :code:`sigma_scale * I`, or :math:`\\Sigma_{ij} =` :code:`sigma_scale`
        :math:`\\cdot 0.5^{|i-j|}` for AR1.
    :param sigma_scale: Marginal covariate variance.
    :param omega_scale: Error covariance :math:`\\Omega =` :code:`omega_scale` :math:`\\cdot\\Sigma`, or
        :code:`omega_scale` :math:`\\cdot I` when :code:`omega_relative` is False.
    :param omega_relative: See above.
    :param hypothesis: Tested hypothesis.
    :param h: Deviation from the null; it moves the coefficient the hypothesis varies (see :mod:`.Hypotheses`).
    :param reps: Number of replications.
    :param seed: Base seed.
    :param naive: Run the tests with :math:`\\Omega` ignored.
    """

    n: int = 300
    p: int = 50
    x_dist: CovariateDistribution = CovariateDistribution.NORMAL
    sigma_kind: CovarianceKind = CovarianceKind.IDENTITY
    sigma_scale: float = 0.5
    omega_scale: float = 0.1
    omega_relative: bool = True
    hypothesis: HypothesisId = HypothesisId.H02
    h: float = 0.0
    reps: int = 500
    seed: int = 0
    naive: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x_dist", CovariateDistribution(self.x_dist))
        object.__setattr__(self, "sigma_kind", CovarianceKind(self.sigma_kind))
        object.__setattr__(self, "hypothesis", HypothesisId.from_name(self.hypothesis))
        if self.n < 1 or self.p < 4:
            raise InvalidInput(f"designs need n >= 1 and p >= 4, got n={self.n}, p={self.p}")
        if self.reps < 1:
            raise InvalidInput(f"reps must be positive, got {self.reps}")
        if not (self.sigma_scale > 0 and self.omega_scale >= 0):
            raise InvalidInput("sigma_scale must be positive and omega_scale nonnegative")
        build_hypothesis(self.hypothesis, self.p)

    def sigma(self) -> np.ndarray:
        if self.sigma_kind is CovarianceKind.IDENTITY:
            return self.sigma_scale * np.eye(self.p)
        lags = np.abs(np.subtract.outer(np.arange(self.p), np.arange(self.p)))
        return self.sigma_scale * 0.5**lags

    def omega(self) -> np.ndarray:
        if self.omega_relative:
            return self.omega_scale * self.sigma()
        return self.omega_scale * np.eye(self.p)

    def h_vector(self) -> Tuple[float, float, float]:
        return h_vector(self.hypothesis, self.h)

    def beta(self) -> np.ndarray:
        return true_beta(self.p, *self.h_vector())

    def spec(self):
        return build_hypothesis(self.hypothesis, self.p)

    def label(self) -> str:
        return self.hypothesis.name + (" naive" if self.naive else "")


def naive_design(**overrides) -> SimDesign:
    """
    The design of the naive comparison: covariates with covariance 0.7 I and error covariance 0.3 I.
    """
    settings = dict(sigma_scale=0.7, omega_scale=0.3, omega_relative=False)
    settings.update(overrides)
    return SimDesign(**settings)


def _factor(cov: np.ndarray, strict: bool) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        if strict:
            raise CholeskyFailure(f"covariance of size {cov.shape[0]} is not positive definite") from None
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gen_covariates(design: SimDesign, rng: np.random.Generator) -> np.ndarray:
    """
    n x p covariates with covariance :math:`\\Sigma`: normal rows, or iid uniform entries on
    :math:`(-\\sqrt{6}/2, \\sqrt{6}/2)` (variance 0.5), rescaled to unit variance and mixed by the Cholesky factor
    of :math:`\\Sigma`.
    """
    L = _factor(design.sigma(), strict=True)
    shape = (design.n, design.p)
    if design.x_dist is CovariateDistribution.NORMAL:
        return rng.standard_normal(shape) @ L.T
    Z = rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, shape)
    return Z @ L.T / math.sqrt(UNIFORM_VARIANCE)


def gen_measurement_error(design: SimDesign, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((design.n, design.p)) @ _factor(design.omega(), strict=False).T


def gen_outcome(X, beta, rng: np.random.Generator) -> np.ndarray:
    """
    Independent :math:`Y_i \\sim \\text{Poisson}(\\exp(\\beta^T X_i))`.
    """
    mean = guarded_exp(np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float))
    return rng.poisson(mean)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([seed, rep])


def gen_dataset(design: SimDesign, rep: int) -> Dataset:
    """
    The observed data of one replication.
    """
    rng = replication_rng(design.seed, rep)
    X = gen_covariates(design, rng)
    U = gen_measurement_error(design, rng)
    Y = gen_outcome(X, design.beta(), rng)
    return Dataset(X + U, Y, design.omega())


@dataclass(frozen=True)
class ReplicationOutcome:
    rep: int
    wald_statistic: float = math.nan
    score_statistic: float = math.nan
    wald_p: float = math.nan
    score_p: float = math.nan
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


def run_replication(
    rep: int,
    design: SimDesign,
    config: SolverConfig,
    family: PenaltyFamily = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
) -> ReplicationOutcome:
    """
    Draw one dataset and run both tests on it.
    """
    data = gen_dataset(design, rep)
    spec = design.spec()
    options = dict(family=family, grid=grid, config=config, naive=design.naive)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MaxIterationsWarning)
            warnings.simplefilter("ignore", BoundaryWarning)
            wald = wald_test(data, spec, **options)
            score = score_test(data, spec, **options)
    except NumericalFailure as e:
        logger.warning("%s h=%g replication %d failed: %s", design.label(), design.h, rep, e)
        return ReplicationOutcome(rep, failure=f"{type(e).__name__}: {e}")
    return ReplicationOutcome(rep, wald.statistic, score.statistic, wald.p_value, score.p_value)


@dataclass(frozen=True)
class SizePowerRow:
    """
    Rejection rates at :data:`ALPHA` of one design, with Monte Carlo standard errors
    :math:`\\sqrt{r(1-r)/\\text{valid}}`.
    """

    hypothesis: HypothesisId
    h: float
    wald_rate: float
    score_rate: float
    wald_se: float
    score_se: float
    reps: int
    failures: int
    naive: bool = False
    wald_statistics: Tuple[float, ...] = field(default=(), repr=False, compare=False)
    score_statistics: Tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def valid(self) -> int:
        return self.reps - self.failures

    def to_record(self) -> dict:
        return {
            "hypothesis": self.hypothesis.name + ("-naive" if self.naive else ""),
            "h": self.h,
            "T_W_rate": self.wald_rate,
            "T_S_rate": self.score_rate,
            "reps": self.reps,
            "failures": self.failures,
            "T_W_se": self.wald_se,
            "T_S_se": self.score_se,
        }


def _rate(p_values: np.ndarray, alpha: float) -> Tuple[float, float]:
    if p_values.size == 0:
        return math.nan, math.nan
    rate = float(np.mean(p_values < alpha))
    return rate, math.sqrt(rate * (1 - rate) / p_values.size)


def summarize(design: SimDesign, outcomes: Iterable[ReplicationOutcome], alpha: float = ALPHA) -> SizePowerRow:
    """
    Reduce replication outcomes to a :class:`SizePowerRow`; the order of the outcomes does not matter.
    """
    outcomes = sorted(outcomes, key=lambda o: o.rep)
    valid = [o for o in outcomes if not o.failed]
    wald_p = np.array([o.wald_p for o in valid])
    score_p = np.array([o.score_p for o in valid])
    wald_rate, wald_se = _rate(wald_p, alpha)
    score_rate, score_se = _rate(score_p, alpha)
    return SizePowerRow(
        hypothesis=design.hypothesis,
        h=design.h,
        wald_rate=wald_rate,
        score_rate=score_rate,
        wald_se=wald_se,
        score_se=score_se,
        reps=len(outcomes),
        failures=len(outcomes) - len(valid),
        naive=design.naive,
        wald_statistics=tuple(o.wald_statistic for o in valid),
        score_statistics=tuple(o.score_statistic for o in valid),
    )


def run_experiment(
    design: SimDesign,
    config: Optional[SolverConfig] = None,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    grid: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
) -> SizePowerRow:
    """
    Run all replications of a design and summarize them.

    :param design: The design.
    :param config: Solver settings.
    :param family: Penalty family.
    :param grid: λ grid, the default one if None.
    :param workers: Number of processes; :code:`NP_THREADS` or the CPU count if None.
    :rtype: :class:`SizePowerRow`
    """
    config = config or SolverConfig()
    family = PenaltyFamily.from_name(family)
    logger.info("%s h=%g: %d replications, n=%d, p=%d", design.label(), design.h, design.reps, design.n, design.p)
    replicate = partial(run_replication, design=design, config=config, family=family, grid=grid)
    row = summarize(design, parallel_map(replicate, range(design.reps), workers))
    if row.failures:
        logger.warning("%s h=%g: %d of %d replications failed", design.label(), design.h, row.failures, row.reps)
    return row


def naive_comparison(
    design: Optional[SimDesign] = None, config: Optional[SolverConfig] = None, **options
) -> Tuple[SizePowerRow, SizePowerRow]:
    """
    Run a design with the corrected tests and with the naive ones, on the same replications.

    :param design: Defaults to :func:`naive_design`.
    :return: (corrected, naive) rows.
    """
    design = replace(design or naive_design(), naive=False)
    corrected = run_experiment(design, config, **options)
    naive = run_experiment(replace(design, naive=True), config, **options)
    return corrected, naive


def hypothesis_block(base: SimDesign, h_values: Optional[Sequence[float]] = None) -> List[SimDesign]:
    """
    The designs of one table block: the base design at every h of the hypothesis grid.
    """
    h_values = template(base.hypothesis).h_grid if h_values is None else h_values
    return [replace(base, h=float(h)) for h in h_values]


def profile_designs(
    profile: str = "desk", hypotheses: Optional[Sequence[Union[str, HypothesisId]]] = None, **overrides
) -> List[SimDesign]:
    """
    All designs of a profile, every hypothesis at every h of its grid.
    """
    if profile == "desk":
        sizes = [(300, 50)]
    elif profile == "slow":
        sizes = [(300, 50), (300, 350), (500, 600)]
    else:
        raise InvalidInput(f"unknown profile {profile!r}; use 'desk' or 'slow'")
    hypotheses = list(HypothesisId) if hypotheses is None else [HypothesisId.from_name(h) for h in hypotheses]
    designs = []
    for n, p in sizes:
        for hypothesis in hypotheses:
            designs.extend(hypothesis_block(SimDesign(n=n, p=p, hypothesis=hypothesis, **overrides)))
    return designs


def run_battery(designs: Sequence[SimDesign], config: Optional[SolverConfig] = None, **options) -> List[SizePowerRow]:
    return [run_experiment(design, config, **options) for design in designs]


def rows_to_frame(rows: Sequence[SizePowerRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_record() for row in rows], columns=TABLE_COLUMNS)


def write_table(rows: Sequence[SizePowerRow], stream: IO[str]):
    """
    TSV table, numbers with 6 significant digits.
    """
    rows_to_frame(rows).to_csv(stream, sep="\t", index=False, float_format="%.6g")


def write_json(rows: Sequence[SizePowerRow], stream: IO[str]):
    json.dump([row.to_record() for row in rows], stream, indent=2)
    stream.write("\n")
