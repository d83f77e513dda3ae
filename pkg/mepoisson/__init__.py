# -*- coding: utf-8 -*-
#
"""
This package implements penalized estimation and hypothesis testing for high dimensional Poisson regression when the
covariates are observed with additive normal measurement error, :math:`W = X + U`, :math:`U \\sim N(0, \\Omega)` with
:math:`\\Omega` known (or estimated from repeated measurements).

The plain Poisson likelihood evaluated at :math:`W` is biased. The package works with the corrected loss

.. math::

    L(\\beta) = -\\frac{1}{n}\\sum_i \\{Y_i\\beta^T W_i - \\exp(\\beta^T W_i - \\beta^T\\Omega\\beta/2)\\},

whose expectation given the true covariates is the negative log-likelihood up to a constant. With :math:`\\Omega = 0`
everything reduces to ordinary penalized Poisson regression.

Package Entry Points
====================

The building blocks are:

    * :class:`.CorrectedLoss.Dataset`, the observations :math:`(W, Y, \\Omega)`, with the loss, its gradient and
      Hessian, and the score covariance in :mod:`.CorrectedLoss`;
    * the SCAD and MCP penalties of :mod:`.Penalties`, created by :func:`make_penalty`;
    * a linear null hypothesis :math:`C\\beta_M = t`, :class:`.Constraints.HypothesisSpec`;
    * :func:`.ADMM.admm_fit`, which solves the penalized program on an L1/L2 feasible set, with the tested block
      :math:`\\beta_M` unpenalized and (optionally) the null imposed, and :func:`.ADMM.select_lambda`, which walks a λ
      grid and keeps the fit with the smallest BIC;
    * :func:`.Inference.wald_test` and :func:`.Inference.score_test`, the partially penalized tests, both
      asymptotically :math:`\\chi^2_r` under the null.

The simplest way to test a hypothesis is::

    data = Dataset(W, Y, omega)
    spec = HypothesisSpec(C=[[1.0]], t=[0.0], M=(2,))    # beta_3 = 0, 0-based indices
    result = wald_test(data, spec)                       # or score_test
    result.p_value

On top of these, :mod:`.Simulation` runs Monte Carlo batteries for the empirical size and power of the tests,
:mod:`.DataIO` reads and writes the file formats, estimates :math:`\\Omega` from repeated measurements and computes
(cross-validated) predictions, and :func:`run_command` is the entry point of the :code:`mepoisson` command line tool.

Some Technical/implementation aspects
=====================================

The ADMM loop is done in the :class:`.ADMM.ADMM_Core` class. Each iteration solves a smooth subproblem in
:math:`(\\beta_M, \\beta_{M^c})` by a damped Newton method, projects onto the norm balls, applies the closed form
proximal operator of the penalty to the untested block and updates the scaled duals. The augmented Lagrangian weight
:code:`rho` doubles as the proximal weight, so it has to exceed the weak convexity constant of the penalty; this is
checked up front (:meth:`.ADMM.SolverConfig.validate_against`).

The loss is only convex on a bounded set in expectation; pointwise the Hessian may be indefinite. A Newton system whose
Cholesky factorization fails is ridged, and the restricted Hessian of the tests is ridged with a
:class:`.Errors.ConditioningWarning` when needed. Every numerical breakdown is a :class:`.Errors.NumericalFailure`.

**Requires**: `numpy`_, `scipy`_, `pandas`_, `statsmodels`_.

.. _numpy: https://numpy.org
.. _scipy: https://scipy.org
.. _pandas: https://pandas.pydata.org
.. _statsmodels: https://www.statsmodels.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import json
import logging
from dataclasses import replace
from importlib import metadata
from io import StringIO
from typing import Optional

import numpy as np
import pandas as pd

from .ADMM import FitResult, SolverConfig, admm_fit, bic, default_lambda_grid, penalized_initial, select_lambda
from .Config import load_config, solver_config_from
from .Constraints import FeasibleSet, HypothesisSpec, project_feasible, project_l1, shrink_l2
from .CorrectedLoss import Dataset, gradient, hessian, loss, residual_covariance, sigma_hat
from .DataIO import (
    center_columns,
    cross_validated_error,
    estimate_omega,
    load_dataset,
    predict,
    prediction_error,
    ratio_to_reference,
    read_design,
    read_omega,
    read_panel,
    scale_columns,
    write_matrix,
)
from .Errors import (
    AllFitsFailed,
    InvalidInput,
    MEPoissonError,
    NumericalFailure,
)
from .Hypotheses import HypothesisId, build_hypothesis
from .Inference import (
    TestKind,
    TestResult,
    bh_adjusted,
    bh_fdr,
    coefficient_screen,
    run_test,
    score_test,
    wald_test,
)
from .Penalties import MCP_Penalty, Penalty, PenaltyFamily, SCAD_Penalty, make_penalty, return_penalty_class
from .Simulation import (
    SimDesign,
    hypothesis_block,
    naive_comparison,
    profile_designs,
    run_battery,
    run_experiment,
    write_json,
    write_table,
)

try:
    __version__ = metadata.version("mepoisson")
except metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

logger = logging.getLogger(__name__)


################################################################################################################
def _int_list(text: Optional[str], one_based: bool = True) -> Optional[list]:
    if text is None:
        return None
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInput(f"expected a comma separated list of integers, got {text!r}") from None
    if one_based:
        if any(v < 1 for v in values):
            raise InvalidInput(f"indices are 1-based, got {values}")
        return [v - 1 for v in values]
    return values


def _covariates(options) -> tuple:
    # the preprocessing flags act on the covariates before Ω is matched against them
    frame, Y = read_design(options.data, getattr(options, "response", "y"))
    if options.ratio_to is not None:
        frame = ratio_to_reference(frame, options.ratio_to)
    if options.center:
        frame = center_columns(frame)
    if options.scale:
        frame = scale_columns(frame)
    omega = read_omega(options.omega, frame.shape[1])
    return frame, Y, omega


def _dataset(options) -> tuple:
    frame, Y, omega = _covariates(options)
    if Y is None:
        raise InvalidInput(f"{options.data} has no response column {options.response!r}")
    return Dataset(frame.to_numpy(), Y, omega), [str(c) for c in frame.columns]


def _settings(options) -> tuple:
    overrides = {
        key: getattr(options, key, None)
        for key in ("rho", "t_max", "tol", "R1", "R2", "meat", "penalty", "shape", "lambda_grid")
    }
    return solver_config_from(load_config(getattr(options, "config", None)), **overrides)


def _read_hypothesis(path: str) -> HypothesisSpec:
    with open(path, "r", encoding="utf-8") as stream:
        return HypothesisSpec.from_json(json.load(stream))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _fit(options) -> str:
    data, names = _dataset(options)
    config, penalty = _settings(options)
    spec = None if options.hyp is None else _read_hypothesis(options.hyp)
    if options.null and spec is None:
        raise InvalidInput("--null needs a hypothesis (--hyp)")
    fit = select_lambda(data, penalty["family"], penalty["grid"], spec, options.null, config, penalty["shape"])
    return _dumps(dict(fit.to_json(), names=names))


def _test(options) -> str:
    data, _ = _dataset(options)
    config, penalty = _settings(options)
    spec = _read_hypothesis(options.hyp)
    kinds = [TestKind.WALD, TestKind.SCORE] if options.kind == "both" else [TestKind.from_name(options.kind)]
    results = [
        run_test(
            kind,
            data,
            spec,
            family=penalty["family"],
            grid=penalty["grid"],
            config=config,
            shape=penalty["shape"],
            naive=options.naive,
            alternative=options.alternative,
        ).to_json()
        for kind in kinds
    ]
    return _dumps(results[0] if len(results) == 1 else results)


def _screen(options) -> str:
    data, names = _dataset(options)
    config, penalty = _settings(options)
    screen = coefficient_screen(
        data,
        indices=_int_list(options.columns),
        kind=options.kind,
        q=options.q,
        workers=options.workers,
        family=penalty["family"],
        grid=penalty["grid"],
        config=config,
        shape=penalty["shape"],
    )
    rows = screen.rows()
    for row in rows:
        row["name"] = names[row["index"] - 1]
    return _dumps(rows)


def _simulate(options) -> str:
    config, penalty = _settings(options)
    hypotheses = None
    if options.design is not None and options.design != "all":
        hypotheses = [HypothesisId.from_name(h.strip()) for h in options.design.split(",")]
    design_options = dict(
        x_dist=options.x_dist,
        sigma_kind=options.sigma,
        sigma_scale=options.sigma_scale,
        omega_scale=options.omega_scale,
        omega_relative=not options.absolute_omega,
        reps=options.reps,
        seed=options.seed,
    )
    if options.n is None and options.p is None:
        designs = profile_designs(options.profile, hypotheses, **design_options)
    else:
        # explicit sizes replace those of the profile
        sizes = {k: v for k, v in (("n", options.n), ("p", options.p)) if v is not None}
        designs = [
            design
            for hypothesis in hypotheses or list(HypothesisId)
            for design in hypothesis_block(SimDesign(hypothesis=hypothesis, **sizes, **design_options))
        ]
    if options.h is not None:
        try:
            h_values = [float(h) for h in options.h.split(",")]
        except ValueError:
            raise InvalidInput(f"malformed list of deviations {options.h!r}") from None
        bases = {(d.hypothesis, d.n, d.p): d for d in designs}
        designs = [design for base in bases.values() for design in hypothesis_block(base, h_values)]
    if options.naive:
        designs = [x for d in designs for x in (d, replace(d, naive=True))]

    rows = run_battery(designs, config, family=penalty["family"], grid=penalty["grid"], workers=options.workers)
    stream = StringIO()
    (write_json if options.json else write_table)(rows, stream)
    return stream.getvalue()


def _estimate_omega(options) -> str:
    panel = read_panel(options.panel, options.subject, options.visit, options.age if options.detrend else None)
    error_free = _int_list(options.error_free) or []
    omega = estimate_omega(panel, options.p, error_free)
    stream = StringIO()
    write_matrix(stream, omega)
    return stream.getvalue()


def _predict(options) -> str:
    if (options.coef is None) == (options.cv is None):
        raise InvalidInput("predict needs exactly one of --coef and --cv")
    if options.cv is not None:
        data, _ = _dataset(options)
        config, penalty = _settings(options)
        errors = cross_validated_error(
            data,
            penalty["family"],
            folds=options.cv,
            seed=options.seed,
            kind=options.select,
            grid=penalty["grid"],
            config=config,
            shape=penalty["shape"],
            half=options.half,
        )
        return _dumps({"fold_errors": errors, "mean_error": float(np.mean(errors)), "selection": options.select})

    frame, Y, omega = _covariates(options)
    with open(options.coef, "r", encoding="utf-8") as stream:
        coefficients = json.load(stream)
    try:
        beta = np.asarray(coefficients["beta"], dtype=float)
    except (KeyError, TypeError):
        raise InvalidInput(f"{options.coef} has no 'beta' list") from None
    Y_hat = predict(beta, frame.to_numpy(), omega, options.half)
    result = pd.DataFrame({"prediction": Y_hat})
    if Y is not None:
        result["y"] = Y
        logger.info("prediction error %.6g", prediction_error(Y, Y_hat))
    return result.to_csv(index=False, float_format="%.17g")


COMMANDS = {
    "fit": _fit,
    "test": _test,
    "screen": _screen,
    "simulate": _simulate,
    "estimate-omega": _estimate_omega,
    "predict": _predict,
}


def run_command(options) -> str:
    """
    Entry point of the command line tool: run one command and return its output as text.

    :param options: Object with the attributes set by :func:`.CommandLine.build_parser`; :code:`options.command` picks
        the command:

        * :code:`fit`: BIC-tuned fit of the data in :code:`options.data` with the error covariance
          :code:`options.omega`; JSON with the coefficients, the support and the selected λ;
        * :code:`test`: Wald and/or score test of the hypothesis in :code:`options.hyp`; JSON;
        * :code:`screen`: one test per coefficient, with Benjamini-Hochberg q-values; JSON;
        * :code:`simulate`: size/power battery; TSV table, or JSON with :code:`options.json`;
        * :code:`estimate-omega`: error covariance from the panel in :code:`options.panel`; headerless CSV;
        * :code:`predict`: predictions for :code:`options.coef`, or the cross-validated error with :code:`options.cv`.

    :return: The serialized result.
    :raises MEPoissonError: Invalid input (a :class:`ValueError` as well) or numerical failure
        (:class:`.Errors.NumericalFailure`).
    """
    try:
        command = COMMANDS[options.command]
    except (KeyError, AttributeError):
        raise InvalidInput(f"unknown command {getattr(options, 'command', None)!r}") from None
    return command(options)
