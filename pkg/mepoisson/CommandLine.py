# -*- coding: utf-8 -*-
#
"""
Command line front end; the work is done by :func:`mepoisson.run_command`.

Exit codes: 0 on success, 1 on a usage or input error, 2 when the numerics fail (see :class:`.Errors.NumericalFailure`).

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import argparse
import logging
import sys
from typing import List, Optional

from .Config import setup_logging
from .Errors import MEPoissonError, NumericalFailure
from .Inference import ALTERNATIVES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on its own, which is reserved for numerical failures
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _solver_options(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("solver")
    group.add_argument("--config", help="JSON or TOML file with solver settings")
    group.add_argument("--rho", type=float, help="augmented Lagrangian weight")
    group.add_argument("--tmax", type=int, dest="t_max", help="maximal number of ADMM iterations")
    group.add_argument("--tol", type=float, help="stopping tolerance")
    group.add_argument("--r1", type=float, dest="R1", help="L1 radius")
    group.add_argument("--r2", type=float, dest="R2", help="L2 radius")
    group.add_argument("--lambda-grid", dest="lambda_grid", help="'default', 'start:stop:num' or a comma list")
    group.add_argument("--penalty", choices=["scad", "mcp"], help="penalty family (default scad)")
    group.add_argument("--shape", type=float, help="SCAD a or MCP gamma")
    group.add_argument("--meat", choices=["model", "empirical"], help="score covariance used by the tests")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for traces")
    parser.add_argument("-o", "--output", help="output file (default: standard output)")


def _data_options(parser: argparse.ArgumentParser, response: bool = True):
    parser.add_argument("--data", required=True, help="CSV with a header row")
    parser.add_argument("--omega", default="zero", help="p x p CSV, 'zero' or 'scaled:<c>:<file>' (default zero)")
    if response:
        parser.add_argument("--response", default="y", help="name of the response column (default y)")
    parser.add_argument("--center", action="store_true", help="center the covariates")
    parser.add_argument("--scale", action="store_true", help="divide the covariates by their standard deviations")
    parser.add_argument("--ratio-to", dest="ratio_to", help="divide the covariates by this column, which is dropped")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mepoisson",
        description="Penalized estimation and Wald/score tests for Poisson regression with covariate measurement error",
    )
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    commands.required = True

    fit = commands.add_parser("fit", help="BIC-tuned penalized fit")
    _data_options(fit)
    fit.add_argument("--hyp", help="hypothesis JSON; its block is left unpenalized")
    fit.add_argument("--null", action="store_true", help="impose the hypothesis (needs --hyp)")
    _solver_options(fit)

    test = commands.add_parser("test", help="Wald and/or score test of a linear hypothesis")
    _data_options(test)
    test.add_argument("--hyp", required=True, help='hypothesis JSON {"C": [[...]], "t": [...], "M": [...]}')
    test.add_argument("--kind", choices=["wald", "score", "both"], default="both")
    test.add_argument("--naive", action="store_true", help="ignore the measurement error")
    test.add_argument("--alternative", choices=ALTERNATIVES, default="two-sided")
    _solver_options(test)

    screen = commands.add_parser("screen", help="test every coefficient, with Benjamini-Hochberg q-values")
    _data_options(screen)
    screen.add_argument("--kind", choices=["wald", "score"], default="wald")
    screen.add_argument("--columns", help="comma separated 1-based covariate indices (default: all)")
    screen.add_argument("--q", type=float, default=0.05, help="false discovery rate")
    screen.add_argument("--workers", type=int, help="worker processes (default: NP_THREADS or the CPU count)")
    _solver_options(screen)

    simulate = commands.add_parser("simulate", help="empirical size and power tables")
    simulate.add_argument("--design", help="h01 ... h10, a comma list, or 'all' (default all)")
    simulate.add_argument("--profile", choices=["desk", "slow"], default="desk")
    simulate.add_argument("--n", type=int, help="sample size (overrides the profile)")
    simulate.add_argument("--p", type=int, help="number of covariates (overrides the profile)")
    simulate.add_argument("--x-dist", dest="x_dist", choices=["normal", "uniform"], default="normal")
    simulate.add_argument("--sigma", choices=["identity", "ar1"], default="identity", help="covariate covariance")
    simulate.add_argument("--sigma-scale", dest="sigma_scale", type=float, default=0.5)
    simulate.add_argument("--omega-scale", dest="omega_scale", type=float, default=0.1)
    simulate.add_argument(
        "--absolute-omega",
        dest="absolute_omega",
        action="store_true",
        help="error covariance omega-scale * I instead of omega-scale * Sigma",
    )
    simulate.add_argument("--h", help="comma separated deviations (default: the grid of the hypothesis)")
    simulate.add_argument("--reps", type=int, default=500)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--naive", action="store_true", help="also run the tests that ignore the error")
    simulate.add_argument("--workers", type=int, help="worker processes (default: NP_THREADS or the CPU count)")
    simulate.add_argument("--json", action="store_true", help="JSON instead of a TSV table")
    _solver_options(simulate)

    omega = commands.add_parser("estimate-omega", help="error covariance from repeated measurements")
    omega.add_argument("--panel", required=True, help="CSV with subject, visit, age and feature columns")
    omega.add_argument("--subject", default="subject")
    omega.add_argument("--visit", default="visit")
    omega.add_argument("--age", default="age")
    omega.add_argument("--no-detrend", dest="detrend", action="store_false", help="skip the age regression")
    omega.add_argument("--p", type=int, help="embed into a p x p matrix")
    omega.add_argument("--error-free", dest="error_free", help="comma separated 1-based error free positions")
    omega.add_argument("-v", "--verbose", action="count", default=0)
    omega.add_argument("-o", "--output", help="output file (default: standard output)")

    predict = commands.add_parser("predict", help="predicted counts, or cross-validated prediction error")
    _data_options(predict)
    predict.add_argument("--coef", help="JSON with a 'beta' list, eg, the output of fit")
    predict.add_argument("--cv", type=int, metavar="K", help="K-fold cross-validated prediction error instead")
    predict.add_argument("--select", choices=["wald", "score"], help="screen the covariates in every fold first")
    predict.add_argument("--seed", type=int, default=0)
    predict.add_argument("--no-half", dest="half", action="store_false", help="do not halve the quadratic term")
    _solver_options(predict)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse the arguments, run the command and map failures to exit codes.
    """
    from . import run_command

    parser = build_parser()
    try:
        options = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_USAGE
    setup_logging(options.verbose)
    try:
        output = run_command(options)
    except NumericalFailure as e:
        print(f"mepoisson: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MEPoissonError, ValueError, OSError) as e:
        print(f"mepoisson: {e}", file=sys.stderr)
        return EXIT_USAGE

    if options.output is None:
        sys.stdout.write(output)
    else:
        with open(options.output, "w", encoding="utf-8") as stream:
            stream.write(output)
        logger.info("results written to %s", options.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
