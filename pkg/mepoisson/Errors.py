# -*- coding: utf-8 -*-
#
"""
Exception and warning classes shared by the whole package.

Two families are distinguished. Errors deriving from :class:`NumericalFailure` signal a breakdown of the numerics
(overflowing exponents, singular or ill conditioned systems, a λ grid where every fit failed); the simulation harness
counts those as failed replications and the command line maps them to exit code 2. All other errors are input
problems and, where it makes sense, are also :class:`ValueError` instances so that generic callers can catch them.

Conditions that are not fatal (iteration limit, iterate on the boundary of a norm ball, ridge added to a Hessian
block) are issued through :mod:`warnings`, with the categories defined here.

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"


class MEPoissonError(Exception):
    """
    Root of all exceptions raised by the package.
    """


class NumericalFailure(MEPoissonError):
    """
    A numerical procedure broke down. The input may well be legal; the computation could not be completed.
    """


class DimensionMismatch(MEPoissonError, ValueError):
    """
    Array shapes do not agree, eg, a coefficient vector of length 4 against a design with 5 columns.
    """


class InvalidInput(MEPoissonError, ValueError):
    """
    Input value is not acceptable: non finite numbers, negative counts, a covariance that is not positive
    semi-definite, index sets out of range, etc.
    """


class ExponentOverflow(NumericalFailure, ArithmeticError):
    """
    An exponent of the corrected Poisson mean exceeded the overflow guard.

    :param value: The offending exponent.
    :type value: float

    :param limit: The guard that was violated.
    :type limit: float
    """

    def __init__(self, value: float, limit: float, what: str = "exponent"):
        self.value = value
        self.limit = limit
        super().__init__(
            f"{what} {value:.6g} exceeds the overflow guard {limit:g}; coefficients are outside a sane region"
        )


class NonConvexProx(MEPoissonError, ValueError):
    """
    The proximal weight does not dominate the weak convexity constant of the penalty, the scalar problem is not convex.
    """


class SingularHessian(NumericalFailure):
    """
    The Newton system of the ADMM subproblem could not be factorized even after ridge escalation.
    """


class IllConditioned(NumericalFailure):
    """
    The restricted Hessian block or the sandwich matrix is not usable for inference.
    """


class CholeskyFailure(NumericalFailure):
    """
    A covariance matrix expected to be positive definite failed its Cholesky factorization.
    """


class AllFitsFailed(NumericalFailure):
    """
    Every point of a λ grid ended in a numerical failure.
    """


class InsufficientReplicates(MEPoissonError, ValueError):
    """
    No subject in a longitudinal panel has two or more visits, the error covariance cannot be estimated.
    """


class MaxIterationsWarning(UserWarning):
    """
    The ADMM loop reached its iteration limit; the best iterate is returned with :code:`converged=False`.
    """


class BoundaryWarning(UserWarning):
    """
    The final iterate lies on the boundary of one of the norm balls; the radius might be too small.
    """


class ConditioningWarning(UserWarning):
    """
    A ridge was added to a restricted Hessian block before inverting it.
    """
