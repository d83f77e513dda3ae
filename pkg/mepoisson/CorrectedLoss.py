# -*- coding: utf-8 -*-
#
"""
The noise corrected Poisson loss.

The observed design is :math:`W_i = X_i + U_i` with :math:`U_i \\sim N(0, \\Omega)`, :math:`\\Omega` known.
Because :math:`E\\{\\exp(\\beta^T W_i - \\beta^T\\Omega\\beta/2) | X_i\\} = \\exp(\\beta^T X_i)`,
replacing the Poisson mean by the corrected mean gives a loss whose conditional expectation is the error free
negative log-likelihood (up to terms free of :math:`\\beta`)::

    L(β) = -1/n Σ_i { Y_i W_iᵀβ - exp(βᵀW_i - βᵀΩβ/2) }

The module provides the loss, its gradient and Hessian, two estimators of the covariance of the per-observation score
(the closed form one, used by default in the inference, and the plain empirical one), and a Monte Carlo oracle of the
correction identity used by the tests.

All functions are pure; the :class:`Dataset` arrays are flagged read-only after validation.

Every exponent is checked against :data:`EXPONENT_GUARD` before exponentiation; an
:class:`.Errors.ExponentOverflow` means that the coefficients are far outside the region the norm balls of the
solver are supposed to enforce.

**Requires**: `numpy`_.

.. _numpy: https://numpy.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np

from .Errors import DimensionMismatch, ExponentOverflow, InvalidInput

EXPONENT_GUARD = 700.0
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def check_covariance(omega, p: int, name: str = "omega") -> np.ndarray:
    """
    Validate a measurement error covariance and return it exactly symmetric.

    :param omega: Candidate matrix.
    :param p: Expected dimension.
    :param name: Name used in the error messages.
    :return: :math:`(\\Omega + \\Omega^T)/2` as a new float array.
    :rtype: numpy.ndarray
    """
    omega = np.array(omega, dtype=float, copy=True)
    if omega.ndim != 2 or omega.shape != (p, p):
        raise DimensionMismatch(f"{name} must be {p}x{p}, got shape {omega.shape}")
    if not np.all(np.isfinite(omega)):
        raise InvalidInput(f"{name} has non finite entries")
    asym = np.max(np.abs(omega - omega.T)) if p > 0 else 0.0
    if asym > SYMMETRY_TOL:
        raise InvalidInput(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    omega = (omega + omega.T) / 2.0
    smallest = np.linalg.eigvalsh(omega)[0]
    if smallest < -PSD_TOL:
        raise InvalidInput(f"{name} is not positive semi-definite (smallest eigenvalue {smallest:.3g})")
    return omega


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Observed covariates, counts and the measurement error covariance.

    :param W: Observed design, n x p.
    :type W: numpy.ndarray

    :param Y: Counts, length n; stored as floats but checked to be nonnegative integers.
    :type Y: numpy.ndarray

    :param omega: Measurement error covariance, p x p, symmetric positive semi-definite.
    :type omega: numpy.ndarray
    """

    W: np.ndarray
    Y: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        if W.ndim != 2:
            raise DimensionMismatch(f"W must be a matrix, got {W.ndim} dimension(s)")
        n, p = W.shape
        if n < 1 or p < 1:
            raise DimensionMismatch(f"W must have at least one row and one column, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise InvalidInput("W has non finite entries")

        Y = np.array(self.Y, dtype=float, copy=True)
        if Y.ndim != 1 or Y.shape[0] != n:
            raise DimensionMismatch(f"Y must be a vector of length {n}, got shape {Y.shape}")
        if not np.all(np.isfinite(Y)) or np.any(Y < 0) or np.any(Y != np.floor(Y)):
            raise InvalidInput("Y must contain nonnegative integer counts")

        omega = check_covariance(self.omega, p)

        object.__setattr__(self, "W", _readonly(W))
        object.__setattr__(self, "Y", _readonly(Y))
        object.__setattr__(self, "omega", _readonly(omega))

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]

    def without_error(self) -> "Dataset":
        """
        Same data with :math:`\\Omega = 0`, ie, the naive model that ignores the measurement error.
        """
        return replace(self, omega=np.zeros((self.p, self.p)))

    def subset(self, rows) -> "Dataset":
        """
        Restrict to a subset of the observations (used by the cross validation).
        """
        rows = np.asarray(rows)
        return Dataset(self.W[rows], self.Y[rows], self.omega)

    def select_columns(self, columns) -> "Dataset":
        """
        Restrict to a subset of the covariates, with the matching block of :math:`\\Omega`.
        """
        columns = np.asarray(columns, dtype=int)
        return Dataset(self.W[:, columns], self.Y, self.omega[np.ix_(columns, columns)])


def check_coefficients(data: Dataset, beta) -> np.ndarray:
    """
    Return :code:`beta` as a float vector of the right length, with finite entries.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.shape[0] != data.p:
        raise DimensionMismatch(f"coefficients must be a vector of length {data.p}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise InvalidInput("coefficients have non finite entries")
    return beta


def guarded_exp(exponent: np.ndarray, what: str = "exponent") -> np.ndarray:
    """
    :func:`numpy.exp` after checking every entry against :data:`EXPONENT_GUARD`.
    """
    if exponent.size:
        top = np.max(exponent)
        if top > EXPONENT_GUARD:
            raise ExponentOverflow(float(top), EXPONENT_GUARD, what)
    return np.exp(exponent)


def _corrected_mean(data: Dataset, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    # returns (Wβ, exp(Wβ - βᵀΩβ/2), βᵀΩβ)
    linear = data.W @ beta
    quad = float(beta @ data.omega @ beta)
    return linear, guarded_exp(linear - quad / 2.0), quad


def loss(data: Dataset, beta) -> float:
    """
    The corrected loss :math:`L(\\beta)`.

    :param data: The observations.
    :type data: :class:`Dataset`

    :param beta: Coefficients, length p.
    :type beta: numpy.ndarray

    :return: :math:`-n^{-1}\\sum_i \\{Y_i W_i^T\\beta - \\exp(\\beta^T W_i - \\beta^T\\Omega\\beta/2)\\}`
    :rtype: float
    """
    beta = check_coefficients(data, beta)
    linear, mu, _ = _corrected_mean(data, beta)
    return float(-(np.sum(data.Y * linear) - np.sum(mu)) / data.n)


def gradient(data: Dataset, beta) -> np.ndarray:
    """
    Gradient of :func:`loss`, :math:`-n^{-1}\\sum_i \\{Y_i W_i - \\mu_i (W_i - \\Omega\\beta)\\}` with
    :math:`\\mu_i` the corrected mean.
    """
    beta = check_coefficients(data, beta)
    _, mu, _ = _corrected_mean(data, beta)
    d = data.W - data.omega @ beta
    return -(data.W.T @ data.Y - d.T @ mu) / data.n


def hessian(data: Dataset, beta) -> np.ndarray:
    """
    Hessian of :func:`loss`, :math:`n^{-1}\\sum_i \\mu_i\\{(W_i - \\Omega\\beta)(W_i - \\Omega\\beta)^T - \\Omega\\}`.

    The matrix is returned exactly symmetric. It may be indefinite at a given point: the corrected loss is only
    convex in a restricted sense on the feasible region.
    """
    beta = check_coefficients(data, beta)
    _, mu, _ = _corrected_mean(data, beta)
    d = data.W - data.omega @ beta
    q = (d * mu[:, None]).T @ d - np.sum(mu) * data.omega
    q /= data.n
    return (q + q.T) / 2.0


def sigma_hat(data: Dataset, beta) -> np.ndarray:
    """
    Closed form estimate of the covariance of the per-observation corrected score at :math:`\\beta`.

    With :math:`d_i = W_i - \\Omega\\beta`, :math:`A_i = \\exp(\\beta^T W_i - \\beta^T\\Omega\\beta/2)` and
    :math:`B_i = \\exp(2\\beta^T W_i - \\beta^T\\Omega\\beta)` the estimate is the average of::

        A_i (d_i d_iᵀ - Ω) - B_i (d_i d_iᵀ - Ω/2) + A_i Ω - B_i Ω
            - B_i Ωβ d_iᵀ - B_i d_i βᵀΩ + B_i d_i d_iᵀ

    assembled term by term and then symmetrized. For :math:`\\Omega = 0` it reduces to the Poisson information
    :math:`n^{-1}\\sum_i e^{\\beta^T W_i} W_i W_i^T`.

    .. note:: The :math:`B_i` terms rely on :math:`E(B_i|X_i)` being :math:`\\exp(2\\beta^T X_i)`; for nonzero
        :math:`\\Omega` that conditional mean carries an extra :math:`\\exp(\\beta^T\\Omega\\beta)` factor, so the
        estimate is mildly biased when the error is large. :func:`residual_covariance` is the model free alternative.
    """
    beta = check_coefficients(data, beta)
    linear, a, quad = _corrected_mean(data, beta)
    b = guarded_exp(2.0 * linear - quad, "doubled exponent")
    omega = data.omega
    d = data.W - omega @ beta
    omega_beta = omega @ beta

    dd_a = (d * a[:, None]).T @ d
    dd_b = (d * b[:, None]).T @ d
    sum_a = np.sum(a)
    sum_b = np.sum(b)
    d_b = d.T @ b

    total = dd_a - sum_a * omega
    total -= dd_b - sum_b * omega / 2.0
    total += sum_a * omega
    total -= sum_b * omega
    total -= np.outer(omega_beta, d_b)
    total -= np.outer(d_b, omega_beta)
    total += dd_b
    total /= data.n
    return (total + total.T) / 2.0


def score_residuals(data: Dataset, beta) -> np.ndarray:
    """
    Per-observation corrected scores :math:`r_i = Y_i W_i - \\mu_i(W_i - \\Omega\\beta)`, as an n x p matrix.
    """
    beta = check_coefficients(data, beta)
    _, mu, _ = _corrected_mean(data, beta)
    d = data.W - data.omega @ beta
    return data.Y[:, None] * data.W - mu[:, None] * d


def residual_covariance(data: Dataset, beta) -> np.ndarray:
    """
    Empirical covariance of the corrected scores, :math:`n^{-1}\\sum_i r_i r_i^T` (see :func:`score_residuals`).
    """
    r = score_residuals(data, beta)
    s = r.T @ r / data.n
    return (s + s.T) / 2.0


def corrected_score_oracle(
    X, beta, omega, draws: int, seed: int, return_se: bool = False
) -> Union[float, Tuple[float, float]]:
    """
    Monte Carlo estimate of :math:`E\\{\\exp(\\beta^T(X+U) - \\beta^T\\Omega\\beta/2)\\}`, :math:`U \\sim N(0,\\Omega)`.

    The expectation equals :math:`\\exp(\\beta^T X)`; the tests use this to check the correction.

    :param X: Error free covariate vector.
    :param beta: Coefficients.
    :param omega: Error covariance.
    :param draws: Number of Monte Carlo draws, at least 1.
    :param seed: Seed for :func:`numpy.random.default_rng`.
    :param return_se: Also return the Monte Carlo standard error of the mean.
    :rtype: float or (float, float)
    """
    if draws < 1:
        raise InvalidInput(f"draws must be at least 1, got {draws}")
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    p = X.shape[0]
    if beta.shape != (p,):
        raise DimensionMismatch(f"beta must have length {p}, got shape {beta.shape}")
    omega = check_covariance(omega, p)

    # eigen factor keeps Ω = 0 exact, unlike a Cholesky with jitter
    vals, vecs = np.linalg.eigh(omega)
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((draws, p)) @ (factor.T @ beta)
    values = guarded_exp(float(beta @ X) + noise - float(beta @ omega @ beta) / 2.0)
    mean = float(np.mean(values))
    if return_se:
        se = float(np.std(values, ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
        return mean, se
    return mean
