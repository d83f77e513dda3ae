# -*- coding: utf-8 -*-
#
"""
File formats, error covariance estimation from repeated measurements, and prediction.

Formats:

* data CSV: a header row; the response column (default :code:`y`) holds the counts, every other column is a covariate,
  in file order. Values are written with 17 significant digits, so a write/read cycle is exact.
* Ω: a headerless p x p CSV, or one of the literals :code:`zero` and :code:`scaled:<c>:<path>` (c times the matrix in
  the file).
* panel CSV: one row per subject visit, with subject, visit and (optionally) age columns; the remaining columns are
  the error prone features.

The error covariance is estimated from the within-subject scatter of the features after removing a linear age trend:
:math:`\\tilde\\Omega = \\sum_i\\sum_j (\\tilde U_{ij} - \\bar U_i)(\\tilde U_{ij} - \\bar U_i)^T / \\sum_i (n_i - 1)`.

**Requires**: `numpy`_, `pandas`_.

.. _numpy: https://numpy.org
.. _pandas: https://pandas.pydata.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .ADMM import SolverConfig, select_lambda
from .CorrectedLoss import Dataset, check_covariance, guarded_exp
from .Errors import DimensionMismatch, InsufficientReplicates, InvalidInput
from .Inference import TestKind, coefficient_screen
from .Penalties import PenaltyFamily

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
RESPONSE = "y"
ZERO_OMEGA = "zero"
SCALED_PREFIX = "scaled:"

PathLike = Union[str, os.PathLike]


def _read_csv(path: PathLike, **kwargs) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", **kwargs)


def read_matrix(path: PathLike) -> np.ndarray:
    """
    A headerless numeric CSV as a float matrix.
    """
    frame = _read_csv(path, header=None)
    try:
        return frame.to_numpy(dtype=float)
    except ValueError:
        raise InvalidInput(f"{path} is not a numeric matrix") from None


def write_matrix(path: PathLike, matrix) -> None:
    pd.DataFrame(np.atleast_2d(np.asarray(matrix, dtype=float))).to_csv(
        path, header=False, index=False, float_format=FLOAT_FORMAT
    )


def read_design(path: PathLike, response: Optional[str] = RESPONSE) -> Tuple[pd.DataFrame, Optional[np.ndarray]]:
    """
    Read a data CSV.

    :param path: File name.
    :param response: Name of the response column; None, or a name not in the file, means prediction data without
        a response.
    :return: The covariates (all other columns, in file order) and the response (or None).
    """
    frame = _read_csv(path)
    Y = None
    if response is not None and response in frame.columns:
        Y = frame[response].to_numpy(dtype=float)
        frame = frame.drop(columns=[response])
    non_numeric = [c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise InvalidInput(f"non numeric covariate columns in {path}: {non_numeric}")
    return frame.astype(float), Y


def read_omega(source: str, p: int, base_dir: Optional[PathLike] = None) -> np.ndarray:
    """
    Resolve an Ω argument: :code:`zero`, :code:`scaled:<c>:<path>` or a path to a headerless CSV.
    """
    if source == ZERO_OMEGA:
        return np.zeros((p, p))
    scale = 1.0
    if source.startswith(SCALED_PREFIX):
        try:
            _, factor, source = source.split(":", 2)
            scale = float(factor)
        except ValueError:
            raise InvalidInput(f"malformed scaled covariance {source!r}; use scaled:<c>:<file>") from None
    if base_dir is not None and not os.path.isabs(source):
        source = os.path.join(base_dir, source)
    return check_covariance(scale * read_matrix(source), p)


def load_dataset(
    path: PathLike, omega: str = ZERO_OMEGA, response: str = RESPONSE
) -> Tuple[Dataset, List[str]]:
    """
    Read a data CSV and its Ω into a :class:`.CorrectedLoss.Dataset`; also returns the covariate names.
    """
    frame, Y = read_design(path, response)
    if Y is None:
        raise InvalidInput(f"{path} has no response column {response!r}")
    return Dataset(frame.to_numpy(), Y, read_omega(omega, frame.shape[1])), [str(c) for c in frame.columns]


def write_dataset(path: PathLike, data: Dataset, names: Optional[Sequence[str]] = None, response: str = RESPONSE):
    """
    Write the covariates and the response of a dataset (Ω is written separately with :func:`write_matrix`).
    """
    names = [f"w{j + 1}" for j in range(data.p)] if names is None else list(names)
    if len(names) != data.p:
        raise DimensionMismatch(f"{len(names)} column names for {data.p} covariates")
    frame = pd.DataFrame(data.W, columns=names)
    frame[response] = data.Y
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


######################################################################################################
# Preprocessing


def center_columns(frame: pd.DataFrame) -> pd.DataFrame:
    return frame - frame.mean()


def scale_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Divide every column by its standard deviation; constant columns are left alone.
    """
    sd = frame.std(ddof=1).replace(0.0, 1.0).fillna(1.0)
    return frame / sd


def ratio_to_reference(frame: pd.DataFrame, reference: str) -> pd.DataFrame:
    """
    Divide every column by a reference column, which is dropped (uptake ratios relative to a reference region).
    """
    if reference not in frame.columns:
        raise InvalidInput(f"reference column {reference!r} not found")
    denominator = frame[reference]
    if (denominator == 0).any():
        raise InvalidInput(f"reference column {reference!r} has zeros")
    return frame.drop(columns=[reference]).div(denominator, axis=0)


######################################################################################################
# Repeated measurements


@dataclass(frozen=True, eq=False)
class LongitudinalPanel:
    """
    Repeated measurements of the error prone features.

    :var subject: Subject identifier per row.
    :var visit: Visit index per row.
    :var features: Rows are subject visits.
    :var age: Age per row, the regressor of the detrending; None skips the detrending.
    :var names: Feature names.
    """

    subject: np.ndarray
    visit: np.ndarray
    features: np.ndarray
    age: Optional[np.ndarray] = None
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise DimensionMismatch(f"panel features must be a matrix, got shape {features.shape}")
        rows = features.shape[0]
        for name in ("subject", "visit") + (("age",) if self.age is not None else ()):
            if np.asarray(getattr(self, name)).shape != (rows,):
                raise DimensionMismatch(f"panel column {name} must have {rows} entries")
        if not np.all(np.isfinite(features)):
            raise InvalidInput("panel features have non finite entries")
        object.__setattr__(self, "features", features)

    def replicate_counts(self) -> pd.Series:
        return pd.Series(self.subject).value_counts()


def read_panel(
    path: PathLike, subject: str = "subject", visit: str = "visit", age: Optional[str] = "age"
) -> LongitudinalPanel:
    """
    Read a panel CSV; every column other than the subject, visit and age columns is a feature.
    """
    frame = _read_csv(path)
    for column in (subject, visit):
        if column not in frame.columns:
            raise InvalidInput(f"panel {path} has no {column!r} column")
    age_values = None
    if age is not None and age in frame.columns:
        age_values = frame[age].to_numpy(dtype=float)
    features = frame.drop(columns=[c for c in (subject, visit, age) if c in frame.columns])
    return LongitudinalPanel(
        subject=frame[subject].to_numpy(),
        visit=frame[visit].to_numpy(),
        features=features.to_numpy(dtype=float),
        age=age_values,
        names=tuple(str(c) for c in features.columns),
    )


def detrend(panel: LongitudinalPanel) -> np.ndarray:
    """
    Residuals of the per-feature least squares regression on age (with intercept); the features as they are if the
    panel has no age.
    """
    if panel.age is None:
        return panel.features.copy()
    design = np.column_stack([np.ones_like(panel.age), panel.age])
    coefficients = np.linalg.lstsq(design, panel.features, rcond=None)[0]
    return panel.features - design @ coefficients


def estimate_omega(
    panel: LongitudinalPanel, p: Optional[int] = None, error_free: Sequence[int] = ()
) -> np.ndarray:
    """
    Pooled within-subject covariance of the detrended features.

    :param panel: The repeated measurements.
    :param p: If given, embed the estimate in a p x p matrix (see :func:`embed_omega`).
    :param error_free: 0-based indices of the error free covariates of the embedding.
    :return: Exactly symmetric, positive semi-definite matrix.
    :raises InsufficientReplicates: No subject has two or more visits.
    """
    residuals = detrend(panel)
    frame = pd.DataFrame(residuals)
    groups = frame.groupby(pd.Series(panel.subject), sort=False)
    denominator = int(np.sum(groups.size().to_numpy() - 1))
    if denominator < 1:
        raise InsufficientReplicates("no subject has two or more visits; the error covariance cannot be estimated")
    deviations = (frame - groups.transform("mean")).to_numpy()
    omega = deviations.T @ deviations / denominator
    omega = (omega + omega.T) / 2.0
    logger.info(
        "error covariance of %d features from %d subjects (%d degrees of freedom)",
        omega.shape[0],
        groups.ngroups,
        denominator,
    )
    if p is not None:
        omega = embed_omega(omega, p, error_free)
    return omega


def embed_omega(omega, p: int, error_free: Sequence[int]) -> np.ndarray:
    """
    Place a q x q error covariance into a p x p one, with zero rows and columns at the error free positions.
    """
    omega = np.asarray(omega, dtype=float)
    error_free = sorted(set(int(j) for j in error_free))
    if any(j < 0 or j >= p for j in error_free):
        raise InvalidInput(f"error free indices out of range for p={p}: {error_free}")
    noisy = [j for j in range(p) if j not in error_free]
    if omega.shape != (len(noisy), len(noisy)):
        raise DimensionMismatch(f"covariance of shape {omega.shape} does not fit {len(noisy)} error prone covariates")
    full = np.zeros((p, p))
    full[np.ix_(noisy, noisy)] = omega
    return full


######################################################################################################
# Prediction


def predict(beta, W_new, omega, half: bool = True) -> np.ndarray:
    """
    Predicted counts :math:`\\exp(\\hat\\beta^T W_i - \\hat\\beta^T\\Omega\\hat\\beta/2)`.

    :param half: With False the quadratic term is not halved, :math:`\\exp(\\hat\\beta^T W_i -
        \\hat\\beta^T\\Omega\\hat\\beta)`.
    """
    beta = np.asarray(beta, dtype=float)
    W_new = np.atleast_2d(np.asarray(W_new, dtype=float))
    omega = np.asarray(omega, dtype=float)
    p = beta.shape[0]
    if W_new.shape[1] != p or omega.shape != (p, p):
        raise DimensionMismatch(
            f"coefficients of length {p} against covariates {W_new.shape} and covariance {omega.shape}"
        )
    quad = float(beta @ omega @ beta)
    return guarded_exp(W_new @ beta - (quad / 2.0 if half else quad))


def prediction_error(Y, Y_hat) -> float:
    """
    :math:`\\sum_i |Y_i - \\hat Y_i| / |Y_i|`; observations with :math:`Y_i = 0` are left out.
    """
    Y = np.asarray(Y, dtype=float)
    Y_hat = np.asarray(Y_hat, dtype=float)
    if Y.shape != Y_hat.shape:
        raise DimensionMismatch(f"responses {Y.shape} and predictions {Y_hat.shape} differ")
    keep = Y != 0
    if not np.all(keep):
        logger.info("%d zero responses left out of the prediction error", int(np.sum(~keep)))
    return float(np.sum(np.abs(Y[keep] - Y_hat[keep]) / np.abs(Y[keep])))


def _fold_prediction(train: Dataset, test: Dataset, kind, family, grid, config, shape, half, alpha) -> np.ndarray:
    selected = np.arange(train.p)
    if kind is not None:
        screen = coefficient_screen(train, kind=kind, family=family, grid=grid, config=config, shape=shape)
        selected = np.array([j for j, res in zip(screen.indices, screen.results) if res.p_value < alpha], dtype=int)
    if selected.size == 0:
        return np.ones(test.n)
    fit = select_lambda(train.select_columns(selected), family, grid, None, False, config, shape)
    return predict(fit.beta, test.W[:, selected], test.omega[np.ix_(selected, selected)], half)


def cross_validated_error(
    data: Dataset,
    family: Union[str, PenaltyFamily] = PenaltyFamily.SCAD,
    folds: int = 5,
    seed: int = 0,
    kind: Optional[Union[str, TestKind]] = None,
    grid: Optional[Sequence[float]] = None,
    config: Optional[SolverConfig] = None,
    shape: Optional[float] = None,
    half: bool = True,
    alpha: float = 0.05,
) -> List[float]:
    """
    K-fold prediction error of the corrected estimator.

    In every fold the covariates are optionally screened first (:code:`kind` = wald or score keeps those with p-value
    below :code:`alpha`), the fully penalized program is fitted on the training part with the retained covariates, and
    :func:`prediction_error` is computed on the held-out part.

    :return: One error per fold.
    """
    if not 2 <= folds <= data.n:
        raise InvalidInput(f"number of folds must be between 2 and n={data.n}, got {folds}")
    config = config or SolverConfig()
    rng = np.random.default_rng(seed)
    parts = np.array_split(rng.permutation(data.n), folds)
    errors = []
    for k, held_out in enumerate(parts):
        training = np.setdiff1d(np.arange(data.n), held_out)
        train, test = data.subset(training), data.subset(held_out)
        Y_hat = _fold_prediction(train, test, kind, family, grid, config, shape, half, alpha)
        errors.append(prediction_error(test.Y, Y_hat))
        logger.info("fold %d/%d: prediction error %.6g", k + 1, folds, errors[-1])
    return errors
