# -*- coding: utf-8 -*-
#
"""
Geometry of the feasible region and of the linear hypotheses.

The estimators live in :math:`\\{\\beta : \\|\\beta\\|_1 \\le R_1, \\|\\beta\\|_2 \\le R_2\\}` (a :class:`FeasibleSet`),
the null hypotheses are linear equalities :math:`C\\beta_M = t` on a tested block :math:`M` (a
:class:`HypothesisSpec`). The module provides the two ball projections used in every ADMM iteration, the projection on
the affine null set, and the alternating projection that reconciles the three at the end of a constrained fit.

Index sets are 0-based in the Python API. The JSON form of a hypothesis, read and written by the command line,
uses 1-based indices (:meth:`HypothesisSpec.from_json`, :meth:`HypothesisSpec.to_json`).

**Requires**: `numpy`_, `scipy`_.

.. _numpy: https://numpy.org
.. _scipy: https://scipy.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import json
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .Errors import DimensionMismatch, InvalidInput

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HypothesisSpec:
    """
    Linear null hypothesis :math:`C\\beta_M = t`.

    :param C: Constraint matrix, r x m, full row rank.
    :type C: numpy.ndarray

    :param t: Target vector, length r.
    :type t: numpy.ndarray

    :param M: Tested indices (0-based), m distinct entries. They are sorted on construction, the columns of C are
        permuted along.
    :type M: sequence of int
    """

    C: np.ndarray
    t: np.ndarray
    M: tuple

    def __post_init__(self):
        M = np.asarray(self.M, dtype=int).reshape(-1)
        C = np.array(self.C, dtype=float, copy=True)
        t = np.array(self.t, dtype=float, copy=True).reshape(-1)
        if C.ndim == 1:
            C = C.reshape(1, -1) if C.size else C.reshape(0, M.size)
        m = M.size
        if C.ndim != 2 or C.shape[1] != m:
            raise DimensionMismatch(f"C must have {m} columns (one per tested index), got shape {C.shape}")
        if t.shape[0] != C.shape[0]:
            raise DimensionMismatch(f"t must have {C.shape[0]} entries, got {t.shape[0]}")
        if len(set(M.tolist())) != m:
            raise InvalidInput(f"tested indices must be distinct, got {M.tolist()}")
        if np.any(M < 0):
            raise InvalidInput(f"tested indices must be nonnegative, got {M.tolist()}")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(t))):
            raise InvalidInput("C and t must be finite")

        order = np.argsort(M, kind="stable")
        M, C = M[order], C[:, order]

        r = C.shape[0]
        if r > m:
            raise InvalidInput(f"C has {r} rows but only {m} tested indices; it cannot have full row rank")
        if r > 0:
            # pivoted QR of Cᵀ reveals the row rank of C
            R = scipy.linalg.qr(C.T, mode="r", pivoting=True)[0]
            diag = np.abs(np.diag(R))
            rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1.0)))
            if rank < r:
                raise InvalidInput(f"C must have full row rank {r}, numerical rank is {rank}")

        object.__setattr__(self, "C", _readonly(C))
        object.__setattr__(self, "t", _readonly(t))
        object.__setattr__(self, "M", tuple(int(i) for i in M))

    @property
    def r(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return len(self.M)

    @classmethod
    def empty(cls) -> "HypothesisSpec":
        """
        No tested block and no constraint: the fully penalized program.
        """
        return cls(np.zeros((0, 0)), np.zeros(0), ())

    def validate(self, p: int) -> "HypothesisSpec":
        """
        Check the indices against the number of covariates; returns self for chaining.
        """
        if self.M and self.M[-1] >= p:
            raise InvalidInput(f"tested index {self.M[-1]} out of range for p={p}")
        return self

    def complement(self, p: int) -> np.ndarray:
        """
        The untested (penalized) indices, sorted.
        """
        mask = np.ones(p, dtype=bool)
        mask[list(self.M)] = False
        return np.flatnonzero(mask)

    @classmethod
    def from_json(cls, source: Union[str, dict]) -> "HypothesisSpec":
        """
        Build from :code:`{"C": [[...]], "t": [...], "M": [...]}` with 1-based indices in M. A single constraint may be
        given as a flat list for C and a number for t.
        """
        obj = json.loads(source) if isinstance(source, str) else source
        try:
            C, t, M = obj["C"], obj["t"], obj["M"]
        except (KeyError, TypeError):
            raise InvalidInput('a hypothesis needs the keys "C", "t" and "M"') from None
        M = np.asarray(M, dtype=int).reshape(-1)
        if np.any(M < 1):
            raise InvalidInput(f"hypothesis indices are 1-based, got {M.tolist()}")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return cls(np.asarray(C, dtype=float), t, tuple(M - 1))

    def to_json(self) -> dict:
        return {"C": self.C.tolist(), "t": self.t.tolist(), "M": [i + 1 for i in self.M]}


@dataclass(frozen=True)
class FeasibleSet:
    """
    Radii of the L1 and L2 balls.

    :param R1: L1 radius, positive.
    :param R2: L2 radius, positive.
    """

    R1: float
    R2: float

    def __post_init__(self):
        for name in ("R1", "R2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInput(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, float(value))

    def contains(self, beta, slack: float = 1e-8) -> bool:
        return bool(np.sum(np.abs(beta)) <= self.R1 + slack and np.linalg.norm(beta) <= self.R2 + slack)

    def on_boundary(self, beta, rtol: float = 1e-6) -> bool:
        """
        Whether :code:`beta` touches one of the balls (relative tolerance on each radius).
        """
        return bool(
            np.sum(np.abs(beta)) >= self.R1 * (1 - rtol) or np.linalg.norm(beta) >= self.R2 * (1 - rtol)
        )

    def project(self, v) -> np.ndarray:
        """
        L1 projection then L2 shrink, as in every ADMM iteration.
        """
        return shrink_l2(project_l1(v, self.R1), self.R2)


def project_l1(v, R1: float) -> np.ndarray:
    """
    Euclidean projection on the L1 ball of radius R1, by sorting and soft-thresholding.

    :param v: Vector to project.
    :type v: numpy.ndarray

    :param R1: Radius, positive.
    :type R1: float

    :return: :math:`\\arg\\min_{\\|w\\|_1 \\le R_1} \\|w - v\\|_2`, a new array.
    """
    if not R1 > 0:
        raise InvalidInput(f"L1 radius must be positive, got {R1}")
    v = np.array(v, dtype=float, copy=True)
    u = np.abs(v)
    if u.sum() <= R1:
        return v
    # projection of |v| on the simplex of radius R1, signs put back afterwards
    s = np.sort(u)[::-1]
    cssv = np.cumsum(s)
    rho = np.nonzero(s * np.arange(1, s.size + 1) > (cssv - R1))[0][-1]
    theta = (cssv[rho] - R1) / (rho + 1.0)
    return np.sign(v) * np.clip(u - theta, 0.0, None)


def shrink_l2(v, R2: float) -> np.ndarray:
    """
    Rescale :code:`v` onto the L2 ball of radius R2 if it is outside; identity inside.
    """
    if not R2 > 0:
        raise InvalidInput(f"L2 radius must be positive, got {R2}")
    v = np.array(v, dtype=float, copy=True)
    norm = np.linalg.norm(v)
    if norm <= R2:
        return v
    return v * (R2 / norm)


def constraint_residual(spec: HypothesisSpec, beta) -> float:
    """
    :math:`\\|C\\beta_M - t\\|_\\infty`; zero for a hypothesis without constraints.
    """
    beta = np.asarray(beta, dtype=float)
    if spec.M and (beta.ndim != 1 or beta.shape[0] <= spec.M[-1]):
        raise DimensionMismatch(
            f"coefficient vector of shape {beta.shape} does not cover tested index {spec.M[-1]}"
        )
    if spec.r == 0:
        return 0.0
    return float(np.max(np.abs(spec.C @ beta[list(spec.M)] - spec.t)))


def project_affine(spec: HypothesisSpec, beta) -> np.ndarray:
    """
    Euclidean projection on :math:`\\{\\beta : C\\beta_M = t\\}`; only the tested block moves.
    """
    beta = np.array(beta, dtype=float, copy=True)
    if spec.r == 0:
        return beta
    idx = list(spec.M)
    resid = spec.C @ beta[idx] - spec.t
    beta[idx] -= spec.C.T @ scipy.linalg.solve(spec.C @ spec.C.T, resid, assume_a="pos")
    return beta


def project_feasible(
    spec: HypothesisSpec, beta, radii: FeasibleSet, max_rounds: int = 200, tol: float = 1e-10
) -> np.ndarray:
    """
    Alternating projections between the null set :math:`C\\beta_M = t` and the two balls, ending on the null set.

    Zero entries outside M stay zero (both ball projections preserve zeros). If the three sets do not intersect the
    balls are violated after the last round; this is logged.
    """
    beta = project_affine(spec, beta)
    for _ in range(max_rounds):
        if radii.contains(beta, slack=tol):
            return beta
        beta = project_affine(spec, radii.project(beta))
    if not radii.contains(beta, slack=1e-8):
        logger.warning(
            "null set and norm balls (R1=%.4g, R2=%.4g) barely intersect; constrained fit violates the radii",
            radii.R1,
            radii.R2,
        )
    return beta
