# -*- coding: utf-8 -*-
#
"""
Folded concave penalties: SCAD and MCP.

Both are amenable penalties: :math:`\\rho_\\lambda(0) = 0`, symmetric, nondecreasing and subadditive on the positive
axis, with derivative :math:`\\lambda` at :math:`0^+`, flat beyond :code:`shape * lam`, and weakly convex, ie,
:math:`\\rho_\\lambda(t) + \\mu t^2/2` is convex for the constant :attr:`Penalty.mu`.

The classes share the same interface (:meth:`Penalty.rho`, :meth:`Penalty.rho_prime`, :meth:`Penalty.q_lambda`,
:meth:`Penalty.prox`), all vectorized over numpy arrays; a scalar in gives a float out. A concrete penalty is a
frozen value object; :meth:`Penalty.with_lambda` gives the same family and shape at another level, which is how the
λ grid of the solver is walked.

The proximal operator solves :math:`\\arg\\min_\\theta \\rho_\\lambda(\\theta) + (w/2)(\\theta - z)^2` in closed form.
It is only defined for :math:`w > \\mu`; below that the scalar problem is not convex and
:class:`.Errors.NonConvexProx` is raised.

**Requires**: `numpy`_.

.. _numpy: https://numpy.org

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from .Errors import InvalidInput, NonConvexProx

ArrayOrFloat = Union[float, np.ndarray]


class PenaltyFamily(Enum):
    SCAD = "scad"
    MCP = "mcp"

    @classmethod
    def from_name(cls, name: Union[str, "PenaltyFamily"]) -> "PenaltyFamily":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidInput(f"unknown penalty family {name!r}; use one of {[f.value for f in cls]}") from None


def _out(value: np.ndarray, t) -> ArrayOrFloat:
    return float(value) if np.ndim(t) == 0 else value


######################################################################################################
@dataclass(frozen=True)
class Penalty:
    """
    Common superclass of the penalty families; it cannot be used by itself, the piecewise forms
    (:meth:`_rho_abs`, :meth:`_rho_prime_abs`, :meth:`_prox_abs`) and :attr:`mu` are defined in the subclasses.

    :param lam: Regularization level λ, positive.
    :type lam: float

    :param shape: Shape parameter (:code:`a` for SCAD, :code:`γ` for MCP). Uses the family default if None.
    :type shape: float
    """

    lam: float
    shape: Optional[float] = None

    family = None
    default_shape = None
    min_shape = None

    def __post_init__(self):
        if self.shape is None:
            object.__setattr__(self, "shape", float(self.default_shape))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "shape", float(self.shape))
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInput(f"penalty level must be positive, got {self.lam}")
        if not (np.isfinite(self.shape) and self.shape > self.min_shape):
            raise InvalidInput(
                f"{self.family.name} shape must exceed {self.min_shape}, got {self.shape}"
            )

    @property
    def mu(self) -> float:
        """
        Weak convexity constant: :math:`\\rho_\\lambda(t) + \\mu t^2/2` is convex.
        """
        raise Exception("This property should not be called directly; subclasses should override it")

    def with_lambda(self, lam: float) -> "Penalty":
        return replace(self, lam=lam)

    def _rho_abs(self, s: np.ndarray) -> np.ndarray:
        raise Exception("This method should not be called directly; subclasses should override it")

    def _rho_prime_abs(self, s: np.ndarray) -> np.ndarray:
        raise Exception("This method should not be called directly; subclasses should override it")

    def _prox_abs(self, s: np.ndarray, weight: float) -> np.ndarray:
        raise Exception("This method should not be called directly; subclasses should override it")

    def rho(self, t) -> ArrayOrFloat:
        """
        Penalty value :math:`\\rho_\\lambda(t)`.
        """
        return _out(self._rho_abs(np.abs(np.asarray(t, dtype=float))), t)

    def rho_prime(self, t) -> ArrayOrFloat:
        """
        Derivative :math:`\\rho'_\\lambda(t)`. At :math:`t = 0` the subdifferential is :math:`[-\\lambda, \\lambda]`;
        the right limit :math:`\\lambda` is returned.
        """
        arr = np.asarray(t, dtype=float)
        value = np.where(arr == 0, self.lam, np.sign(arr) * self._rho_prime_abs(np.abs(arr)))
        return _out(value, t)

    def q_lambda(self, t) -> ArrayOrFloat:
        """
        Auxiliary concave remainder :math:`q_\\lambda(t) = \\lambda|t| - \\rho_\\lambda(t)`.
        """
        arr = np.asarray(t, dtype=float)
        return _out(self.lam * np.abs(arr) - self._rho_abs(np.abs(arr)), t)

    def prox(self, z, weight: float) -> ArrayOrFloat:
        """
        Proximal operator, :math:`\\arg\\min_\\theta \\rho_\\lambda(\\theta) + (w/2)(\\theta - z)^2`, elementwise.

        :param z: Point(s) to be mapped.
        :type z: float or numpy.ndarray

        :param weight: Quadratic weight :math:`w`, must exceed :attr:`mu`.
        :type weight: float

        :return: The global minimizer(s), with the sign of :code:`z`.
        """
        if not weight > self.mu:
            raise NonConvexProx(
                f"prox weight {weight} must exceed the weak convexity constant {self.mu:.6g} of "
                f"{self.family.name}(shape={self.shape})"
            )
        arr = np.asarray(z, dtype=float)
        return _out(np.sign(arr) * self._prox_abs(np.abs(arr), float(weight)), z)

    def describe(self) -> dict:
        return {"family": self.family.value, "lambda": self.lam, "shape": self.shape}


# noinspection PyPep8Naming
@dataclass(frozen=True)
class SCAD_Penalty(Penalty):
    """
    Smoothly clipped absolute deviation: linear up to λ, quadratic blend up to :code:`a*λ`, constant
    :math:`(a+1)\\lambda^2/2` beyond. :math:`\\mu = 1/(a-1)`.
    """

    family = PenaltyFamily.SCAD
    default_shape = 3.7
    min_shape = 2.0

    @property
    def mu(self) -> float:
        return 1.0 / (self.shape - 1.0)

    def _rho_abs(self, s):
        lam, a = self.lam, self.shape
        return np.where(
            s <= lam,
            lam * s,
            np.where(
                s <= a * lam,
                (2 * a * lam * s - s**2 - lam**2) / (2 * (a - 1)),
                (a + 1) * lam**2 / 2,
            ),
        )

    def _rho_prime_abs(self, s):
        lam, a = self.lam, self.shape
        return np.where(s <= lam, lam, np.where(s <= a * lam, (a * lam - s) / (a - 1), 0.0))

    def _prox_abs(self, s, weight):
        lam, a = self.lam, self.shape
        middle = (weight * (a - 1) * s - a * lam) / (weight * (a - 1) - 1)
        return np.where(
            s <= lam / weight,
            0.0,
            np.where(
                s <= lam * (1 + 1 / weight),
                s - lam / weight,
                np.where(s <= a * lam, middle, s),
            ),
        )


# noinspection PyPep8Naming
@dataclass(frozen=True)
class MCP_Penalty(Penalty):
    """
    Minimax concave penalty: :math:`\\lambda|t| - t^2/(2\\gamma)` up to :code:`γ*λ`, constant
    :math:`\\gamma\\lambda^2/2` beyond. :math:`\\mu = 1/\\gamma`.
    """

    family = PenaltyFamily.MCP
    default_shape = 3.0
    min_shape = 1.0

    @property
    def mu(self) -> float:
        return 1.0 / self.shape

    def _rho_abs(self, s):
        lam, g = self.lam, self.shape
        return np.where(s <= g * lam, lam * s - s**2 / (2 * g), g * lam**2 / 2)

    def _rho_prime_abs(self, s):
        lam, g = self.lam, self.shape
        return np.where(s <= g * lam, lam - s / g, 0.0)

    def _prox_abs(self, s, weight):
        lam, g = self.lam, self.shape
        return np.where(
            s <= lam / weight,
            0.0,
            np.where(s <= g * lam, g * (weight * s - lam) / (g * weight - 1), s),
        )


def return_penalty_class(family: Union[str, PenaltyFamily]):
    """
    Return the penalty class for a family (name or :class:`PenaltyFamily`).

    :rtype: subclass of :class:`Penalty`
    """
    family = PenaltyFamily.from_name(family)
    if family is PenaltyFamily.SCAD:
        return SCAD_Penalty
    else:
        return MCP_Penalty


def make_penalty(family: Union[str, PenaltyFamily], lam: float, shape: Optional[float] = None) -> Penalty:
    """
    Build a penalty from its family, level and (optional) shape.
    """
    return return_penalty_class(family)(lam, shape)
