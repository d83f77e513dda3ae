# -*- coding: utf-8 -*-
#
"""
The table of null hypotheses of the simulation battery, and the coefficient vectors they are evaluated at.

The true coefficients are :math:`(0.75, -0.75 + h_2, h_3, 0, \\ldots, 0, h_p)`. Each hypothesis moves exactly one of
:math:`h_2, h_3, h_p` (the others stay 0), so :math:`h = 0` is the null and :math:`h \\ne 0` an alternative. Indices
in the table are 1-based; :data:`LAST` stands for :math:`p`.

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from .Constraints import HypothesisSpec
from .Errors import InvalidInput

LAST = -1

H_GRID = (0.0, 0.1, 0.2, 0.4)
SUM_H_GRID = (0.0, 0.2, 0.4, 0.8)


class HypothesisId(Enum):
    H01 = "h01"
    H02 = "h02"
    H03 = "h03"
    H04 = "h04"
    H05 = "h05"
    H06 = "h06"
    H07 = "h07"
    H08 = "h08"
    H09 = "h09"
    H10 = "h10"

    @classmethod
    def from_name(cls, name: Union[str, "HypothesisId"]) -> "HypothesisId":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidInput(f"unknown hypothesis {name!r}; use h01 ... h10") from None


@dataclass(frozen=True)
class HypothesisTemplate:
    """
    :var indices: 1-based tested indices, :data:`LAST` for p.
    :var coefficients: One row of C.
    :var target: t.
    :var varied: Which of :code:`"h2"`, :code:`"h3"`, :code:`"hp"` moves the truth away from the null.
    :var h_grid: Values of h reported for this hypothesis.
    """

    description: str
    indices: Tuple[int, ...]
    coefficients: Tuple[float, ...]
    target: float
    varied: str
    h_grid: Tuple[float, ...] = H_GRID


HYPOTHESES = {
    HypothesisId.H01: HypothesisTemplate("beta_2 = -0.75", (2,), (1.0,), -0.75, "h2"),
    HypothesisId.H02: HypothesisTemplate("beta_3 = 0", (3,), (1.0,), 0.0, "h3"),
    HypothesisId.H03: HypothesisTemplate("beta_p = 0", (LAST,), (1.0,), 0.0, "hp"),
    HypothesisId.H04: HypothesisTemplate("beta_1 + beta_2 = 0", (1, 2), (1.0, 1.0), 0.0, "h2"),
    HypothesisId.H05: HypothesisTemplate("beta_3 + beta_4 = 0", (3, 4), (1.0, 1.0), 0.0, "h3"),
    HypothesisId.H06: HypothesisTemplate("beta_1 + beta_p = 0.75", (1, LAST), (1.0, 1.0), 0.75, "hp"),
    HypothesisId.H07: HypothesisTemplate("beta_2 + beta_3 = -0.75", (2, 3), (1.0, 1.0), -0.75, "h3"),
    HypothesisId.H08: HypothesisTemplate(
        "sum_{j<=4} beta_j = 0", tuple(range(1, 5)), (1.0,) * 4, 0.0, "h3", SUM_H_GRID
    ),
    HypothesisId.H09: HypothesisTemplate(
        "sum_{j<=8} beta_j = 0", tuple(range(1, 9)), (1.0,) * 8, 0.0, "h3", SUM_H_GRID
    ),
    HypothesisId.H10: HypothesisTemplate(
        "sum_{j<=12} beta_j = 0", tuple(range(1, 13)), (1.0,) * 12, 0.0, "h3", SUM_H_GRID
    ),
}


def template(hypothesis: Union[str, HypothesisId]) -> HypothesisTemplate:
    return HYPOTHESES[HypothesisId.from_name(hypothesis)]


def build_hypothesis(hypothesis: Union[str, HypothesisId], p: int) -> HypothesisSpec:
    """
    The :class:`.Constraints.HypothesisSpec` of a battery hypothesis for p covariates.
    """
    tpl = template(hypothesis)
    indices = [p if i == LAST else i for i in tpl.indices]
    if max(indices) > p or len(set(indices)) != len(indices):
        raise InvalidInput(f"{HypothesisId.from_name(hypothesis).name} needs more than p={p} covariates")
    return HypothesisSpec(np.array([tpl.coefficients]), np.array([tpl.target]), tuple(i - 1 for i in indices))


def h_vector(hypothesis: Union[str, HypothesisId], h: float) -> Tuple[float, float, float]:
    """
    :math:`(h_2, h_3, h_p)` for a deviation h of the hypothesis; the untouched entries are 0.
    """
    varied = template(hypothesis).varied
    return tuple(h if name == varied else 0.0 for name in ("h2", "h3", "hp"))


def true_beta(p: int, h2: float = 0.0, h3: float = 0.0, hp: float = 0.0) -> np.ndarray:
    """
    :math:`(0.75, -0.75 + h_2, h_3, 0, \\ldots, 0, h_p)`, length p (at least 4).
    """
    if p < 4:
        raise InvalidInput(f"the simulation coefficients need p >= 4, got {p}")
    beta = np.zeros(p)
    beta[0], beta[1], beta[2] = 0.75, -0.75 + h2, h3
    beta[-1] = hp
    return beta
