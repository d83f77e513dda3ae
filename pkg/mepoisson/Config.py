# -*- coding: utf-8 -*-
#
"""
Configuration files and logging setup.

A configuration file is JSON (:code:`.json`) or TOML (anything else) with flat keys; the recognized keys are the fields
of :class:`.ADMM.SolverConfig` plus :code:`penalty`, :code:`shape` and :code:`lambda_grid`::

    rho = 2.0
    t_max = 500
    penalty = "mcp"
    lambda_grid = "0.05:1.5:30"

Command line options override the file, the file overrides the defaults.

**Requires**: `tomli`_ on Python < 3.11.

.. _tomli: https://pypi.org/project/tomli/

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import json
import logging
import sys
from dataclasses import fields
from typing import Any, Mapping, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ADMM import SolverConfig, default_lambda_grid
from .Errors import InvalidInput
from .Penalties import PenaltyFamily

SOLVER_KEYS = tuple(f.name for f in fields(SolverConfig))
EXTRA_KEYS = ("penalty", "shape", "lambda_grid")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def load_config(path: Optional[str]) -> dict:
    """
    Read a JSON or TOML configuration file; None gives an empty mapping.
    """
    if path is None:
        return {}
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as stream:
                content = json.load(stream)
        else:
            with open(path, "rb") as stream:
                content = tomllib.load(stream)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise InvalidInput(f"cannot parse configuration {path}: {e}") from None
    if not isinstance(content, dict):
        raise InvalidInput(f"configuration {path} must hold a table of settings")
    return content


def parse_lambda_grid(text) -> np.ndarray:
    """
    A λ grid from its text form: :code:`default`, :code:`start:stop:num` (log-equally spaced, both ends included) or a
    comma separated list. Lists of numbers are taken as they are.
    """
    if text is None or (isinstance(text, str) and text.strip() == "default"):
        return default_lambda_grid()
    try:
        if isinstance(text, str) and ":" in text:
            start, stop, num = text.split(":")
            start, stop, num = float(start), float(stop), int(num)
            if not (start > 0 and stop > 0 and num >= 1):
                raise ValueError
            return np.exp(np.linspace(np.log(start), np.log(stop), num))
        values = text.split(",") if isinstance(text, str) else text
        grid = np.array([float(v) for v in values])
    except ValueError:
        raise InvalidInput(f"malformed lambda grid {text!r}") from None
    if grid.size == 0 or np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise InvalidInput(f"lambda grid values must be positive and finite: {text!r}")
    return grid


def solver_config_from(mapping: Mapping[str, Any], **overrides) -> Tuple[SolverConfig, dict]:
    """
    Split a settings mapping into a :class:`.ADMM.SolverConfig` and the penalty settings.

    :param mapping: Settings, typically from :func:`load_config`.
    :param overrides: Settings that win over the mapping; None values are ignored.
    :return: The solver configuration and a dictionary with :code:`family`, :code:`shape` and :code:`grid`.
    :raises InvalidInput: Unknown keys or invalid values.
    """
    merged = dict(mapping)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - set(SOLVER_KEYS) - set(EXTRA_KEYS))
    if unknown:
        raise InvalidInput(f"unknown configuration keys: {', '.join(unknown)}")
    solver = {k: merged[k] for k in SOLVER_KEYS if k in merged}
    try:
        config = SolverConfig(**solver)
    except TypeError as e:
        raise InvalidInput(str(e)) from None
    penalty = {
        "family": PenaltyFamily.from_name(merged.get("penalty", "scad")),
        "shape": None if merged.get("shape") is None else float(merged["shape"]),
        "grid": parse_lambda_grid(merged.get("lambda_grid")),
    }
    return config, penalty


def setup_logging(verbosity: int = 0, stream=None) -> None:
    """
    Route the package loggers to stderr: warnings only by default, info with one :code:`-v`, debug with two.
    """
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=stream or sys.stderr, force=True)
    logging.captureWarnings(True)
