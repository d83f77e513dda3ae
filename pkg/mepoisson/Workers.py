# -*- coding: utf-8 -*-
#
"""
Process pool used to spread Monte Carlo replications and coefficient screens over cores.

The number of workers is capped by the :code:`NP_THREADS` environment variable. Results always come back in input
order, so the outcome of a run does not depend on the number of workers.

**License**: This software is available for use under the `W3C Software License`_.

.. _W3C Software License: http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231

**Author**: mepoisson developers

"""

__author__ = "mepoisson developers"
__license__ = "W3C® SOFTWARE NOTICE AND LICENSE, http://www.w3.org/Consortium/Legal/2002/copyright-software-20021231"

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional

from .Errors import InvalidInput

logger = logging.getLogger(__name__)

THREADS_VARIABLE = "NP_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """
    Number of worker processes: :code:`requested` if given, else :code:`NP_THREADS`, else the CPU count.
    """
    if requested is not None:
        if requested < 1:
            raise InvalidInput(f"number of workers must be positive, got {requested}")
        return requested
    value = os.environ.get(THREADS_VARIABLE)
    if value:
        try:
            count = int(value)
        except ValueError:
            raise InvalidInput(f"{THREADS_VARIABLE} must be an integer, got {value!r}") from None
        if count < 1:
            raise InvalidInput(f"{THREADS_VARIABLE} must be positive, got {count}")
        return count
    return os.cpu_count() or 1


def parallel_map(function: Callable, items: Iterable, workers: Optional[int] = None) -> List:
    """
    :code:`[function(item) for item in items]`, evaluated in a process pool when more than one worker is available.
    The function and the items must be picklable.
    """
    items = list(items)
    workers = min(worker_count(workers), max(len(items), 1))
    if workers == 1:
        return [function(item) for item in items]
    logger.info("dispatching %d tasks to %d worker processes", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items))
