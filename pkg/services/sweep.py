# -*- coding: utf-8 -*-
"""
Worker pool for k-point sweeps

Pool.map returns results in input order, so reductions done afterwards
are identical for any number of workers.
"""

from __future__ import annotations

import logging
from multiprocessing import Pool

logger = logging.getLogger(__name__)


class WorkerPool:
    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        self.threads = threads
        self._pool = None

    def __enter__(self) -> "WorkerPool":
        if self.threads > 1:
            self._pool = Pool(processes=self.threads)
            logger.info("[Sweep] started %s workers", self.threads)
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None
        return False

    def map(self, func, items) -> list:
        items = list(items)
        if self._pool is None or len(items) < 2:
            return [func(x) for x in items]
        chunk = max(1, len(items) // (4 * self.threads))
        return self._pool.map(func, items, chunksize=chunk)
