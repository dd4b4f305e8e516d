"""Pure-Python fallback kernels.

Same contracts as the compiled module ``portslot._ckernels``; used when the
extension was not built.  Numerically these must agree exactly with the
compiled versions (same arithmetic, same order of operations).
"""

from __future__ import annotations

import heapq

import numpy as np

BACKEND = "python"


def serve_fifo(arrivals: np.ndarray, services: np.ndarray, n_servers: int):
    """Serve jobs FIFO on ``n_servers`` identical servers.

    ``arrivals`` must be sorted ascending.  Returns (waits, departures) where
    ``waits`` is time spent queueing (excludes service).
    """
    arrivals = np.ascontiguousarray(arrivals, dtype=np.float64)
    services = np.ascontiguousarray(services, dtype=np.float64)
    if arrivals.shape != services.shape:
        raise ValueError("arrivals and services must have equal length")
    if n_servers < 1:
        raise ValueError("n_servers must be >= 1")
    n = arrivals.shape[0]
    waits = np.empty(n, dtype=np.float64)
    departures = np.empty(n, dtype=np.float64)
    free = [0.0] * n_servers
    heapq.heapify(free)
    for i in range(n):
        t_arr = arrivals[i]
        t_free = heapq.heappop(free)
        start = t_arr if t_arr > t_free else t_free
        waits[i] = start - t_arr
        dep = start + services[i]
        departures[i] = dep
        heapq.heappush(free, dep)
    return waits, departures


def nondomination_ranks(objectives: np.ndarray) -> np.ndarray:
    """Front index (0-based) per point for minimization on every column.

    Iterative peeling on the full dominance matrix; O(n^2 m) time and
    O(n^2) memory, fine for the population sizes used here.
    """
    objs = np.asarray(objectives, dtype=np.float64)
    n = objs.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    le = (objs[:, None, :] <= objs[None, :, :]).all(axis=2)
    lt = (objs[:, None, :] < objs[None, :, :]).any(axis=2)
    dominates = le & lt  # dominates[i, j]: i dominates j
    ranks = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    front = 0
    while remaining.any():
        dominated = (dominates & remaining[:, None]).any(axis=0)
        current = remaining & ~dominated
        if not current.any():  # pragma: no cover - cannot happen with strict dominance
            current = remaining.copy()
        ranks[current] = front
        remaining &= ~current
        front += 1
    return ranks
