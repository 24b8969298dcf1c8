"""Non-dominated sorting and crowding distance (minimisation on every objective)."""

from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np

__all__ = ["dominates", "nondominated_sort", "crowding_distance", "BOUNDARY"]

BOUNDARY = math.inf


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when ``a`` is no worse than ``b`` everywhere and better somewhere."""
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def nondominated_sort(objectives) -> List[List[int]]:
    """Partition row indices into Pareto fronts, best front first."""
    F = np.asarray(objectives, dtype=float)
    if F.size == 0:
        return []
    if F.ndim == 1:
        F = F[:, None]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts: List[List[int]] = []
    current = [int(i) for i in np.flatnonzero(counts == 0)]
    while current:
        fronts.append(current)
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = [int(i) for i in np.flatnonzero(counts == 0)]
    return fronts


def crowding_distance(front) -> List[float]:
    """Crowding distance of each point within one front.

    The extreme points of every objective get :data:`BOUNDARY`; interior
    points sum their neighbours' gaps normalised by the objective's range.
    """
    F = np.asarray(front, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    n, m = F.shape
    if n <= 2:
        return [BOUNDARY] * n
    dist = np.zeros(n)
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        dist[order[0]] = dist[order[-1]] = BOUNDARY
        span = col[-1] - col[0]
        if span <= 0 or not np.isfinite(span):
            continue
        gaps = (col[2:] - col[:-2]) / span
        dist[order[1:-1]] += gaps
    return [float(d) for d in dist]
