"""Small geometric helpers: greedy separated subsets via grid hashing."""

from __future__ import annotations

import itertools
from collections import defaultdict

import numpy as np


def greedy_separated(points: np.ndarray, min_dist: float, strict: bool = False, order=None) -> list[int]:
    """Indices of a greedy maximal subset with pairwise distance >= min_dist.

    With ``strict=True`` the pairwise distance must exceed ``min_dist``.
    Candidates are scanned in ``order`` (default: input order).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, d = pts.shape
    if order is None:
        order = range(n)
    if min_dist <= 0:
        return list(order)
    cells = np.floor(pts / min_dist).astype(np.int64)
    grid: dict[tuple, list[int]] = defaultdict(list)
    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    chosen: list[int] = []
    for i in order:
        c = cells[i]
        ok = True
        for off in offsets:
            for j in grid.get(tuple(c + off), ()):
                dist = float(np.linalg.norm(pts[i] - pts[j]))
                if dist < min_dist or (strict and dist == min_dist):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            chosen.append(i)
            grid[tuple(c)].append(i)
    return chosen


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest distance between two distinct points (inf for < 2 points)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 2:
        return float("inf")
    if pts.shape[1] == 1:
        x = np.sort(pts[:, 0])
        gaps = np.diff(x)
        gaps = gaps[gaps > 0]
        return float(gaps.min()) if gaps.size else float("inf")
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(pts).query(pts, k=2)
    nz = dist[:, 1][dist[:, 1] > 0]
    return float(nz.min()) if nz.size else float("inf")
