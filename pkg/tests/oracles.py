"""Independent reference computations used only by the tests.

Nothing here imports the solver code paths it checks: the Moran oracle is a
plain bisection, the cut-set oracle enumerates all words of a fixed length,
the bounded-Lipschitz oracle solves the primal transport problem.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def moran_bisection(ratios, iters=200) -> float:
    f = lambda s: sum(r**s for r in ratios) - 1.0  # noqa: E731
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def all_words(p: int, length: int):
    return itertools.product(range(1, p + 1), repeat=length)


def cutset_by_enumeration(ratios, R: float) -> set[tuple[int, ...]]:
    """Words w with alpha_w <= R < alpha_parent, found by scanning every word up to a safe length."""
    rmax = max(ratios)
    depth = max(1, math.ceil(math.log(R) / math.log(rmax)) + 1)
    out = set()
    for L in range(1, depth + 1):
        for w in all_words(len(ratios), L):
            a = math.prod(ratios[i - 1] for i in w)
            parent = math.prod(ratios[i - 1] for i in w[:-1])
            if a <= R * (1 + 1e-12) and (L == 1 or parent > R * (1 + 1e-12)):
                out.add(w)
    return out


def bl_primal(xs, a, ys, b) -> float:
    """min sum pi_ij min(|x_i - y_j|, 2) over couplings of the masses a and b.

    Kantorovich-Rubinstein for the truncated metric min(d, 2), which is the
    dual of sup { int f d(mu - nu) : |f| <= 1, Lip(f) <= 1 }.
    """
    xs = np.asarray(xs, float).reshape(len(a), -1)
    ys = np.asarray(ys, float).reshape(len(b), -1)
    n, m = len(a), len(b)
    cost = np.minimum(np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=2), 2.0)
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    res = linprog(cost.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def brute_histogram(points, masses, j: int) -> dict:
    out: dict = {}
    n = 2**j
    for x, m in zip(np.atleast_2d(points), masses):
        key = tuple(min(int(math.floor(c * n)), n - 1) for c in np.atleast_1d(x))
        out[key] = out.get(key, 0.0) + m
    return out


def max_packing_size(points, r: float) -> int:
    """Largest subset with pairwise distance > 2r (exhaustive; small inputs only)."""
    pts = np.asarray(points, float)
    pts = pts.reshape(len(pts), -1)
    n = len(pts)
    ok = np.linalg.norm(pts[:, None] - pts[None, :], axis=2) > 2 * r
    for k in range(n, 0, -1):
        for sub in itertools.combinations(range(n), k):
            if all(ok[i, j] for i, j in itertools.combinations(sub, 2)):
                return k
    return 0
