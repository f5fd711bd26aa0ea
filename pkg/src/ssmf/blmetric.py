"""Bounded-Lipschitz distance between atomic measures.

rho(mu, nu) = sup |int f d(mu - nu)| over f with |f| <= 1 and Lip(f) <= 1.
On atomic measures only the values of f on the joint support matter, so the
supremum is a finite linear program.  Any feasible vector of values extends
to an admissible function on all of R^d (McShane extension, then clipping),
which :meth:`LipschitzWitness.extend` implements.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ssmf.errors import InputError, ResourceError, SsmfError
from ssmf.measures import AtomicMeasure

log = logging.getLogger(__name__)

DEFAULT_SUPPORT_CAP = 2000
LP_TOL = 1e-10


def _rows(x, d: int) -> tuple[np.ndarray, bool]:
    """Reshape to (n, d); a scalar, or a length-d vector when d > 1, is a single point."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and d > 1)
    return np.atleast_1d(arr).reshape(-1, d), single


@dataclass(frozen=True, eq=False)
class LipschitzWitness:
    support: np.ndarray
    values: np.ndarray

    def max_violation(self) -> float:
        """Largest violation of |f| <= 1 or |f(x) - f(y)| <= |x - y| on the support."""
        bound = float(np.max(np.abs(self.values)) - 1.0)
        diff = np.abs(self.values[:, None] - self.values[None, :])
        dist = np.linalg.norm(self.support[:, None, :] - self.support[None, :, :], axis=2)
        return max(bound, float(np.max(diff - dist)), 0.0)

    def extend(self, x) -> np.ndarray:
        """Admissible extension clip(min_k(v_k + |x - x_k|), -1, 1), vectorized over rows of x."""
        pts, single = _rows(x, self.support.shape[1])
        dist = np.linalg.norm(pts[:, None, :] - self.support[None, :, :], axis=2)
        out = np.clip(np.min(self.values[None, :] + dist, axis=1), -1.0, 1.0)
        return out[0] if single else out

    def __call__(self, x):
        return self.extend(x)


@dataclass(frozen=True)
class TentFunction:
    """Equal to ``height`` on B(center, inner), 0 outside B(center, outer), linear between."""

    center: tuple[float, ...]
    inner_radius: float
    outer_radius: float
    height: float

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise InputError("tent radii must satisfy 0 < inner < outer")
        object.__setattr__(self, "center", tuple(np.atleast_1d(np.asarray(self.center, dtype=float)).tolist()))

    @classmethod
    def from_schedule(cls, a, c: float, d: float) -> "TentFunction":
        """The (c_n, d_n) tent: plateau on B(a, d/2), support in B(a, d)."""
        return cls(a, d / 2, d, c)

    @property
    def slope(self) -> float:
        return abs(self.height) / (self.outer_radius - self.inner_radius)

    @property
    def admissible(self) -> bool:
        return abs(self.height) <= 1.0 and self.slope <= 1.0

    def rescale_factor(self) -> float:
        if self.height == 0:
            return 1.0
        return min(1.0, 1.0 / abs(self.height), (self.outer_radius - self.inner_radius) / abs(self.height))

    def rescaled(self) -> "TentFunction":
        k = self.rescale_factor()
        return TentFunction(self.center, self.inner_radius, self.outer_radius, self.height * k)

    def __call__(self, y):
        return tent_eval(self, y)


def tent_eval(t: TentFunction, y) -> float | np.ndarray:
    a = np.asarray(t.center)
    pts, scalar = _rows(y, a.shape[0])
    r = np.linalg.norm(pts - a, axis=1)
    span = t.outer_radius - t.inner_radius
    val = np.where(
        r <= t.inner_radius,
        t.height,
        np.where(r >= t.outer_radius, 0.0, t.height * (t.outer_radius - r) / span),
    )
    return float(val[0]) if scalar else val


def _joint_support(mu: AtomicMeasure, nu: AtomicMeasure):
    if mu.dimension != nu.dimension:
        raise InputError("measures live in different dimensions")
    pts = np.vstack([mu.points, nu.points])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.ravel()
    w = np.zeros(len(uniq))
    np.add.at(w, inv[: len(mu)], mu.masses)
    np.add.at(w, inv[len(mu):], -nu.masses)
    return uniq, w


def _pair_constraints(support: np.ndarray):
    """Rows encoding f_a - f_b <= |x_a - x_b| for the pairs that can bind."""
    m, d = support.shape
    if d == 1:
        # the points are sorted, so neighbouring constraints imply the rest
        a = np.arange(m - 1)
        b = a + 1
        dist = np.abs(support[b, 0] - support[a, 0])
    else:
        a, b = np.triu_indices(m, k=1)
        dist = np.linalg.norm(support[a] - support[b], axis=1)
        keep = dist < 2.0  # |f| <= 1 already implies the others
        a, b, dist = a[keep], b[keep], dist[keep]
    k = len(a)
    rows = np.repeat(np.arange(2 * k), 2)
    cols = np.empty(4 * k, dtype=int)
    vals = np.empty(4 * k)
    cols[0::4], cols[1::4], cols[2::4], cols[3::4] = a, b, b, a
    vals[0::4], vals[1::4], vals[2::4], vals[3::4] = 1.0, -1.0, 1.0, -1.0
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * k, m))
    return A, np.repeat(dist, 2)


def bl_distance(mu: AtomicMeasure, nu: AtomicMeasure, cap: int = DEFAULT_SUPPORT_CAP) -> tuple[float, LipschitzWitness]:
    """Exact rho(mu, nu) and an optimal witness on the joint support."""
    for name, m in (("mu", mu), ("nu", nu)):
        if abs(m.total_mass - 1.0) > 1e-12:
            raise InputError(f"{name} is not normalized")
    support, w = _joint_support(mu, nu)
    m = len(support)
    if m > cap:
        raise ResourceError(f"joint support has {m} points (cap {cap})")
    if not np.any(w):
        return 0.0, LipschitzWitness(support, np.zeros(m))
    if m == 1:
        f = np.array([math.copysign(1.0, w[0])])
        return abs(float(w[0])), LipschitzWitness(support, f)
    A, b = _pair_constraints(support)
    res = linprog(
        -w,
        A_ub=A if A.shape[0] else None,
        b_ub=b if A.shape[0] else None,
        bounds=(-1.0, 1.0),
        method="highs-ds",
        options={"primal_feasibility_tolerance": LP_TOL, "dual_feasibility_tolerance": LP_TOL},
    )
    if res.status != 0:
        raise SsmfError(f"LP solver failed: {res.message}")
    f = np.clip(res.x, -1.0, 1.0)
    value = max(float(np.dot(w, f)), 0.0)
    return value, LipschitzWitness(support, f)


def duality_check(f, mu: AtomicMeasure, nu: AtomicMeasure, rho: float, allow_rescale: bool = True, slack: float = 1e-9) -> bool:
    """Whether |int f dmu - int f dnu| <= rho + slack for an admissible test function f."""
    if isinstance(f, TentFunction) and not f.admissible:
        if not allow_rescale:
            raise InputError(f"tent has slope {f.slope:.3g} and height {f.height:.3g}; not admissible")
        log.info("rescaling tent by %.6g to make it admissible", f.rescale_factor())
        f = f.rescaled()
    elif isinstance(f, LipschitzWitness) and f.max_violation() > 1e-9:
        raise InputError("witness violates the Lipschitz/bound constraints")
    if callable(f) and not isinstance(f, (TentFunction, LipschitzWitness)):
        evaluate = lambda pts: np.array([f(p) for p in pts], dtype=float)  # noqa: E731
    else:
        evaluate = lambda pts: np.asarray(f(pts), dtype=float).reshape(-1)  # noqa: E731
    gap = abs(float(np.dot(evaluate(mu.points), mu.masses) - np.dot(evaluate(nu.points), nu.masses)))
    return gap <= rho + slack


def gdelta_trace(mu: AtomicMeasure, approximants) -> list[tuple[int, float, bool]]:
    """For each (mu_k, radius_k): (k, rho(mu, mu_k), rho(mu, mu_k) < radius_k)."""
    out = []
    for k, (mk, radius) in enumerate(approximants):
        dist, _ = bl_distance(mu, mk)
        out.append((k, dist, dist < radius))
    return out
