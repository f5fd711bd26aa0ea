"""Finite-scale multifractal analysis of atomic measures.

Every limit is replaced by a window over finitely many scales: liminf
proxies take the window minimum, limsup proxies the window maximum, and a
least-squares slope is reported alongside.  Estimators refuse radii at or
below the atom spacing of the input, where a discretized measure looks like
a sum of Diracs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ssmf._geometry import greedy_separated
from ssmf.errors import EstimationError, InputError
from ssmf.ifs import IfsSystem, cut_set, sample_attractor
from ssmf.measures import AtomicMeasure, CascadeTree, ball_mass, cascade_to_atomic

log = logging.getLogger(__name__)

MAX_LEVEL = 40
BOX_TOL = 1e-12


def _slope(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and RMS residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0:
        raise InputError("regression needs at least two distinct abscissae")
    slope = float(np.dot(xc, y - y.mean())) / denom
    intercept = float(y.mean() - slope * x.mean())
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return slope, intercept, resid


# --------------------------------------------------------------------------
# histograms and curves


@dataclass(frozen=True, eq=False)
class DyadicHistogram:
    """Masses of the nonempty boxes prod [k_i 2^-j, (k_i + 1) 2^-j)."""

    level: int
    keys: np.ndarray
    masses: np.ndarray

    @property
    def box_masses(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in k): float(m) for k, m in zip(self.keys, self.masses)}

    @property
    def count(self) -> int:
        return len(self.masses)

    def coarsen(self) -> "DyadicHistogram":
        """Aggregate to level j - 1 by parent box."""
        if self.level == 0:
            raise InputError("level 0 has no parent level")
        parents, inv = np.unique(self.keys // 2, axis=0, return_inverse=True)
        return DyadicHistogram(self.level - 1, parents, np.bincount(inv.ravel(), weights=self.masses))


def dyadic_histogram(mu: AtomicMeasure, j: int) -> DyadicHistogram:
    j = int(j)
    if not 0 <= j <= MAX_LEVEL:
        raise InputError(f"histogram level must lie in 0..{MAX_LEVEL}")
    pts = mu.points
    if np.any(pts < -BOX_TOL) or np.any(pts > 1 + BOX_TOL):
        raise InputError("support leaves the unit cube; normalize the IFS (normalize_ifs) first")
    n = 2**j
    keys = np.floor(np.clip(pts, 0.0, 1.0) * n).astype(np.int64)
    keys = np.minimum(keys, n - 1)  # coordinate 1 belongs to the top box
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    return DyadicHistogram(j, uniq, np.bincount(inv.ravel(), weights=mu.masses, minlength=len(uniq)))


def partition_sum(h: DyadicHistogram, q: float) -> float:
    """sum of mu(Q)**q over nonempty boxes; q = 0 gives the box count."""
    if q == 0:
        return float(h.count)
    return math.fsum(h.masses**q)


@dataclass
class SpectrumCurve:
    axis: str
    x: np.ndarray
    y: np.ndarray
    per_level: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise InputError("curve abscissae and ordinates differ in length")
        if np.any(np.diff(self.x) <= 0):
            raise InputError("curve abscissae must be strictly increasing")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise InputError("curve samples must be finite")

    def __call__(self, x):
        return np.interp(x, self.x, self.y)

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))


def _levels(j_range) -> list[int]:
    lo, hi = int(j_range[0]), int(j_range[-1])
    if lo > hi or lo < 1:
        raise InputError(f"bad level window {j_range}")
    if hi > MAX_LEVEL:
        raise InputError(f"levels above {MAX_LEVEL} are not supported")
    return list(range(lo, hi + 1))


def _check_resolution(mu: AtomicMeasure, scale: float, what: str) -> bool:
    ok = mu.resolution is None or mu.resolution <= scale * (1 + 1e-12)
    if not ok:
        log.warning("%s: measure resolution %.3g is coarser than %.3g", what, mu.resolution, scale)
    return ok


def tau_estimate(mu: AtomicMeasure, j_range, q_grid) -> SpectrumCurve:
    """L^q spectrum: per-level T_j(q) = -log2 Z_j(q) / j, window minimum and fitted slope.

    The curve's ordinates are the slopes of -log2 Z_j(q) against j.
    """
    js = _levels(j_range)
    qs = np.asarray(q_grid, dtype=float)
    if qs.size == 0:
        raise InputError("empty q grid")
    if len(js) < 2:
        raise InputError("tau_estimate needs at least two levels")
    hists = [dyadic_histogram(mu, j) for j in js]
    logz = np.array([[-math.log2(partition_sum(h, q)) for h in hists] for q in qs])
    T = logz / np.asarray(js, dtype=float)
    fits = [_slope(js, row) for row in logz]
    slopes = np.array([f[0] for f in fits])
    return SpectrumCurve(
        "q",
        qs,
        slopes,
        per_level={"levels": js, "T": T, "window_min": T.min(axis=1), "counts": [h.count for h in hists]},
        fit={"slope": slopes, "intercept": np.array([f[1] for f in fits]), "residual": np.array([f[2] for f in fits])},
        meta={"resolution_ok": _check_resolution(mu, 2.0 ** -js[-1], "tau_estimate")},
    )


def legendre_transform(tau: SpectrumCurve, h_grid) -> SpectrumCurve:
    """min over the sampled q of (q h - tau(q)); exact on the grid."""
    hs = np.asarray(h_grid, dtype=float)
    if hs.size == 0 or tau.x.size == 0:
        raise InputError("empty grid for the Legendre transform")
    vals = hs[:, None] * tau.x[None, :] - tau.y[None, :]
    arg = np.argmin(vals, axis=1)
    return SpectrumCurve("h", hs, vals[np.arange(len(hs)), arg], meta={"argmin_q": tau.x[arg]})


def coarse_spectrum(mu: AtomicMeasure, j_range, h_bins, eps: float = 0.05, min_count: int = 2) -> SpectrumCurve:
    """Large-deviation spectrum log2 #{Q : |-log2 mu(Q)/j - h| within eps} / j.

    A box counts for bin h when 2^(-j(h+eps)) <= mu(Q) < 2^(-j(h-eps)).
    Bins with fewer than ``min_count`` boxes at a level give no value there.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    js = _levels(j_range)
    hs = np.asarray(h_bins, dtype=float)
    table = np.full((len(hs), len(js)), np.nan)
    for c, j in enumerate(js):
        m = dyadic_histogram(mu, j).masses
        for r, h in enumerate(hs):
            lo, hi = 2.0 ** (-j * (h + eps)), 2.0 ** (-j * (h - eps))
            n = int(np.count_nonzero((m >= lo) & (m < hi)))
            if n >= min_count and n > 0:
                table[r, c] = math.log2(n) / j
    have = ~np.all(np.isnan(table), axis=1)
    best = np.nanmax(np.where(have[:, None], table, 0.0), axis=1)
    return SpectrumCurve(
        "h",
        hs[have],
        best[have],
        per_level={"levels": js, "f": table},
        meta={"eps": eps, "min_count": min_count},
    )


# --------------------------------------------------------------------------
# pointwise estimators


@dataclass
class HolderEstimate:
    point: np.ndarray
    radii: np.ndarray
    log_radii: np.ndarray
    log_masses: np.ndarray
    slope: float
    intercept: float
    min_chord: float

    def as_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "radii": self.radii.tolist(),
            "log_radii": self.log_radii.tolist(),
            "log_masses": self.log_masses.tolist(),
            "slope": self.slope,
            "intercept": self.intercept,
            "min_chord": self.min_chord,
        }


def _ball_masses(mu: AtomicMeasure, x, radii) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(radii, dtype=float)
    if r.size < 2:
        raise InputError("need at least two radii")
    if np.any(np.diff(r) >= 0):
        raise InputError("radii must be strictly decreasing")
    floor = mu.atom_spacing()
    floor = 0.0 if not math.isfinite(floor) else floor
    if np.any(r <= floor):
        raise InputError(f"radius {r.min():.3g} is at or below the atom spacing {floor:.3g} of the measure")
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    masses = np.array([ball_mass(mu, pt, ri) for ri in r])
    if np.any(masses <= 0):
        bad = r[masses <= 0][0]
        raise EstimationError(f"ball of radius {bad:.3g} around {pt.tolist()} carries no mass")
    return r, masses


def local_holder(mu: AtomicMeasure, x, radii) -> HolderEstimate:
    """Slope of log mu(B(x, r)) against log r, plus the smallest chord slope."""
    r, masses = _ball_masses(mu, x, radii)
    lr, lm = np.log(r), np.log(masses)
    slope, intercept, _ = _slope(lr, lm)
    chords = np.diff(lm) / np.diff(lr)
    return HolderEstimate(np.atleast_1d(np.asarray(x, dtype=float)), r, lr, lm, slope, intercept, float(chords.min()))


def lower_density(lam: AtomicMeasure, a, s: float, radii) -> float:
    """min over radii of (2r)^-s lam(B(a, r))."""
    r, masses = _ball_masses(lam, a, radii)
    return float(np.min((2 * r) ** (-s) * masses))


def packing_centers(points, r: float) -> np.ndarray:
    """Greedy maximal subset with pairwise distances > 2r, scanned in input order."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise InputError("no points to pack")
    if r <= 0:
        raise InputError("packing radius must be positive")
    return pts[greedy_separated(pts, 2 * r, strict=True)]


def upper_box_dimension(ifs: IfsSystem, r_list, sample_resolution: float | None = None) -> tuple[float, dict]:
    """Slope of log N_r against -log r, N_r from greedy packings of an attractor sample."""
    r = np.asarray(r_list, dtype=float)
    if r.size < 2 or np.any(np.diff(r) >= 0) or np.any(r <= 0):
        raise InputError("r_list must hold at least two positive, strictly decreasing radii")
    if sample_resolution is None:
        sample_resolution = min(1.0, r.min() / 10)
    if sample_resolution > r.min() / 10:
        raise InputError(f"sample resolution {sample_resolution:.3g} is not 10x finer than r = {r.min():.3g}")
    pts = sample_attractor(ifs, sample_resolution)
    counts = np.array([len(packing_centers(pts, ri)) for ri in r])
    x, y = -np.log(r), np.log(counts)
    slope, intercept, resid = _slope(x, y)
    return slope, {
        "r": r.tolist(),
        "counts": counts.tolist(),
        "slope": slope,
        "intercept": intercept,
        "residual": resid,
        "window_max": float(np.max(y / x)),
        "sample_resolution": sample_resolution,
        "sample_size": int(len(pts)),
    }


# --------------------------------------------------------------------------
# verifiers


def verify_majholdmu(
    mu: AtomicMeasure,
    ifs: IfsSystem,
    theta: float,
    J: int,
    s: float,
    eps: float,
    beta: float | None = None,
    base=None,
) -> dict:
    """Ball-mass lower bound around every anchor of I(2^-J).

    For each anchor x_w the ratio mu(B(x_w, 2 * 2^(-theta J))) * 2^(s (1+eps) J)
    is computed; its minimum is the empirical constant.  When ``beta`` (the
    weight of the natural part of a typical approximant) is given, every
    ratio is also compared with beta * min_w ratio(w)^s * 2^(s (1+eps) J).
    """
    scale = 2.0 ** (-theta * J)
    if mu.resolution is not None and mu.resolution > 2.0**-J * (1 + 1e-12) and mu.resolution > scale * (1 + 1e-12):
        raise InputError(f"measure resolution {mu.resolution:.3g} is coarser than 2^(-theta J) = {scale:.3g}")
    cs = cut_set(ifs, 2.0**-J)
    anchors = cs.anchors(base, ifs)
    boost = 2.0 ** (s * (1 + eps) * J)
    radius = 2 * scale
    dist_ok = np.linalg.norm(mu.points[None, :, :] - anchors[:, None, :], axis=2) <= radius
    masses = dist_ok.astype(float) @ mu.masses
    ratios = masses * boost
    report = {
        "theta": theta,
        "J": J,
        "s": s,
        "eps": eps,
        "radius": radius,
        "anchors": int(len(anchors)),
        "min_ratio": float(ratios.min()),
        "max_ratio": float(ratios.max()),
        "positive": bool(ratios.min() > 0),
    }
    if beta is not None:
        bound = beta * float(np.exp(s * cs.log_ratios).min()) * boost
        report["beta"] = beta
        report["bound"] = bound
        report["bound_ok"] = bool(np.all(ratios >= bound * (1 - 1e-12)))
        report["passed"] = report["positive"] and report["bound_ok"] and bound > 0
    else:
        report["passed"] = report["positive"]
    return report


def verify_formalism(mu: AtomicMeasure, s: float, q_grid, h_grid, j_range, tol: float) -> dict:
    """Compare the fitted tau with s(q - 1) and its Legendre transform with h.

    Also checks sum mu(Q)^q <= N_j^(1-q) (N_j = number of nonempty boxes) at
    every level of the window and every q of the grid inside [0, 1].
    """
    qs = np.asarray(q_grid, dtype=float)
    hs = np.asarray(h_grid, dtype=float)
    if qs.size == 0 or hs.size == 0:
        raise InputError("empty grid")
    tau = tau_estimate(mu, j_range, qs)
    tau_err = np.abs(tau.y - s * (qs - 1))
    leg = legendre_transform(tau, hs)
    leg_err = np.abs(leg.y - hs)
    worst = -math.inf
    bound_ok = True
    for j in tau.per_level["levels"]:
        h = dyadic_histogram(mu, j)
        for q in qs[(qs >= 0) & (qs <= 1)]:
            lhs, rhs = partition_sum(h, q), float(h.count) ** (1 - q)
            excess = (lhs - rhs) / max(1.0, rhs)
            worst = max(worst, excess)
            if excess > 1e-12:
                bound_ok = False
    passed = bool(tau_err.max() <= tol and leg_err.max() <= tol and bound_ok)
    return {
        "s": s,
        "tol": tol,
        "levels": tau.per_level["levels"],
        "q": qs.tolist(),
        "tau_fit": tau.y.tolist(),
        "tau_window_min": tau.per_level["window_min"].tolist(),
        "tau_error": tau_err.tolist(),
        "max_tau_error": float(tau_err.max()),
        "h": hs.tolist(),
        "legendre": leg.y.tolist(),
        "legendre_error": leg_err.tolist(),
        "max_legendre_error": float(leg_err.max()),
        "concavity_bound_ok": bound_ok,
        "concavity_worst_excess": worst,
        "resolution_ok": tau.meta["resolution_ok"],
        "passed": passed,
        "_curves": (tau, leg),
    }


def cascade_scaling_check(tree: CascadeTree, s: float, n_balls: int = 100, seed: int = 0) -> dict:
    """Per-cell mass exponents log2 m(V) / (-J_p) and a random-ball Frostman ratio.

    The window [s(1 - 2/p), s(1 + 1/p)] is evaluated per cell and reported;
    it describes the asymptotic regime, so violations are informational.
    """
    if tree.depth < 2:
        raise InputError("cascade_scaling_check needs depth >= 2")
    levels = []
    for fam in tree.levels:
        p = fam.level
        masses = np.array([float(b.mass) for b in fam.balls])
        expo = np.log2(masses) / (-fam.J)
        lo, hi = s * (1 - 2 / p), s * (1 + 1 / p)
        inside = (expo >= lo - 1e-12) & (expo <= hi + 1e-12)
        levels.append(
            {
                "level": p,
                "J": fam.J,
                "cells": len(fam.balls),
                "exponent_min": float(expo.min()),
                "exponent_max": float(expo.max()),
                "deviation_from_s": float(np.max(np.abs(expo - s))),
                "window": [lo, hi],
                "window_ok": bool(inside.all()),
                "cells_outside_window": int((~inside).sum()),
            }
        )
    P = tree.depth
    leaf = cascade_to_atomic(tree, P)
    expo_ball = s / tree.theta - 2 / (P - 1)
    rng = np.random.default_rng(seed)
    rmin, rmax = 2.0 ** (-tree.theta * tree.level_schedule[-1]), 2.0 ** -tree.level_schedule[0]
    best = 0.0
    for _ in range(n_balls):
        c = leaf.points[rng.integers(len(leaf))]
        r = math.exp(rng.uniform(math.log(rmin), math.log(rmax)))
        c = c + rng.uniform(-r, r, size=c.shape)
        m = ball_mass(leaf, c, r)
        best = max(best, m / (2 * r) ** expo_ball)
    deepest = levels[-1]
    if not deepest["window_ok"]:
        log.info("deepest cascade level is outside the mass-exponent window %s", deepest["window"])
    return {
        "theta": tree.theta,
        "levels": levels,
        "ball_exponent": expo_ball,
        "empirical_C": best,
        "n_balls": n_balls,
        "growth_ok": tree.growth_ok,
        "deepest_window_ok": deepest["window_ok"],
    }
