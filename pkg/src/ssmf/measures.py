"""Finitely supported probability measures and the constructions built on them.

Everything is an :class:`AtomicMeasure`: natural self-similar approximants,
Dirac and packing perturbations, typical approximants mixed with a seeded
reference measure, and finite-depth cascades over nested ball families.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ssmf._geometry import greedy_separated, min_pairwise_distance
from ssmf.errors import ConstructionError, InputError, ScheduleError
from ssmf.ifs import IfsSystem, cut_set, moran_dimension

log = logging.getLogger(__name__)

MASS_TOL = 1e-12


class AtomicMeasure:
    """Probability measure sum_k m_k delta_{x_k} on R^d.

    Coincident points are merged and zero masses dropped; atoms are stored
    in lexicographic order of their coordinates.  ``resolution`` optionally
    records the scale at which the measure discretizes something finer.
    """

    def __init__(self, points, masses, *, normalize: bool = False, resolution: float | None = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(masses, dtype=float).ravel()
        if len(pts) != len(w):
            raise InputError(f"{len(pts)} points but {len(w)} masses")
        if w.size == 0:
            raise InputError("a probability measure needs at least one atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(pts)):
            raise InputError("masses must be finite and non-negative, points finite")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
        total = math.fsum(merged)
        if normalize:
            if total <= 0:
                raise InputError("total mass is zero")
            merged = merged / total
        elif abs(total - 1.0) > MASS_TOL:
            raise InputError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")
        self.points = uniq
        self.masses = merged
        self.resolution = resolution
        self.points.setflags(write=False)
        self.masses.setflags(write=False)

    @classmethod
    def dirac(cls, x) -> "AtomicMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float))[None, :], [1.0])

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    def integrate(self, f) -> float:
        vals = np.asarray([f(x) for x in self.points], dtype=float)
        return float(np.dot(vals, self.masses))

    def atom_spacing(self) -> float:
        return min_pairwise_distance(self.points)

    def rows(self) -> list[list[float]]:
        return [list(map(float, p)) + [float(m)] for p, m in zip(self.points, self.masses)]

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.masses, other.masses)
        )

    def __repr__(self):
        return f"AtomicMeasure({len(self)} atoms, d={self.dimension})"


def mixture(weight: float, mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """weight * mu + (1 - weight) * nu."""
    if not 0.0 <= weight <= 1.0:
        raise InputError(f"mixture weight must lie in [0,1], got {weight}")
    if mu.dimension != nu.dimension:
        raise InputError("mixture of measures in different dimensions")
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([weight * mu.masses, (1.0 - weight) * nu.masses])
    res = [r for r in (mu.resolution, nu.resolution) if r is not None]
    out = AtomicMeasure(pts, w, normalize=True, resolution=min(res) if res else None)
    return out


def ball_mass(mu: AtomicMeasure, center, radius: float) -> float:
    """mu of the closed ball B(center, radius)."""
    if radius <= 0:
        raise InputError("radius must be positive")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    dist = np.linalg.norm(mu.points - c, axis=1)
    return math.fsum(mu.masses[dist <= radius])


# --------------------------------------------------------------------------
# schedules


SCHEDULE_TAGS = ("th1_dirac", "th1_density", "th2_packing", "main_typical")


@dataclass(frozen=True)
class Schedule:
    theorem_tag: str
    index: int
    values: dict

    def __getitem__(self, key):
        return self.values[key]


def dirac_schedule(d_n: float, theta: float, s: float, index: int = 0) -> Schedule:
    """beta = 1/log|log d|, alpha = d**beta, r = d**(theta s), c = d**(theta s / 2)."""
    if not 0 < d_n < 1 / math.e:
        raise ScheduleError("d_n must lie in (0, 1/e) so that log|log d_n| > 0")
    if s <= 0 or theta <= 2 / s:
        raise ScheduleError(f"need theta > 2/s (theta={theta}, s={s})")
    beta = 1.0 / math.log(abs(math.log(d_n)))
    vals = {
        "d_n": d_n,
        "beta_n": beta,
        "alpha_n": d_n**beta,
        "r_n": d_n ** (theta * s),
        "c_n": d_n ** (theta * s / 2),
        "theta": theta,
        "s": s,
    }
    return Schedule("th1_dirac", index, vals)


def density_schedule(alpha_n: float, theta: float, s: float, index: int = 0) -> Schedule:
    """Second half of the Dirac theorem: d = exp(-1/alpha), c = d**((theta-1) s / 2)."""
    if not 0 < alpha_n < 1:
        raise ScheduleError("alpha_n must lie in (0,1)")
    if s <= 0 or theta <= 1 + 2 / s:
        raise ScheduleError(f"need theta > 1 + 2/s (theta={theta}, s={s})")
    d = math.exp(-1.0 / alpha_n)
    vals = {
        "alpha_n": alpha_n,
        "d_n": d,
        "r_n": d ** (theta * s),
        "c_n": d ** ((theta - 1) * s / 2),
        "theta": theta,
        "s": s,
    }
    return Schedule("th1_density", index, vals)


def packing_schedule(n: int, s: float) -> Schedule:
    if n < 1:
        raise ScheduleError("packing schedule index must be >= 1")
    return Schedule("th2_packing", n, {"alpha_n": 2.0 ** -math.sqrt(n), "r_n": 2.0 ** (-(s + 2) * n), "s": s})


def typical_schedule(n: int, J_n: int, s: float) -> Schedule:
    if n < 1 or J_n < 1:
        raise ScheduleError("typical schedule needs n >= 1 and J_n >= 1")
    if J_n > n:
        raise ScheduleError(f"beta_n = J_n/n = {J_n}/{n} exceeds 1")
    return Schedule(
        "main_typical",
        n,
        {"J_n": J_n, "beta_n": J_n / n, "radius": 2.0 ** (-s * J_n**2), "s": s},
    )


def check_decreasing(schedules: list[Schedule], keys=None) -> None:
    """Raise ScheduleError unless every listed value strictly decreases along the index."""
    scheds = sorted(schedules, key=lambda sc: sc.index)
    if keys is None:
        keys = [k for k in ("d_n", "alpha_n", "beta_n", "c_n", "r_n") if k in scheds[0].values]
    for k in keys:
        seq = [sc.values[k] for sc in scheds]
        for a, b in zip(seq, seq[1:]):
            if not b < a:
                raise ScheduleError(f"{k} is not strictly decreasing: {a} then {b}")


# --------------------------------------------------------------------------
# measure families


def natural_measure(ifs: IfsSystem, R: float, base=None, s: float | None = None) -> AtomicMeasure:
    """sum over I(R) of ratio(w)**s at the anchor S_w(base)."""
    if s is None:
        s = moran_dimension(ifs.ratios)
    cs = cut_set(ifs, R)
    w = np.exp(s * cs.log_ratios)
    total = math.fsum(w)
    if abs(total - 1.0) > 1e-9:
        raise ConstructionError(f"cut-set weights sum to {total}, not 1")
    return AtomicMeasure(cs.anchors(base, ifs), w, normalize=True, resolution=R)


def dirac_perturbation(a, nu: AtomicMeasure, sched: Schedule | float) -> AtomicMeasure:
    """alpha_n delta_a + (1 - alpha_n) nu."""
    if isinstance(sched, Schedule):
        if sched.theorem_tag not in ("th1_dirac", "th1_density"):
            raise InputError(f"schedule {sched.theorem_tag} has no Dirac weight")
        alpha = sched["alpha_n"]
    else:
        alpha = float(sched)
    return mixture(alpha, AtomicMeasure.dirac(a), nu)


def packing_mixture(
    ifs: IfsSystem, n: int, nu: AtomicMeasure, s: float | None = None, sample_resolution: float | None = None
) -> AtomicMeasure:
    """alpha_n Pi_n + (1 - alpha_n) nu with Pi_n uniform on a greedy 2^-n packing of K."""
    from ssmf.ifs import sample_attractor
    from ssmf.spectrum import packing_centers

    if s is None:
        s = moran_dimension(ifs.ratios)
    sched = packing_schedule(n, s)
    r = 2.0**-n
    if sample_resolution is None:
        sample_resolution = min(1.0, r / (10 * max(ifs.diameter(), 1e-300)))
    centers = packing_centers(sample_attractor(ifs, sample_resolution), r)
    if len(centers) == 0:
        raise ConstructionError("attractor sample is empty")
    pi = AtomicMeasure(centers, np.full(len(centers), 1.0 / len(centers)), normalize=True)
    return mixture(sched["alpha_n"], pi, nu)


def typical_approximant(ifs: IfsSystem, n: int, J_n: int, nu: AtomicMeasure, base=None) -> AtomicMeasure:
    """beta_n lambda_n + (1 - beta_n) nu with beta_n = J_n/n and lambda_n at 2^-J_n."""
    if n < 1 or J_n < 1:
        raise InputError("need n >= 1 and J_n >= 1")
    if J_n > n:
        raise InputError(f"J_n/n = {J_n}/{n} > 1")
    lam = natural_measure(ifs, 2.0**-J_n, base)
    return mixture(J_n / n, lam, nu)


def _apply_words(ifs: IfsSystem, words: np.ndarray, base: np.ndarray) -> np.ndarray:
    """S_w(base) for each row w of 0-based letters, vectorized over rows."""
    lin = np.array([m.linear for m in ifs.maps])
    trans = np.array([m.translation for m in ifs.maps])
    x = np.tile(base, (len(words), 1))
    for pos in range(words.shape[1] - 1, -1, -1):
        k = words[:, pos]
        x = np.einsum("kij,kj->ki", lin[k], x) + trans[k]
    return x


def random_reference_measure(ifs: IfsSystem, size: int, seed: int = 0, depth: int = 8, base=None) -> AtomicMeasure:
    """Seeded stand-in for an element of a dense sequence in M(K)."""
    if size < 1:
        raise InputError("size must be >= 1")
    if depth < 0:
        raise InputError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    words = rng.integers(0, ifs.p, size=(size, depth))
    masses = rng.dirichlet(np.ones(size)) if size > 1 else np.ones(1)
    b = ifs.default_base() if base is None else np.atleast_1d(np.asarray(base, dtype=float))
    return AtomicMeasure(_apply_words(ifs, words, b), masses, normalize=True)


def lambda_theta_membership(x, anchors, theta: float, J: int) -> bool:
    """Whether x lies within 2^(-theta J) of one of the anchors (closed balls)."""
    a = np.asarray(anchors, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    return bool(np.min(np.linalg.norm(a - pt, axis=1)) <= 2.0 ** (-theta * J))


# --------------------------------------------------------------------------
# cascades


@dataclass
class CascadeBall:
    center: np.ndarray
    word: tuple[int, ...]
    radius: float
    mass: Fraction
    parent: int | None


@dataclass
class BallFamily:
    level: int
    J: int
    balls: list[CascadeBall]
    pool_sizes: list[int] = field(default_factory=list)  # per parent of the previous level
    child_counts: list[int] = field(default_factory=list)
    selection_radius: float = 0.0  # r_p used for D_{p,i}; 0 at level 1

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls])

    @property
    def masses(self) -> list[Fraction]:
        return [b.mass for b in self.balls]


@dataclass
class CascadeTree:
    theta: float
    level_schedule: list[int]
    levels: list[BallFamily]
    diameter: float
    growth_ok: list[bool]

    @property
    def depth(self) -> int:
        return len(self.levels)


def geometric_schedule(J1: int, theta: float, depth: int, growth: float = 2.0) -> list[int]:
    """J_{p+1} = ceil(growth * theta * J_p)."""
    if J1 < 1 or depth < 1:
        raise ScheduleError("need J1 >= 1 and depth >= 1")
    out = [int(J1)]
    while len(out) < depth:
        out.append(int(math.ceil(growth * theta * out[-1])))
    return out


def paper_growth_ok(levels: list[int], theta: float) -> list[bool]:
    """Per consecutive pair: J_{p+1} > max((p+1) theta J_p, e^{J_p})."""
    flags = []
    for p, (a, b) in enumerate(zip(levels, levels[1:]), start=1):
        flags.append(b > max((p + 1) * theta * a, math.exp(a)))
    return flags


def build_cascade(
    ifs: IfsSystem,
    theta: float,
    levels: list[int] | None = None,
    depth: int = 3,
    base=None,
    J1: int = 2,
    growth: float = 2.0,
) -> CascadeTree:
    """Nested ball families F_1, ..., F_depth with uniform mass splitting.

    Level 1 is a greedy maximal family of anchors of I(2^-J_1) with disjoint
    balls of radius 2^-J_1.  Each level-p ball B(x_i, 2^(-theta J_p)) receives
    as children a greedy maximal family of candidates from
    D_{p,i} = {j in I(2^-J_{p+1}) : K_j meets B(x_i, r_p)}, pairwise at least
    2 * 2^-J_{p+1} apart, and splits its mass evenly among them.
    """
    if theta < 1:
        raise InputError("theta must be >= 1")
    if levels is None:
        levels = geometric_schedule(J1, theta, depth, growth)
    levels = [int(j) for j in levels]
    if len(levels) < depth:
        raise InputError(f"{len(levels)} levels given for depth {depth}")
    levels = levels[:depth]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ScheduleError(f"levels must be strictly increasing: {levels}")
    diam = ifs.diameter()
    for p, (a, b) in enumerate(zip(levels, levels[1:]), start=1):
        outer = 2.0 ** (-theta * a)
        r_p = outer - diam * 2.0**-b
        if r_p <= 0:
            raise ScheduleError(f"r_{p} <= 0 for level pair (J={a}, J={b})")
        if not 0.5 * outer <= r_p <= outer:
            raise ScheduleError(f"r_{p} = {r_p:.3g} outside [2^(-theta J)/2, 2^(-theta J)] for (J={a}, J={b})")

    cs = cut_set(ifs, 2.0 ** -levels[0])
    anchors = cs.anchors(base, ifs)
    chosen = greedy_separated(anchors, 2 * 2.0 ** -levels[0])
    if not chosen:
        raise ConstructionError("empty first-level family")
    m1 = Fraction(1, len(chosen))
    radius = 2.0 ** (-theta * levels[0])
    fam = BallFamily(1, levels[0], [CascadeBall(anchors[k], cs.words[k].letters, radius, m1, None) for k in chosen])
    families = [fam]

    for p in range(1, depth):
        Jp, Jn = levels[p - 1], levels[p]
        outer = 2.0 ** (-theta * Jp)
        R = 2.0**-Jn
        r_p = outer - diam * R
        cs = cut_set(ifs, R)
        anchors = cs.anchors(base, ifs)
        cell = diam * np.minimum(cs.ratios, R)
        tree = cKDTree(anchors)
        sep = 2 * R
        child_radius = 2.0 ** (-theta * Jn)
        balls, pools, counts = [], [], []
        for pi, parent in enumerate(families[-1].balls):
            near = np.array(sorted(tree.query_ball_point(parent.center, r_p + diam * R)), dtype=int)
            if near.size:
                dist = np.linalg.norm(anchors[near] - parent.center, axis=1)
                near = near[dist < r_p + cell[near]]
            pools.append(int(near.size))
            picked = [int(near[k]) for k in greedy_separated(anchors[near], sep)] if near.size else []
            if not picked:
                raise ConstructionError(f"no children for parent word {''.join(map(str, parent.word))} at level {p}")
            counts.append(len(picked))
            m = parent.mass / len(picked)
            for k in picked:
                balls.append(CascadeBall(anchors[k], cs.words[k].letters, child_radius, m, pi))
        families.append(BallFamily(p + 1, Jn, balls, pools, counts, r_p))
    growth_flags = paper_growth_ok(levels, theta)
    for p, ok in enumerate(growth_flags, start=1):
        if not ok:
            log.info("level pair %d -> %d is outside the asymptotic growth regime", p, p + 1)
    return CascadeTree(float(theta), levels, families, diam, growth_flags)


def cascade_to_atomic(tree: CascadeTree, level: int) -> AtomicMeasure:
    """One atom per ball of the given (1-based) level."""
    if not 1 <= level <= tree.depth:
        raise InputError(f"level {level} outside 1..{tree.depth}")
    fam = tree.levels[level - 1]
    return AtomicMeasure(fam.centers, [float(b.mass) for b in fam.balls], normalize=True)


# --------------------------------------------------------------------------
# serialization and measure specs


def measure_to_json(mu: AtomicMeasure) -> str:
    return json.dumps(mu.rows())


def measure_to_csv(mu: AtomicMeasure) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(mu.dimension)] + ["mass"])
    for row in mu.rows():
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def measure_from_rows(rows) -> AtomicMeasure:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InputError("measure rows must be [coords..., mass]")
    return AtomicMeasure(arr[:, :-1], arr[:, -1])


def measure_from_csv(text: str) -> AtomicMeasure:
    rows = list(csv.reader(io.StringIO(text)))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return measure_from_rows([[float(v) for v in r] for r in rows if r])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_measure(mu: AtomicMeasure, path) -> Path:
    path = Path(path)
    text = measure_to_csv(mu) if path.suffix.lower() == ".csv" else measure_to_json(mu)
    path.write_text(text)
    return path


def load_measure_file(path) -> AtomicMeasure:
    path = Path(path)
    if not path.exists():
        raise InputError(f"measure file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return measure_from_csv(text)
    data = json.loads(text)
    if isinstance(data, dict):
        raise InputError(f"{path} holds a measure spec, not serialized atoms")
    return measure_from_rows(data)


MEASURE_KINDS = ("natural", "dirac_mix", "packing_mix", "typical", "cascade", "atomic", "reference")


def build_measure(spec: dict, ifs: IfsSystem | None = None) -> AtomicMeasure:
    """Build a measure from a JSON-style spec ``{"kind": ..., ..., "seed": int}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in MEASURE_KINDS:
        raise InputError(f"unknown measure kind {kind!r}; expected one of {MEASURE_KINDS}")
    seed = int(spec.pop("seed", 0))

    def need(key):
        if key not in spec:
            raise InputError(f"measure kind {kind!r} needs key {key!r}")
        return spec.pop(key)

    def nu_from(spec_nu):
        if spec_nu is None:
            return random_reference_measure(ifs, 16, seed)
        sub = dict(spec_nu)
        sub.setdefault("seed", seed)
        return build_measure(sub, ifs)

    if kind == "atomic":
        if "atoms" in spec:
            mu = measure_from_rows(spec.pop("atoms"))
        else:
            mu = load_measure_file(need("path"))
        _reject_extra(kind, spec)
        return mu
    if ifs is None:
        raise InputError(f"measure kind {kind!r} needs an IFS")
    if kind == "natural":
        R = float(need("resolution"))
        _reject_extra(kind, spec)
        return natural_measure(ifs, R)
    if kind == "reference":
        size = int(spec.pop("size", 16))
        depth = int(spec.pop("depth", 8))
        _reject_extra(kind, spec)
        return random_reference_measure(ifs, size, seed, depth)
    if kind == "dirac_mix":
        point = need("point")
        nu = nu_from(spec.pop("nu", None))
        if "alpha" in spec:
            sched = float(spec.pop("alpha"))
        else:
            s = moran_dimension(ifs.ratios)
            sched = dirac_schedule(float(need("d_n")), float(need("theta")), float(spec.pop("s", s)))
        _reject_extra(kind, spec)
        return dirac_perturbation(point, nu, sched)
    if kind == "packing_mix":
        n = int(need("n"))
        nu = nu_from(spec.pop("nu", None))
        _reject_extra(kind, spec)
        return packing_mixture(ifs, n, nu)
    if kind == "typical":
        n, J = int(need("n")), int(need("J"))
        nu = nu_from(spec.pop("nu", None))
        _reject_extra(kind, spec)
        return typical_approximant(ifs, n, J, nu)
    # cascade
    theta = float(need("theta"))
    depth = int(spec.pop("depth", 3))
    levels = spec.pop("levels", None)
    J1 = int(spec.pop("J1", 2))
    level = int(spec.pop("level", depth))
    _reject_extra(kind, spec)
    tree = build_cascade(ifs, theta, levels, depth, J1=J1)
    return cascade_to_atomic(tree, level)


def _reject_extra(kind: str, spec: dict):
    if spec:
        raise InputError(f"unknown keys for measure kind {kind!r}: {sorted(spec)}")
