"""Iterated function systems of contractive similitudes.

Words are tuples of 1-based letters.  Cut sets are enumerated depth-first
in lexicographic order; ratio products are accumulated as sums of logs so
deep words never underflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ssmf.errors import InputError, ResourceError

ORTHO_TOL = 1e-9
# relative slack in the stopping rule, so that R = alpha^n lands on length n
TIE_TOL = 1e-12
DEFAULT_CUTSET_CAP = 10**7


def _as_point(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != d:
        raise InputError(f"point has dimension {arr.shape[-1]}, expected {d}")
    return arr


@dataclass(frozen=True, eq=False)
class Similitude:
    """x -> ratio * orthogonal @ x + translation."""

    ratio: float
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        ratio = float(self.ratio)
        if not 0.0 < ratio < 1.0:
            raise InputError(f"similitude ratio must lie in (0,1), got {ratio}")
        t = np.atleast_1d(np.asarray(self.translation, dtype=float))
        d = t.shape[0]
        if self.orthogonal is None:
            o = np.eye(d)
        else:
            o = np.atleast_2d(np.asarray(self.orthogonal, dtype=float))
        if o.shape != (d, d):
            raise InputError(f"orthogonal part has shape {o.shape}, expected {(d, d)}")
        if np.max(np.abs(o @ o.T - np.eye(d))) > ORTHO_TOL:
            raise InputError("matrix is not orthogonal within 1e-9")
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "orthogonal", o)
        object.__setattr__(self, "translation", t)

    @property
    def dimension(self) -> int:
        return self.translation.shape[0]

    @property
    def linear(self) -> np.ndarray:
        return self.ratio * self.orthogonal

    def apply(self, x) -> np.ndarray:
        pts = _as_point(x, self.dimension)
        return pts @ self.linear.T + self.translation

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dimension) - self.linear, self.translation)

    def __repr__(self):
        return f"Similitude(ratio={self.ratio!r}, translation={self.translation.tolist()!r})"


def similitude_apply(map: Similitude, x) -> np.ndarray:
    return map.apply(x)


@dataclass(frozen=True)
class Word:
    letters: tuple[int, ...]
    ratio: float

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        if all(k < 10 for k in self.letters):
            return "".join(str(k) for k in self.letters)
        return ".".join(str(k) for k in self.letters)

    def prefix(self, n: int) -> tuple[int, ...]:
        return self.letters[:n]


def parse_letters(w) -> tuple[int, ...]:
    """Accept "121", "1.2.1", a Word or an iterable of ints."""
    if isinstance(w, Word):
        return w.letters
    if isinstance(w, str):
        if w == "":
            return ()
        parts = w.split(".") if "." in w else list(w)
        try:
            return tuple(int(c) for c in parts)
        except ValueError as exc:
            raise InputError(f"cannot parse word {w!r}") from exc
    return tuple(int(k) for k in w)


@dataclass(frozen=True, eq=False)
class IfsSystem:
    maps: tuple[Similitude, ...]
    declared_osc: bool = True
    name: str = "ifs"

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise InputError("an IFS needs at least one map")
        d = maps[0].dimension
        if any(m.dimension != d for m in maps):
            raise InputError("all maps must share one dimension")
        object.__setattr__(self, "maps", maps)

    @property
    def dimension(self) -> int:
        return self.maps[0].dimension

    @property
    def p(self) -> int:
        return len(self.maps)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([m.ratio for m in self.maps])

    @property
    def similarity_dimension(self) -> float:
        return moran_dimension(self.ratios)

    def word(self, w) -> Word:
        letters = parse_letters(w)
        self._check_letters(letters)
        return Word(letters, math.prod(self.maps[k - 1].ratio for k in letters))

    def _check_letters(self, letters: Sequence[int]):
        for k in letters:
            if not 1 <= k <= self.p:
                raise InputError(f"letter {k} out of range 1..{self.p}")

    def default_base(self) -> np.ndarray:
        return self.maps[0].fixed_point()

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return attractor_bbox(self)

    def diameter(self) -> float:
        """Upper bound on |K| (exact in dimension one)."""
        lo, hi = attractor_bbox(self)
        return float(np.linalg.norm(hi - lo))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "maps": [
                {
                    "ratio": m.ratio,
                    "matrix": m.orthogonal.tolist(),
                    "translation": m.translation.tolist(),
                }
                for m in self.maps
            ],
            "osc": self.declared_osc,
        }

    @classmethod
    def from_dict(cls, spec: dict) -> "IfsSystem":
        allowed = {"name", "dimension", "maps", "osc"}
        unknown = set(spec) - allowed
        if unknown:
            raise InputError(f"unknown IFS keys: {sorted(unknown)}")
        if "maps" not in spec:
            raise InputError("IFS file needs a 'maps' list")
        d = spec.get("dimension")
        maps = []
        for i, m in enumerate(spec["maps"]):
            extra = set(m) - {"ratio", "matrix", "translation"}
            if extra:
                raise InputError(f"map {i}: unknown keys {sorted(extra)}")
            try:
                sim = Similitude(m["ratio"], m.get("matrix"), m["translation"])
            except KeyError as exc:
                raise InputError(f"map {i}: missing key {exc}") from exc
            except InputError as exc:
                raise InputError(f"map {i}: {exc}") from exc
            if d is not None and sim.dimension != int(d):
                raise InputError(f"map {i}: translation has dimension {sim.dimension}, file says {d}")
            maps.append(sim)
        return cls(tuple(maps), bool(spec.get("osc", False)), str(spec.get("name", "ifs")))


def load_ifs(source) -> IfsSystem:
    """Load an IFS from a JSON file path, a JSON string, a dict or a builtin name."""
    if isinstance(source, IfsSystem):
        return source
    if isinstance(source, dict):
        return IfsSystem.from_dict(source)
    text = str(source)
    if text in BUILTIN:
        return BUILTIN[text]()
    path = Path(text)
    if path.exists():
        try:
            spec = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        return IfsSystem.from_dict(spec)
    if text.lstrip().startswith("{"):
        return IfsSystem.from_dict(json.loads(text))
    raise InputError(f"IFS file not found: {text}")


def cantor() -> IfsSystem:
    return IfsSystem((Similitude(1 / 3, None, [0.0]), Similitude(1 / 3, None, [2 / 3])), True, "cantor")


def unit_segment() -> IfsSystem:
    return IfsSystem((Similitude(0.5, None, [0.0]), Similitude(0.5, None, [0.5])), True, "segment")


def sierpinski() -> IfsSystem:
    h = math.sqrt(3) / 2
    return IfsSystem(
        (
            Similitude(0.5, None, [0.0, 0.0]),
            Similitude(0.5, None, [0.5, 0.0]),
            Similitude(0.5, None, [0.25, h / 2]),
        ),
        True,
        "sierpinski",
    )


def single_point() -> IfsSystem:
    return IfsSystem((Similitude(0.5, None, [0.25]),), True, "point")


def skewed() -> IfsSystem:
    return IfsSystem((Similitude(0.5, None, [0.0]), Similitude(0.25, None, [0.75])), True, "skewed")


BUILTIN = {
    "cantor": cantor,
    "segment": unit_segment,
    "sierpinski": sierpinski,
    "point": single_point,
    "skewed": skewed,
}


def compose_word(ifs: IfsSystem, w) -> Similitude | "_Identity":
    """S_w = S_{w1} o ... o S_{wn}; the empty word gives the identity."""
    letters = parse_letters(w)
    ifs._check_letters(letters)
    d = ifs.dimension
    if not letters:
        return _Identity(d)
    lin = np.eye(d)
    t = np.zeros(d)
    for k in letters:
        m = ifs.maps[k - 1]
        t = lin @ m.translation + t
        lin = lin @ m.linear
    ratio = math.prod(ifs.maps[k - 1].ratio for k in letters)
    return Similitude(ratio, lin / ratio, t)


@dataclass(frozen=True, eq=False)
class _Identity:
    dimension: int
    ratio: float = 1.0

    @property
    def orthogonal(self):
        return np.eye(self.dimension)

    @property
    def translation(self):
        return np.zeros(self.dimension)

    @property
    def linear(self):
        return np.eye(self.dimension)

    def apply(self, x):
        return _as_point(x, self.dimension).copy()


def moran_dimension(ratios: Iterable[float], tol: float = 1e-12) -> float:
    """Root s of sum(r**s) = 1 by bracketing bisection plus Newton polish."""
    r = np.asarray(list(ratios), dtype=float)
    if r.size == 0:
        raise InputError("moran_dimension needs at least one ratio")
    if np.any(r <= 0) or np.any(r >= 1):
        raise InputError("all ratios must lie in (0,1)")
    if tol <= 0:
        raise InputError("tol must be positive")
    logs = np.log(r)

    def resid(s):
        return math.fsum(np.exp(s * logs)) - 1.0

    if abs(resid(0.0)) <= tol:
        return 0.0
    lo, hi = 0.0, math.log(r.size) / -math.log(r.max()) + 1.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(5):
        f = resid(s)
        if f == 0.0:
            break
        fp = float(np.sum(logs * np.exp(s * logs)))
        step = s - f / fp
        if not lo - 1e-12 <= step <= hi + 1e-12 or abs(resid(step)) >= abs(f):
            break
        s = step
    if abs(resid(s)) > tol:
        raise InputError(f"Moran solver residual {resid(s):.3e} exceeds tol {tol:.1e}")
    return s


@dataclass(frozen=True, eq=False)
class CutSet:
    """The stopping family I(R) with per-word maps S_w kept for anchoring.

    ``linear[k] @ x + translation[k]`` evaluates S_w for the k-th word.
    """

    resolution: float
    words: list[Word]
    log_ratios: np.ndarray
    linear: np.ndarray = field(repr=False)
    translation: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.words)

    @property
    def ratios(self) -> np.ndarray:
        return np.exp(self.log_ratios)

    def anchors(self, base=None, ifs: IfsSystem | None = None) -> np.ndarray:
        if base is None:
            if ifs is None:
                raise InputError("anchors need a base point or the IFS (for its default base)")
            base = ifs.default_base()
        b = _as_point(base, self.translation.shape[1])
        return np.einsum("kij,j->ki", self.linear, b) + self.translation

    def unity_sum(self, s: float) -> float:
        return math.fsum(np.exp(s * self.log_ratios))


def projected_cutset_size(ifs: IfsSystem, R: float) -> float:
    """Upper bound (R * min ratio)**(-s) on #I(R)."""
    s = ifs.similarity_dimension
    return (R * float(ifs.ratios.min())) ** (-s)


def cut_set(ifs: IfsSystem, R: float, cap: int = DEFAULT_CUTSET_CAP) -> CutSet:
    """Enumerate I(R) = {w : ratio(w) <= R < ratio(w minus last letter)}.

    The root is always expanded, so I(1) is the p one-letter words.
    """
    R = float(R)
    if not 0.0 < R <= 1.0:
        raise InputError(f"cut-set resolution must lie in (0,1], got {R}")
    if ifs.p > 1:
        projected = projected_cutset_size(ifs, R)
        if projected > cap:
            raise ResourceError(f"I({R:g}) may hold up to {projected:.3g} words (cap {cap})")
    d = ifs.dimension
    log_r = np.log(ifs.ratios)
    lins = [m.linear for m in ifs.maps]
    trans = [m.translation for m in ifs.maps]
    threshold = math.log(R) + TIE_TOL
    words, logs, out_lin, out_t = [], [], [], []
    stack = [((), 0.0, np.eye(d), np.zeros(d))]
    while stack:
        letters, lr, lin, t = stack.pop()
        if letters and lr <= threshold:
            words.append(letters)
            logs.append(lr)
            out_lin.append(lin)
            out_t.append(t)
            continue
        for k in range(ifs.p - 1, -1, -1):
            stack.append((letters + (k + 1,), lr + log_r[k], lin @ lins[k], lin @ trans[k] + t))
        if len(words) + len(stack) > cap:
            raise ResourceError(f"cut set at R={R:g} exceeds cap {cap}")
    ratio_of = [m.ratio for m in ifs.maps]
    word_objs = [Word(w, math.prod(ratio_of[k - 1] for k in w)) for w in words]
    return CutSet(
        R,
        word_objs,
        np.array(logs),
        np.array(out_lin).reshape(-1, d, d),
        np.array(out_t).reshape(-1, d),
    )


def anchor_point(ifs: IfsSystem, w, base=None) -> np.ndarray:
    """x_w = S_w(base); base defaults to the fixed point of S_1."""
    if base is None:
        base = ifs.default_base()
    return compose_word(ifs, w).apply(_as_point(base, ifs.dimension))


def sample_attractor(ifs: IfsSystem, resolution: float, base=None, cap: int = DEFAULT_CUTSET_CAP) -> np.ndarray:
    """One anchor per word of I(resolution): a |K|*resolution-dense sample of K."""
    cs = cut_set(ifs, resolution, cap=cap)
    return cs.anchors(base, ifs)


def _is_signed_permutation(o: np.ndarray) -> bool:
    a = np.abs(o)
    return bool(np.all((np.abs(a - 1) < 1e-12) | (a < 1e-12)) and np.all(np.abs(a.sum(axis=0) - 1) < 1e-12))


def attractor_bbox(ifs: IfsSystem, max_words: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box containing K.

    Exact when every orthogonal part is a signed permutation (support
    function fixed point); otherwise a rigorous outer box from a ball cover.
    """
    d = ifs.dimension
    if all(_is_signed_permutation(m.orthogonal) for m in ifs.maps):
        # directions index: 2k -> +e_k, 2k+1 -> -e_k
        h = np.zeros(2 * d)
        perm = []
        for m in ifs.maps:
            idx = np.empty(2 * d, dtype=int)
            for k in range(d):
                col = int(np.argmax(np.abs(m.orthogonal[k])))
                sign = m.orthogonal[k, col]
                idx[2 * k] = 2 * col if sign > 0 else 2 * col + 1
                idx[2 * k + 1] = 2 * col + 1 if sign > 0 else 2 * col
            off = np.empty(2 * d)
            off[0::2] = m.translation
            off[1::2] = -m.translation
            perm.append((m.ratio, idx, off))
        for _ in range(5000):
            new = np.max([a * h[idx] + off for a, idx, off in perm], axis=0)
            done = np.max(np.abs(new - h)) <= 1e-16 * max(1.0, np.max(np.abs(new)))
            h = new
            if done:
                break
        return -h[1::2].copy(), h[0::2].copy()
    c = ifs.default_base()
    amax = float(ifs.ratios.max())
    rho = max(float(np.linalg.norm(m.apply(c) - c)) for m in ifs.maps) / (1 - amax)
    R = 1.0
    while ifs.p > 1 and projected_cutset_size(ifs, R / 2) <= max_words and R > 1e-12:
        R /= 2
    pts = sample_attractor(ifs, R)
    pad = R * rho
    return pts.min(axis=0) - pad, pts.max(axis=0) + pad


@dataclass(frozen=True)
class Normalization:
    """y = (x - offset) / scale maps K into the unit cube."""

    offset: tuple[float, ...]
    scale: float

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and not any(self.offset)

    def forward(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.offset)) / self.scale

    def inverse(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.scale + np.asarray(self.offset)


def normalize_ifs(ifs: IfsSystem, tol: float = 1e-12) -> tuple[IfsSystem, Normalization]:
    """Conjugate the IFS by an affine map so that K sits in [0,1]^d.

    Systems already inside the unit cube are returned unchanged.
    """
    lo, hi = attractor_bbox(ifs)
    d = ifs.dimension
    if np.all(lo >= -tol) and np.all(hi <= 1 + tol):
        return ifs, Normalization(tuple([0.0] * d), 1.0)
    side = float(np.max(hi - lo))
    scale = side if side > 0 else 1.0
    norm = Normalization(tuple(lo.tolist()), scale)
    maps = []
    for m in ifs.maps:
        t = (m.linear @ lo + m.translation - lo) / scale
        maps.append(Similitude(m.ratio, m.orthogonal, t))
    return IfsSystem(tuple(maps), ifs.declared_osc, ifs.name), norm
