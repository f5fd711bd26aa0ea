"""Command line front end: ``ssmf <command> [options]``.

Every command prints a JSON envelope
``{"command", "inputs", "results", "diagnostics"}`` (or, with
``--format csv``, the command's table).  With an output directory
(``--out-dir`` or ``$SSMF_OUTPUT_DIR``) the JSON, the CSV and a figure are
also written there.  Exit status: 0 success, 1 failed verification,
2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ssmf import blmetric, measures, spectrum
from ssmf.errors import InputError, SsmfError
from ssmf.ifs import IfsSystem, cut_set, load_ifs, moran_dimension, normalize_ifs

log = logging.getLogger("ssmf")

OUTPUT_ENV = "SSMF_OUTPUT_DIR"

COMMANDS = (
    "dim",
    "cutset",
    "build-measure",
    "bl-dist",
    "tau",
    "legendre",
    "coarse",
    "holder",
    "boxdim",
    "cascade",
    "cascade-check",
    "verify-lemma",
    "verify-formalism",
)

NEEDS_IFS = {"dim", "cutset", "boxdim", "cascade", "cascade-check", "verify-lemma"}


def parse_grid(text: str, key: str) -> list[float]:
    """``a:b:n`` -> n evenly spaced points from a to b inclusive; also a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"--{key}: grid syntax is start:end:count, got {text!r}")
        try:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise InputError(f"--{key}: malformed grid {text!r}") from exc
        if not a < b:
            raise InputError(f"--{key}: start < end required (got {text!r})")
        if n < 2:
            raise InputError(f"--{key}: count >= 2 required (got {text!r})")
        return np.linspace(a, b, n).tolist()
    vals = _floats(text, key)
    if len(vals) < 1:
        raise InputError(f"--{key}: empty grid")
    return vals


def parse_levels(text: str, key: str = "levels") -> list[int]:
    parts = str(text).split(":")
    try:
        if len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        elif len(parts) == 1:
            lo = hi = int(parts[0])
        else:
            raise ValueError
    except ValueError as exc:
        raise InputError(f"--{key}: expected lo:hi, got {text!r}") from exc
    if lo < 1 or hi < lo:
        raise InputError(f"--{key}: need 1 <= lo <= hi (got {text!r})")
    return [lo, hi]


def parse_radii(text: str, key: str) -> list[float]:
    """Comma list, or ``geom:B:m0:m1`` for B^-m, m = m0..m1."""
    text = str(text).strip()
    if text.startswith("geom:"):
        parts = text.split(":")
        try:
            base, m0, m1 = float(parts[1]), int(parts[2]), int(parts[3])
        except (IndexError, ValueError) as exc:
            raise InputError(f"--{key}: expected geom:B:m0:m1, got {text!r}") from exc
        if base <= 1 or m1 <= m0:
            raise InputError(f"--{key}: need B > 1 and m0 < m1 (got {text!r})")
        return [base**-m for m in range(m0, m1 + 1)]
    vals = _floats(text, key)
    if any(v <= 0 for v in vals):
        raise InputError(f"--{key}: radii must be positive")
    return vals


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"--{key}: expected comma-separated numbers, got {text!r}") from exc


@dataclass
class RunConfig:
    command: str
    options: dict
    seed: int = 0
    out_dir: str | None = None
    fmt: str = "json"
    plot: bool = True
    plot_format: str = "svg"
    files: dict = field(default_factory=dict, repr=False)

    def resolved(self) -> dict:
        """The config as embedded in reports (output location excluded)."""
        return {"command": self.command, "seed": self.seed, **self.options}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--ifs", help="IFS JSON file or builtin name (cantor, segment, sierpinski, point, skewed)")
    p.add_argument("--measure", help="measure spec JSON (file or inline) or serialized atoms (.csv/.json)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--plot-format", choices=("svg", "png", "pdf"), default=None)
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssmf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        return p

    cmd("dim", "similarity dimension from the Moran equation")
    p = cmd("cutset", "enumerate the cut set I(R)")
    p.add_argument("--R", dest="R", type=float)
    p = cmd("build-measure", "build and serialize a measure")
    p = cmd("bl-dist", "bounded-Lipschitz distance between two measures")
    p.add_argument("--mu")
    p.add_argument("--nu")
    for name in ("tau", "legendre", "verify-formalism"):
        p = cmd(name, {"tau": "L^q spectrum", "legendre": "Legendre transform of tau",
                       "verify-formalism": "check tau = s(q-1) and its Legendre transform"}[name])
        p.add_argument("--q")
        p.add_argument("--levels")
        if name != "tau":
            p.add_argument("--h")
        if name == "legendre":
            p.add_argument("--tau-csv")
        if name == "verify-formalism":
            p.add_argument("--tol", type=float)
    p = cmd("coarse", "coarse (large-deviation) spectrum")
    p.add_argument("--levels")
    p.add_argument("--h")
    p.add_argument("--eps", type=float)
    p.add_argument("--min-count", type=int)
    p = cmd("holder", "local Hoelder exponent at a point")
    p.add_argument("--point")
    p.add_argument("--radii")
    p = cmd("boxdim", "packing-based upper box dimension")
    p.add_argument("--r", dest="r")
    for name in ("cascade", "cascade-check"):
        p = cmd(name, "build the cascade ball families" if name == "cascade" else "mass-exponent diagnostics of a cascade")
        p.add_argument("--theta", type=float)
        p.add_argument("--depth", type=int)
        p.add_argument("--J1", dest="J1", type=int)
        p.add_argument("--schedule", help="comma list of J values (default geometric)")
        p.add_argument("--target-h", dest="target_h", type=float, help="target exponent h in (0, s]; sets theta = s/h")
        if name == "cascade-check":
            p.add_argument("--balls", type=int)
    p = cmd("verify-lemma", "ball-mass lower bound around cut-set anchors for a typical approximant")
    p.add_argument("--theta", type=float)
    p.add_argument("--J", dest="J", type=int)
    p.add_argument("--n", dest="n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--nu-size", type=int)
    return parser


DEFAULTS = {
    "tau": {"q": "0:1:11", "levels": "6:12"},
    "legendre": {"q": "0:1:11", "levels": "6:12", "h": None},
    "verify-formalism": {"q": "0:1:11", "levels": "6:12", "h": None, "tol": 0.05},
    "coarse": {"levels": "6:12", "h": "0:1.2:25", "eps": 0.05, "min_count": 2},
    "holder": {"point": None, "radii": None},
    "boxdim": {"r": "geom:2:3:9"},
    "cascade": {"theta": 1.0, "depth": 3, "J1": 2, "schedule": None, "target_h": None},
    "cascade-check": {"theta": 1.0, "depth": 3, "J1": 2, "schedule": None, "target_h": None, "balls": 100},
    "verify-lemma": {"theta": 1.0, "J": 8, "n": 16, "eps": 0.1, "nu_size": 16},
    "cutset": {"R": None},
}

COMMON_KEYS = {"ifs", "measure", "seed", "out_dir", "fmt", "no_plot", "plot_format", "config", "verbose", "command", "mu", "nu", "tau_csv"}


def _read(path: str, files: dict) -> str:
    if path in files:
        return files[path]
    p = Path(path)
    if not p.exists():
        raise InputError(f"file not found: {path}")
    return p.read_text()


def parse_config(argv: list[str], files: dict | None = None) -> RunConfig:
    """Parse and validate a command line into a RunConfig.

    ``files`` maps paths to already-loaded texts; anything not in it is read
    from disk.
    """
    files = dict(files or {})
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        raise InputError("invalid command line (see usage above)") from exc
    args = vars(ns)
    command = args["command"]
    defaults = dict(DEFAULTS.get(command, {}))
    if args.get("config"):
        try:
            extra = json.loads(_read(args["config"], files))
        except json.JSONDecodeError as exc:
            raise InputError(f"--config: invalid JSON ({exc})") from exc
        allowed = set(defaults) | {k for k in COMMON_KEYS if k not in ("config", "command")}
        unknown = set(extra) - allowed
        if unknown:
            raise InputError(f"--config: unknown keys {sorted(unknown)} for command {command}")
        for k, v in extra.items():
            if args.get(k) in (None, False):
                args[k] = v
    opts: dict = {}
    for k in defaults:
        v = args.get(k)
        opts[k] = defaults[k] if v is None else v

    if command in NEEDS_IFS and not args.get("ifs"):
        raise InputError(f"--ifs is required for {command}")
    if command in ("tau", "legendre", "verify-formalism", "coarse", "holder", "build-measure") and not (
        args.get("ifs") or args.get("measure") or args.get("tau_csv")
    ):
        raise InputError(f"--ifs or --measure is required for {command}")
    if command == "build-measure" and not args.get("measure"):
        raise InputError("--measure is required for build-measure")
    if command == "bl-dist" and not (args.get("mu") and args.get("nu")):
        raise InputError("--mu and --nu are required for bl-dist")
    if command == "cutset" and opts.get("R") is None:
        raise InputError("--R is required for cutset")
    if command == "holder" and (opts.get("point") is None or opts.get("radii") is None):
        raise InputError("--point and --radii are required for holder")

    for k in ("ifs", "measure", "mu", "nu", "tau_csv"):
        if args.get(k):
            opts[k] = args[k]
            src = str(args[k])
            if k == "ifs" and src in _builtin_names():
                continue
            if src.lstrip().startswith("{"):
                continue
            files.setdefault(src, _read(src, files))

    # grids are validated here so errors name the offending flag
    if "q" in opts:
        opts["q"] = parse_grid(opts["q"], "q")
    if "h" in opts and opts["h"] is not None:
        opts["h"] = parse_grid(opts["h"], "h")
    if "levels" in opts:
        opts["levels"] = parse_levels(opts["levels"])
    if command == "holder":
        opts["point"] = _floats(opts["point"], "point")
        opts["radii"] = parse_radii(opts["radii"], "radii")
    if command == "boxdim":
        opts["r"] = parse_radii(opts["r"], "r")
    if opts.get("schedule") is not None:
        opts["schedule"] = [int(v) for v in _floats(opts["schedule"], "schedule")]
    if command == "verify-formalism" and opts["tol"] <= 0:
        raise InputError("--tol must be positive")

    out_dir = args.get("out_dir") or os.environ.get(OUTPUT_ENV) or None
    return RunConfig(
        command=command,
        options=opts,
        seed=int(args["seed"]) if args.get("seed") is not None else 0,
        out_dir=out_dir,
        fmt=args.get("fmt") or "json",
        plot=not args.get("no_plot"),
        plot_format=args.get("plot_format") or "svg",
        files=files,
    )


def _builtin_names():
    from ssmf.ifs import BUILTIN

    return BUILTIN


@dataclass
class Report:
    envelope: dict
    table: list[list] = field(default_factory=list)
    header: list[str] = field(default_factory=list)
    exit_code: int = 0
    figures: list = field(default_factory=list)  # (name, callable(path))

    def json_text(self) -> str:
        return json.dumps(_jsonable(self.envelope), sort_keys=True, indent=2)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.header:
            w.writerow(self.header)
        for row in self.table:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class _Context:
    """Lazily resolved IFS and measure for one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.opts = config.options
        self.diagnostics: dict = {}
        self._ifs = None
        self._norm = None

    @property
    def ifs(self) -> IfsSystem:
        if self._ifs is None:
            src = self.opts.get("ifs")
            if src is None:
                raise InputError("--ifs is required")
            text = self.config.files.get(src)
            raw = load_ifs(json.loads(text) if text is not None else src)
            self._ifs, self._norm = normalize_ifs(raw)
            self.diagnostics["normalization"] = {"offset": list(self._norm.offset), "scale": self._norm.scale}
            self.diagnostics["declared_osc"] = raw.declared_osc
        return self._ifs

    def load_measure(self, src: str | None, default_resolution: float | None = None) -> measures.AtomicMeasure:
        if src is None:
            if default_resolution is None:
                raise InputError("--measure is required")
            self.diagnostics["measure"] = f"natural measure at R = {default_resolution:g}"
            return measures.natural_measure(self.ifs, default_resolution)
        text = self.config.files.get(src)
        if text is None and src.lstrip().startswith("{"):
            text = src
        if src.endswith(".csv"):
            return measures.measure_from_csv(text)
        data = json.loads(text)
        if isinstance(data, list):
            return measures.measure_from_rows(data)
        spec = dict(data)
        spec.setdefault("seed", self.config.seed)
        kind = spec.get("kind")
        return measures.build_measure(spec, None if kind == "atomic" else self.ifs)


def run(config: RunConfig) -> Report:
    """Dispatch one command and assemble its report."""
    ctx = _Context(config)
    handler = _HANDLERS[config.command]
    results, header, table, exit_code, figures = handler(ctx)
    envelope = {
        "command": config.command,
        "inputs": _inputs(config, ctx),
        "results": results,
        "diagnostics": ctx.diagnostics,
    }
    return Report(envelope, table, header, exit_code, figures)


def _inputs(config: RunConfig, ctx: _Context) -> dict:
    out = config.resolved()
    for k in ("ifs", "measure", "mu", "nu", "tau_csv"):
        src = out.get(k)
        if src is None:
            continue
        text = config.files.get(src)
        if k == "ifs":
            out[k] = ctx.ifs.to_dict() if ctx._ifs is not None else src
        elif text is not None and not src.endswith(".csv"):
            try:
                out[k] = {"source": src, "content": json.loads(text)}
            except json.JSONDecodeError:
                out[k] = src
        elif text is not None:
            out[k] = {"source": src, "content": text}
    return out


def _auto_resolution(levels) -> float:
    return 2.0 ** -(int(levels[-1]) + 2)


def _h_grid(ctx, s: float) -> list[float]:
    h = ctx.opts.get("h")
    if h is None:
        h = np.linspace(0.1 * s, s, 10).tolist()
        ctx.opts["h"] = h
    return h


def _do_dim(ctx):
    ifs = ctx.ifs
    s = moran_dimension(ifs.ratios)
    res = {"s": s, "p": ifs.p, "ratios": ifs.ratios.tolist(), "declared_osc": ifs.declared_osc}
    return res, ["s"], [[s]], 0, []


def _do_cutset(ctx):
    ifs = ctx.ifs
    cs = cut_set(ifs, ctx.opts["R"])
    s = moran_dimension(ifs.ratios)
    anchors = cs.anchors(ifs=ifs)
    table = [[str(w), w.ratio] + a.tolist() for w, a in zip(cs.words, anchors)]
    header = ["word", "ratio"] + [f"x{i + 1}" for i in range(ifs.dimension)]
    res = {"count": len(cs), "unity_sum": cs.unity_sum(s), "s": s, "words": [str(w) for w in cs.words]}
    return res, header, table, 0, []


def _do_build_measure(ctx):
    mu = ctx.load_measure(ctx.opts["measure"])
    rows = mu.rows()
    header = [f"x{i + 1}" for i in range(mu.dimension)] + ["mass"]
    res = {"atoms": rows, "n_atoms": len(mu), "total_mass": mu.total_mass}
    return res, header, rows, 0, [("measure", lambda p: _plot("plot_measure", mu, p))]


def _do_bl_dist(ctx):
    mu = ctx.load_measure(ctx.opts["mu"])
    nu = ctx.load_measure(ctx.opts["nu"])
    dist, wit = blmetric.bl_distance(mu, nu)
    witness = [list(map(float, x)) + [float(v)] for x, v in zip(wit.support, wit.values)]
    ctx.diagnostics["witness_violation"] = wit.max_violation()
    header = [f"x{i + 1}" for i in range(mu.dimension)] + ["f"]
    return {"distance": dist, "witness": witness}, header, witness, 0, []


def _measure_for_levels(ctx):
    levels = ctx.opts["levels"]
    return ctx.load_measure(ctx.opts.get("measure"), _auto_resolution(levels) if ctx.opts.get("ifs") else None)


def _s_of(ctx) -> float | None:
    return moran_dimension(ctx.ifs.ratios) if ctx.opts.get("ifs") else None


def _do_tau(ctx):
    mu = _measure_for_levels(ctx)
    tau = spectrum.tau_estimate(mu, ctx.opts["levels"], ctx.opts["q"])
    s = _s_of(ctx)
    res = {
        "q": tau.x,
        "tau": tau.y,
        "window_min": tau.per_level["window_min"],
        "levels": tau.per_level["levels"],
        "T": tau.per_level["T"],
        "residual": tau.fit["residual"],
    }
    ctx.diagnostics["resolution_ok"] = tau.meta["resolution_ok"]
    table = [[q, t, w] for q, t, w in zip(tau.x.tolist(), tau.y.tolist(), tau.per_level["window_min"].tolist())]
    return res, ["q", "tau", "window_min"], table, 0, [("tau", lambda p: _plot("plot_tau", tau, p, s=s))]


def _read_tau_csv(text: str) -> spectrum.SpectrumCurve:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or "q" not in rows[0] or "tau" not in rows[0]:
        raise InputError("--tau-csv needs columns q,tau")
    return spectrum.SpectrumCurve("q", [float(r["q"]) for r in rows], [float(r["tau"]) for r in rows])


def _do_legendre(ctx):
    if ctx.opts.get("tau_csv"):
        tau = _read_tau_csv(ctx.config.files[ctx.opts["tau_csv"]])
    else:
        tau = spectrum.tau_estimate(_measure_for_levels(ctx), ctx.opts["levels"], ctx.opts["q"])
    s = _s_of(ctx) if ctx.opts.get("ifs") else float(-tau(0.0))
    h = _h_grid(ctx, s)
    leg = spectrum.legendre_transform(tau, h)
    res = {"h": leg.x, "legendre": leg.y, "argmin_q": leg.meta["argmin_q"]}
    table = [[a, b] for a, b in zip(leg.x.tolist(), leg.y.tolist())]
    fig = ("legendre", lambda p: _plot("plot_curve", leg, p, reference=lambda x: x, ylabel="tau*(h)"))
    return res, ["h", "legendre"], table, 0, [fig]


def _do_coarse(ctx):
    mu = _measure_for_levels(ctx)
    o = ctx.opts
    curve = spectrum.coarse_spectrum(mu, o["levels"], parse_grid(o["h"], "h") if isinstance(o["h"], str) else o["h"], o["eps"], o["min_count"])
    res = {"h": curve.x, "f": curve.y, "levels": curve.per_level["levels"], "per_level": curve.per_level["f"]}
    table = [[a, b] for a, b in zip(curve.x.tolist(), curve.y.tolist())]
    fig = ("coarse", lambda p: _plot("plot_curve", curve, p, ylabel="f(h)"))
    return res, ["h", "f"], table, 0, [fig]


def _do_holder(ctx):
    radii = ctx.opts["radii"]
    mu = ctx.load_measure(ctx.opts.get("measure"), min(radii) / 64 if ctx.opts.get("ifs") else None)
    est = spectrum.local_holder(mu, ctx.opts["point"], radii)
    table = [[r, m] for r, m in zip(est.radii.tolist(), np.exp(est.log_masses).tolist())]
    return est.as_dict(), ["r", "mass"], table, 0, [("holder", lambda p: _plot("plot_holder", est, p))]


def _do_boxdim(ctx):
    est, fit = spectrum.upper_box_dimension(ctx.ifs, ctx.opts["r"])
    table = [[r, c] for r, c in zip(fit["r"], fit["counts"])]
    return {"estimate": est, **fit}, ["r", "count"], table, 0, [("boxdim", lambda p: _plot("plot_boxdim", fit, p))]


def _tree(ctx):
    o = ctx.opts
    h = o.get("target_h")
    if h is not None:
        s = moran_dimension(ctx.ifs.ratios)
        if not 0 < h <= s:
            raise InputError(f"--target-h must lie in (0, s] = (0, {s:.6g}]")
        o["theta"] = s / h
        ctx.diagnostics["theta_from_h"] = {"h": h, "s": s, "theta": o["theta"]}
    return measures.build_cascade(ctx.ifs, o["theta"], o.get("schedule"), o["depth"], J1=o["J1"])


def _do_cascade(ctx):
    tree = _tree(ctx)
    table = []
    for fam in tree.levels:
        for k, b in enumerate(fam.balls):
            table.append([fam.level, "".join(map(str, b.word)), b.radius, float(b.mass), str(b.mass), -1 if b.parent is None else b.parent] + b.center.tolist())
    header = ["level", "word", "radius", "mass", "mass_exact", "parent"] + [f"x{i + 1}" for i in range(ctx.ifs.dimension)]
    res = {
        "levels": tree.level_schedule,
        "family_sizes": [len(f.balls) for f in tree.levels],
        "pool_sizes": [f.pool_sizes for f in tree.levels],
        "child_counts": [f.child_counts for f in tree.levels],
        "growth_ok": tree.growth_ok,
    }
    return res, header, table, 0, [("cascade", lambda p: _plot("plot_cascade", tree, p))]


def _do_cascade_check(ctx):
    tree = _tree(ctx)
    rep = spectrum.cascade_scaling_check(tree, moran_dimension(ctx.ifs.ratios), ctx.opts["balls"], ctx.config.seed)
    table = [[lv["level"], lv["J"], lv["cells"], lv["exponent_min"], lv["exponent_max"], lv["window"][0], lv["window"][1], lv["window_ok"]] for lv in rep["levels"]]
    header = ["level", "J", "cells", "exponent_min", "exponent_max", "window_lo", "window_hi", "window_ok"]
    return rep, header, table, 0, [("cascade", lambda p: _plot("plot_cascade", tree, p))]


def _do_verify_lemma(ctx):
    o = ctx.opts
    ifs = ctx.ifs
    s = moran_dimension(ifs.ratios)
    nu = measures.random_reference_measure(ifs, o["nu_size"], ctx.config.seed)
    mu = measures.typical_approximant(ifs, o["n"], o["J"], nu)
    rep = spectrum.verify_majholdmu(mu, ifs, o["theta"], o["J"], s, o["eps"], beta=o["J"] / o["n"])
    table = [[k, v] for k, v in sorted(rep.items())]
    return rep, ["key", "value"], table, 0 if rep["passed"] else 1, []


def _do_verify_formalism(ctx):
    o = ctx.opts
    mu = _measure_for_levels(ctx)
    s = _s_of(ctx)
    if s is None:
        raise InputError("verify-formalism needs --ifs for the target dimension")
    rep = spectrum.verify_formalism(mu, s, o["q"], _h_grid(ctx, s), o["levels"], o["tol"])
    tau, leg = rep["_curves"]
    table = [[q, t, e] for q, t, e in zip(rep["q"], rep["tau_fit"], rep["tau_error"])]
    figs = [
        ("tau", lambda p: _plot("plot_tau", tau, p, s=s)),
        ("legendre", lambda p: _plot("plot_curve", leg, p, reference=lambda x: x, ylabel="tau*(h)")),
    ]
    return rep, ["q", "tau", "error"], table, 0 if rep["passed"] else 1, figs


def _plot(name, *args, **kwargs):
    from ssmf import plotting

    return getattr(plotting, name)(*args, **kwargs)


_HANDLERS = {
    "dim": _do_dim,
    "cutset": _do_cutset,
    "build-measure": _do_build_measure,
    "bl-dist": _do_bl_dist,
    "tau": _do_tau,
    "legendre": _do_legendre,
    "coarse": _do_coarse,
    "holder": _do_holder,
    "boxdim": _do_boxdim,
    "cascade": _do_cascade,
    "cascade-check": _do_cascade_check,
    "verify-lemma": _do_verify_lemma,
    "verify-formalism": _do_verify_formalism,
}


def write_outputs(report: Report, config: RunConfig) -> list[Path]:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = config.command
    written = [out / f"{stem}.json", out / f"{stem}.csv"]
    written[0].write_text(report.json_text() + "\n")
    written[1].write_text(report.csv_text())
    if config.plot:
        for name, draw in report.figures:
            path = out / f"{stem}-{name}.{config.plot_format}"
            draw(path)
            written.append(path)
    return written


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(argv)
        report = run(config)
    except SsmfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if config.fmt == "csv":
        print(report.csv_text(), end="")
    elif config.command == "bl-dist":
        # bl-dist prints the bare result; the envelope goes to the output directory
        print(json.dumps(_jsonable(report.envelope["results"]), sort_keys=True))
    else:
        print(report.json_text())
    if config.out_dir:
        for path in write_outputs(report, config):
            log.info("wrote %s", path)
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
