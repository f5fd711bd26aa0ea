"""Diagnostic figures for the report path.

Figures are written next to the CSV/JSON output; they are never used as
test oracles.  SVG output carries no creation date so reruns are identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "svg.hashsalt": "ssmf",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    meta = {"Date": None} if fmt == "svg" else {}
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_curve(curve, path, reference=None, title: str | None = None, ylabel: str | None = None) -> Path:
    """Line plot of a SpectrumCurve, with an optional reference callable."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(curve.x, curve.y, "o-", label="estimate")
        if reference is not None:
            xs = np.linspace(curve.x.min(), curve.x.max(), 200)
            ax.plot(xs, reference(xs), "--", color="0.4", label="reference")
            ax.legend()
        ax.set_xlabel(curve.axis)
        ax.set_ylabel(ylabel or "")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_tau(tau, path, s: float | None = None) -> Path:
    """Per-level T_j(q), the fitted tau and, when s is given, the line s(q - 1)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        T = np.asarray(tau.per_level.get("T", []))
        levels = tau.per_level.get("levels", [])
        cmap = plt.get_cmap("viridis")
        for k, j in enumerate(levels):
            ax.plot(tau.x, T[:, k], color=cmap(k / max(1, len(levels) - 1)), alpha=0.5, lw=0.8)
        ax.plot(tau.x, tau.y, "o-", color="k", label="fitted slope")
        if s is not None:
            ax.plot(tau.x, s * (tau.x - 1), "--", color="C3", label="s(q-1)")
        ax.set_xlabel("q")
        ax.set_ylabel("tau(q)")
        ax.legend()
        return _save(fig, path)


def plot_holder(est, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(est.log_radii, est.log_masses, "o", label="log mu(B(x,r))")
        xs = np.array([est.log_radii.min(), est.log_radii.max()])
        ax.plot(xs, est.slope * xs + est.intercept, "-", label=f"slope {est.slope:.4f}")
        ax.set_xlabel("log r")
        ax.set_ylabel("log mass")
        ax.legend()
        return _save(fig, path)


def plot_boxdim(fit: dict, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = -np.log(np.asarray(fit["r"]))
        y = np.log(np.asarray(fit["counts"], dtype=float))
        ax.plot(x, y, "o", label="log N_r")
        ax.plot(x, fit["slope"] * x + fit["intercept"], "-", label=f"slope {fit['slope']:.4f}")
        ax.set_xlabel("-log r")
        ax.set_ylabel("log N_r")
        ax.legend()
        return _save(fig, path)


def plot_cascade(tree, path) -> Path:
    """Ball families per level; only the first coordinate is drawn."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for fam in tree.levels:
            for b in fam.balls:
                x = float(b.center[0])
                ax.plot([x - b.radius, x + b.radius], [fam.level, fam.level], color="C0", lw=3, solid_capstyle="butt")
        ax.set_ylabel("level p")
        ax.set_xlabel("x_1")
        ax.invert_yaxis()
        return _save(fig, path)


def plot_measure(mu, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if mu.dimension == 1:
            ax.vlines(mu.points[:, 0], 0, mu.masses, lw=0.8)
            ax.set_xlabel("x")
            ax.set_ylabel("mass")
        else:
            ax.scatter(mu.points[:, 0], mu.points[:, 1], s=4 + 400 * mu.masses / mu.masses.max(), lw=0)
            ax.set_aspect("equal")
        return _save(fig, path)
