"""Report figures rendered straight to image files (headless backend)."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

COVERAGE_COLORS = {
    "both": "#e75480",  # pink
    "rfl_only": "tab:blue",
    "other_only": "tab:green",
    "neither": "tab:red",
}


def save_coverage_map(classes, path: str | Path, title: str = "") -> Path:
    """Scatter the per-location coverage labels on their coordinates."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 6))
    for label, color in COVERAGE_COLORS.items():
        pts = [(c.lon, c.lat) for c in classes if c.label == label and c.lat is not None]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, c=color, label=label, s=28, edgecolors="none")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_mre_curves(rows: list[dict], path: str | Path, title: str = "") -> Path:
    """Mean MRE percent versus k, one line per method."""
    path = Path(path)
    methods = []
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    fig, ax = plt.subplots(figsize=(7, 5))
    for method in methods:
        pts = sorted((r["k"], r["mre_pct_mean"]) for r in rows if r["method"] == method)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.set_xlabel("buses selected (k)")
    ax.set_ylabel("mean MRE (%)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_gain_trajectory(result, path: str | Path, title: str = "") -> Path:
    """Objective value after each greedy pick."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(result.gain_trajectory) + 1), result.gain_trajectory, marker="o")
    ax.set_xlabel("picks")
    ax.set_ylabel(f"{result.objective_kind} gain")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_rho_sweep(sweep: dict, path: str | Path, title: str = "") -> Path:
    """Mean PSC against rho, with the stop-coverage greedy as a horizontal mark."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sweep["rhos"], sweep["mean_psc"], marker="o", label="decay objective")
    ax.axhline(sweep["mcl_mean_psc"], color="tab:green", linestyle="--", label="stop-coverage greedy")
    ax.set_xlabel("rho")
    ax.set_ylabel("mean PSC (%)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
