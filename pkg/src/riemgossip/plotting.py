"""Figures for run traces: per-agent train cost and pairwise consensus distance."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import RunTrace  # noqa: E402

__all__ = ["render_trace"]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 120,
}


def _positive(y: np.ndarray) -> np.ndarray:
    # log axes cannot show exact zeros; mask them rather than clip
    return np.where(y > 0, y, np.nan)


def render_trace(trace: RunTrace, path: str | Path, title: str | None = None) -> Path:
    """Save a two-panel figure (train cost, consensus distance) to ``path``.

    The file format follows the suffix (``.png``, ``.pdf``, ``.svg``).
    """
    path = Path(path)
    slots = trace.slots()
    with plt.rc_context(STYLE):
        fig, (ax_cost, ax_dist) = plt.subplots(1, 2, figsize=(8.0, 3.2), constrained_layout=True)
        costs = trace.costs()
        for k in range(trace.n_agents):
            ax_cost.plot(slots, _positive(costs[:, k]), lw=1.0, label=f"agent {k + 1}")
        ax_cost.set_yscale("log")
        ax_cost.set_xlabel("time slot")
        ax_cost.set_ylabel("train cost")

        dist = trace.distances()
        for col, (i, k) in enumerate(trace.pairs):
            ax_dist.plot(slots, _positive(dist[:, col]), lw=1.0, label=f"d({i},{k})")
        ax_dist.set_yscale("log")
        ax_dist.set_xlabel("time slot")
        ax_dist.set_ylabel("geodesic distance")

        for ax in (ax_cost, ax_dist):
            if len(ax.lines) <= 8:
                ax.legend(frameon=False)
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)
    return path
