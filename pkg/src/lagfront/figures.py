"""Matplotlib renderings of the report artifacts."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_KIND_COLORS = {
    "entropic_shock": "crimson",
    "non_entropic_shock": "darkorange",
    "rarefaction_front": "steelblue",
}


def _clean(ax):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)


def front_diagram(solution, path) -> None:
    """Fronts in the (x, t) plane, colored by kind, events marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    seen = set()
    for f in solution.fronts:
        t1 = min(f.death, solution.horizon)
        label = f.kind if f.kind not in seen else None
        seen.add(f.kind)
        ax.plot([f.position(f.birth), f.position(t1)], [f.birth, t1],
                color=_KIND_COLORS.get(f.kind, "gray"), lw=1.2, label=label)
    for e in solution.events:
        ax.plot(e.x, e.t, "ko", ms=3)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_ylim(0, solution.horizon)
    if seen:
        ax.legend(loc="best", fontsize=8)
    _clean(ax)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def ensemble_plot(ensemble, path, barrier=None, max_curves: int = 250) -> None:
    """A subsample of curve trajectories, colored by initial level; the
    barrier curve is overlaid when given."""
    fig, ax = plt.subplots(figsize=(6, 4))
    n = len(ensemble.curves)
    step = max(1, n // max_curves)
    cmap = plt.get_cmap("viridis")
    for c in ensemble.curves[::step]:
        ax.plot(c.xs, c.times, color=cmap(float(c.vs[0])), lw=0.5, alpha=0.6)
    for f in ensemble.solution.fronts:
        t1 = min(f.death, ensemble.solution.horizon)
        ax.plot([f.position(f.birth), f.position(t1)], [f.birth, t1],
                color="black", lw=1.5)
    if barrier is not None:
        ax.plot(barrier.xs, barrier.times, color="red", lw=2.0,
                label="barrier")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(f"{ensemble.side} curves ({n} total, every {step}th shown)",
                 fontsize=9)
    _clean(ax)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def convergence_plot(levels: Sequence[float], series: dict, path,
                     xlabel: str = "resolution") -> None:
    """Log-log error curves per metric."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, errs in series.items():
        pairs = [(l, e) for l, e in zip(levels, errs) if e > 0]
        if not pairs:
            continue
        ax.loglog([p[0] for p in pairs], [p[1] for p in pairs],
                  "o-", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _clean(ax)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
