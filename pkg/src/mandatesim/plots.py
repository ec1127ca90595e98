"""Render report figures to files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import IterationRecord


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_loss_cdfs(curves, path: str | Path) -> Path:
    """All mandate levels' loss CDFs on one set of axes."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        ax.step(
            curve.thresholds,
            curve.cumulative,
            where="post",
            label=f"mandate {curve.mandate:g}",
        )
    ax.set_xlabel("relative loss")
    ax.set_ylabel("cumulative fraction of cells")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_useful_histograms(histograms, path: str | Path) -> Path:
    """Useful-run counts per parameter value, one line per parameter."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for hist in histograms.values():
        ax.plot(hist.values, hist.counts, marker="o", markersize=3, label=hist.param)
    ax.set_xlabel("parameter value")
    ax.set_ylabel("useful runs")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_axis_sweep(sweep, path: str | Path) -> Path:
    """Mean relative loss along one axis, one line per mandate level."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mandate, row in zip(sweep.mandates, sweep.losses):
        ax.plot(sweep.axis_values, row, marker="o", markersize=3, label=f"mandate {mandate:g}")
    ax.set_xlabel(sweep.axis)
    ax.set_ylabel("mean relative loss")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_time_to_total_loss(ttl, path: str | Path) -> Path:
    """Iteration counts of total-loss runs, one line per mandate with any."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = False
    for mandate in sorted(ttl):
        stats = ttl[mandate]
        if not stats.histogram:
            continue
        xs = [i for i, _ in stats.histogram]
        ys = [c for _, c in stats.histogram]
        ax.plot(xs, ys, marker="o", markersize=3, label=f"mandate {mandate:g}")
        plotted = True
    ax.set_xlabel("iterations to total loss")
    ax.set_ylabel("runs")
    if plotted:
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "no total-loss runs", ha="center", va="center", transform=ax.transAxes)
    return _finish(fig, path)


def plot_series(series: tuple[IterationRecord, ...], path: str | Path) -> Path:
    """Total defender assets over a single run."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot([r.iteration for r in series], [r.total_defender_assets for r in series])
    ax.set_xlabel("iteration")
    ax.set_ylabel("total defender assets")
    ax.set_ylim(bottom=0)
    return _finish(fig, path)


def plot_wta_curve(fit, observations, estimate, path: str | Path) -> Path:
    """Fitted acceptance curve over the observations, crossover marked."""
    import numpy as np

    fig, ax = plt.subplots(figsize=(7, 4.5))
    prices = np.array([o.price for o in observations])
    accepted = np.array([1.0 if o.accepted else 0.0 for o in observations])
    ax.scatter(prices, accepted, s=12, alpha=0.4, label="observations")
    xs = np.linspace(prices.min(), prices.max(), 200)
    ax.plot(xs, 1.0 / (1.0 + np.exp(-(fit.intercept + fit.slope * xs))), label="fit")
    ax.axvline(estimate.value, linestyle="--", linewidth=1, label=f"crossover {estimate.value:.2f}")
    ax.axhline(0.5, linestyle=":", linewidth=1)
    ax.set_xlabel("price")
    ax.set_ylabel("acceptance probability")
    ax.legend(fontsize=8)
    return _finish(fig, path)
