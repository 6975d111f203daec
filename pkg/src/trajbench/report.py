"""Figure rendering for the report path: elbow curves, per-measure performance
curves and top-setup frequency bars, written as PNG files next to the CSVs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import PerformanceRecord, RankTable, top_frequencies
from .core import DistanceSpec
from .metrics import MEASURES
from .reference import ElbowCurve


def save_elbow_figure(
    curve: ElbowCurve, path: Union[str, Path], *,
    chosen_k: Optional[int] = None, title: str = "within-cluster average distance",
) -> None:
    """Elbow curve with a mean +- 2 std band and an optional chosen-k marker."""
    ks = np.array(curve.ks)
    means = np.array(curve.means)
    stds = np.array(curve.stds)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ks, means, marker="o", lw=1.2)
    ax.fill_between(ks, means - 2 * stds, means + 2 * stds, alpha=0.25)
    if chosen_k is not None:
        ax.axvline(chosen_k, color="tab:red", ls="--", lw=1, label=f"chosen k = {chosen_k}")
        ax.legend(frameon=False)
    ax.set_xlabel("number of clusters")
    ax.set_ylabel("mean distance to centroid")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_frequency_figure(table: RankTable, path: Union[str, Path]) -> None:
    """Side-by-side bars: share of the top setups per distance and per algorithm."""
    dist_freq, algo_freq = top_frequencies(table)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, freq, label in zip(axes, (dist_freq, algo_freq), ("distance", "algorithm")):
        names = list(freq)
        ax.bar(names, [freq[n] for n in names], color="tab:blue")
        ax.set_ylim(0, 1)
        ax.set_ylabel(f"share of top {len(table.top)} setups")
        ax.set_title(f"top setups by {label}")
        ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_measure_curves(
    records: Sequence[PerformanceRecord],
    distance: DistanceSpec,
    path: Union[str, Path],
) -> None:
    """One subplot per measure: mean +- 2 std versus cluster count, one line
    per k-consuming algorithm of the given distance."""
    rows = [r for r in records if r.setup.distance == distance and r.setup.cluster_count is not None]
    if not rows:
        raise ValueError(f"no k-consuming records for {distance.key()}")
    algo_keys = sorted({r.setup.algorithm.key() for r in rows})
    fig, axes = plt.subplots(2, 4, figsize=(15, 6), sharex=True)
    axes = axes.ravel()
    for ax, measure in zip(axes, MEASURES):
        for algo_key in algo_keys:
            pts = sorted(
                (r.setup.cluster_count, r.mean, r.std)
                for r in rows
                if r.measure == measure and r.setup.algorithm.key() == algo_key
            )
            if not pts:
                continue
            ks = np.array([p[0] for p in pts])
            means = np.array([p[1] for p in pts])
            stds = np.array([p[2] for p in pts])
            ax.plot(ks, means, lw=1.1, label=algo_key)
            ax.fill_between(ks, means - 2 * stds, means + 2 * stds, alpha=0.15)
        ax.set_title(measure)
        ax.set_xlabel("k")
    axes[0].legend(fontsize=7, frameon=False)
    for ax in axes[len(MEASURES):]:
        ax.set_axis_off()
    fig.suptitle(f"performance of {distance.key()} setups")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
