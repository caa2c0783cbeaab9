"""Figure rendering for pipeline artifacts and evaluation reports.

Every function writes a PNG next to the delimited outputs and closes its
figure.  Savefig metadata is pinned so identical inputs produce identical
bytes; rendering never mutates pipeline state.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection

from covergraph.hierarchy import Dendrogram, FinalScoreTable
from covergraph.model import DistanceMatrix

#: Fixed Software tag replaces the default one, which embeds a timestamp.
PNG_METADATA = {"Software": "covergraph"}
DPI = 120


def _save(fig: plt.Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def save_score_histogram(
    table: FinalScoreTable,
    path: str | Path,
    positive: np.ndarray | None = None,
    column: str = "ensemble",
    threshold: float | None = None,
) -> Path:
    """Histogram of one score column, split by label when labels exist."""
    if column not in ("direct", "ensemble"):
        raise ValueError(f"unknown score column {column!r}")
    scores = table.direct_score if column == "direct" else table.ensemble_score
    keep = np.arange(scores.size) != table.reference_index
    scores = scores[keep]
    fig, ax = plt.subplots(figsize=(7, 4))
    bins = np.linspace(0.0, 100.0, 51)
    if positive is not None:
        positive = np.asarray(positive, dtype=bool)[keep]
        ax.hist(scores[positive], bins=bins, alpha=0.7, label="positive", color="#2a7a2a")
        ax.hist(scores[~positive], bins=bins, alpha=0.7, label="negative", color="#888888")
        ax.legend()
    else:
        ax.hist(scores, bins=bins, color="#4878a8")
    if threshold is not None:
        ax.axvline(threshold, color="#b03030", linestyle="--", label=f"threshold {threshold:g}")
    ax.set_xlabel(f"{column} score")
    ax.set_ylabel("tracks")
    ax.set_title(f"{column} score distribution")
    fig.tight_layout()
    return _save(fig, path)


def save_distance_heatmaps(
    raw: DistanceMatrix, collapsed: DistanceMatrix, path: str | Path
) -> Path:
    """Side-by-side pre- and post-collapse distance matrices."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.6), sharey=True)
    for ax, mat, title in ((axes[0], raw, "before collapse"), (axes[1], collapsed, "after collapse")):
        im = ax.imshow(mat.values, vmin=0.0, vmax=1.0, cmap="viridis", interpolation="nearest")
        ax.set_title(title)
        ax.set_xlabel("track")
    axes[0].set_ylabel("track")
    fig.colorbar(im, ax=axes, shrink=0.85, label="distance")
    return _save(fig, path)


def _dendrogram_geometry(dend: Dendrogram) -> tuple[np.ndarray, list[tuple[tuple[float, float], tuple[float, float]]]]:
    """Leaf x-positions and the bracket segments of every merge."""
    n = dend.n_leaves
    x = np.zeros(n + len(dend.merges))
    for pos, leaf in enumerate(dend.leaves):
        x[leaf] = float(pos)
    height = np.zeros(n + len(dend.merges))
    segments: list[tuple[tuple[float, float], tuple[float, float]]] = []
    for t, (a, b, h, _s) in enumerate(dend.merges):
        nid = n + t
        x[nid] = (x[a] + x[b]) / 2.0
        height[nid] = h
        segments.append(((x[a], height[a]), (x[a], h)))
        segments.append(((x[b], height[b]), (x[b], h)))
        segments.append(((x[a], h), (x[b], h)))
    return x, segments


def save_dendrogram_figure(
    dend: Dendrogram,
    path: str | Path,
    threshold: float | None = None,
    max_leaf_labels: int = 40,
) -> Path:
    """Bracket-style merge tree, leaves in display order along the x axis."""
    _x, segments = _dendrogram_geometry(dend)
    fig, ax = plt.subplots(figsize=(max(7.0, dend.n_leaves * 0.12), 4.5))
    ax.add_collection(LineCollection(segments, colors="#305070", linewidths=1.0))
    if threshold is not None:
        ax.axhline(threshold, color="#b03030", linestyle="--", linewidth=1.0)
    ax.set_xlim(-1.0, dend.n_leaves)
    top = dend.merges[-1][2] if dend.merges else 1.0
    ax.set_ylim(0.0, max(top * 1.05, 1e-6))
    ax.set_ylabel("merge height")
    if dend.n_leaves <= max_leaf_labels:
        ax.set_xticks(range(dend.n_leaves))
        ax.set_xticklabels(
            [dend.track_ids[leaf] for leaf in dend.leaves], rotation=90, fontsize=7
        )
    else:
        ax.set_xticks([])
        ax.set_xlabel(f"{dend.n_leaves} tracks")
    ax.set_title(f"{dend.linkage} linkage")
    fig.tight_layout()
    return _save(fig, path)


def save_sweep_figure(
    rows_by_column: Mapping[str, Sequence[Mapping[str, float]]],
    path: str | Path,
    optimal: Mapping[str, float] | None = None,
) -> Path:
    """Error counts against threshold, one panel per score column."""
    columns = list(rows_by_column)
    fig, axes = plt.subplots(1, len(columns), figsize=(5.5 * len(columns), 4), squeeze=False)
    for ax, column in zip(axes[0], columns):
        rows = rows_by_column[column]
        thr = [r["threshold"] for r in rows]
        ax.plot(thr, [r["false_negatives"] for r in rows], label="false negatives", color="#b03030")
        ax.plot(thr, [r["false_positives"] for r in rows], label="false positives", color="#305070")
        ax.plot(thr, [r["errors"] for r in rows], label="total", color="#303030", linewidth=2)
        if optimal is not None and column in optimal:
            ax.axvline(optimal[column], color="#2a7a2a", linestyle="--", label="optimal")
        ax.set_title(f"{column} column")
        ax.set_xlabel("threshold")
        ax.set_ylabel("errors")
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_error_bars(
    per_work: Mapping[str, Mapping[str, float]], path: str | Path, title: str
) -> Path:
    """Per-work error rates for both methods, direct vs ensemble."""
    works = sorted(per_work)
    direct = [per_work[w]["direct"] for w in works]
    ensemble = [per_work[w]["ensemble"] for w in works]
    pos = np.arange(len(works))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(7.0, len(works) * 0.6), 4))
    ax.bar(pos - width / 2, direct, width, label="direct", color="#888888")
    ax.bar(pos + width / 2, ensemble, width, label="ensemble", color="#2a7a2a")
    ax.set_xticks(pos)
    ax.set_xticklabels(works, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("error rate")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
