"""Seeded synthetic works with known ground truth.

True covers of a work form a chain in a latent style space: each version
resembles its stylistic neighbors more than the original, so pairwise
scores decay with latent separation while unrelated tracks score low
against everything.  That structure is exactly what the graph collapse
exploits, which makes these fixtures the main end-to-end testbed.

Generation is bit-reproducible: a single ``default_rng(rng_seed)`` stream
is consumed in a fixed documented order (positive index choice, positive
coordinates, positive-pair noise, negative-pair draws).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from covergraph.model import (
    NEGATIVE,
    POSITIVE,
    SELF_SCORE,
    ScoreMatrix,
    TrackRef,
    WorkManifest,
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic work.

    Positive-positive scores follow ``peak_score * exp(-|dx| / decay_scale)``
    plus optional Gaussian noise; any pair involving a negative draws from
    ``Normal(negative_center, negative_spread)``.  All scores are floored
    at zero.
    """

    n_candidates: int
    positive_fraction: float
    latent_span: float = 3.0
    decay_scale: float = 1.0
    peak_score: float = 12.0
    noise_spread: float = 0.25
    negative_center: float = 2.0
    negative_spread: float = 0.5
    rng_seed: int = 0
    work_id: str = "synthetic"

    def __post_init__(self) -> None:
        if self.n_candidates < 2:
            raise ValueError("n_candidates must be >= 2")
        if not 0.0 < self.positive_fraction <= 1.0:
            raise ValueError("positive_fraction must lie in (0, 1]")
        for name in ("latent_span", "decay_scale", "peak_score", "negative_spread"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.noise_spread < 0:
            raise ValueError("noise_spread must be >= 0")

    @property
    def n_positive(self) -> int:
        return min(self.n_candidates, max(1, round(self.n_candidates * self.positive_fraction)))


def generate_synthetic_work(spec: SyntheticSpec) -> tuple[WorkManifest, ScoreMatrix]:
    """Build a labeled manifest and its raw score matrix from a seed."""
    rng = np.random.default_rng(spec.rng_seed)
    n = spec.n_candidates
    n_pos = spec.n_positive

    # Draw order is part of the format: reindexing any draw breaks
    # reproducibility of every seeded fixture downstream.
    positive = np.zeros(n, dtype=bool)
    positive[0] = True
    if n_pos > 1:
        extra = rng.choice(np.arange(1, n), size=n_pos - 1, replace=False)
        positive[extra] = True
    pos_idx = np.flatnonzero(positive)

    x = np.full(n, np.nan)
    x[0] = 0.0
    others = pos_idx[pos_idx != 0]
    x[others] = rng.uniform(0.0, spec.latent_span, size=others.size)

    values = np.zeros((n, n))
    xp = x[pos_idx]
    block = spec.peak_score * np.exp(-np.abs(xp[:, None] - xp[None, :]) / spec.decay_scale)
    if spec.noise_spread > 0:
        m = pos_idx.size
        noise = rng.normal(0.0, spec.noise_spread, size=m * (m - 1) // 2)
        iu = np.triu_indices(m, k=1)
        block[iu] += noise
        block[(iu[1], iu[0])] = block[iu]
    values[np.ix_(pos_idx, pos_idx)] = block

    neg_upper = np.triu(~(positive[:, None] & positive[None, :]), k=1)
    n_neg_pairs = int(neg_upper.sum())
    if n_neg_pairs:
        draws = rng.normal(spec.negative_center, spec.negative_spread, size=n_neg_pairs)
        values[neg_upper] = draws
        values.T[neg_upper] = draws

    np.clip(values, 0.0, None, out=values)
    np.fill_diagonal(values, SELF_SCORE)

    width = max(4, len(str(n - 1)))
    ids = [f"t{i:0{width}d}" for i in range(n)]
    candidates = []
    labels: dict[str, str] = {}
    latent: dict[str, float] = {}
    for i, tid in enumerate(ids):
        title = "reference recording" if i == 0 else f"candidate take {i}"
        candidates.append(TrackRef(id=tid, title=title, artist="synthetic"))
        labels[tid] = POSITIVE if positive[i] else NEGATIVE
        if positive[i]:
            latent[tid] = float(x[i])
    manifest = WorkManifest(
        work_id=spec.work_id,
        reference=candidates[0],
        candidates=tuple(candidates),
        labels=labels,
        latent_x=latent,
    )
    return manifest, ScoreMatrix(track_ids=tuple(ids), values=values)
