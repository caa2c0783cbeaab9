"""Pairwise similarity from frame sequences via local alignment.

Two recordings are compared by taking dot products between their
unit-normalized feature frames, binarizing the resulting cross-similarity
at a threshold, and running a local alignment over the binary matrix:
matches earn a bonus, mismatches and gaps pay penalties, and cell values
are floored at zero so the best local segment wins.  The score is
therefore at most ``match_bonus * min(len_a, len_b)``, reached by two
identical sequences with distinctive frames.

This module produces the raw score matrix consumed by the distance
transform; any external scorer producing a symmetric nonnegative matrix
can substitute for it via the triplet CSV format.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from numba import njit

from covergraph.model import SELF_SCORE, WorkManifest, ScoreMatrix

#: Frames must be unit vectors to this tolerance; dot products are then
#: bounded by 1 and the binarization threshold is scale-free.
UNIT_NORM_TOL = 1e-6


class AlignmentError(ValueError):
    """Raised for unusable sequences or parameter combinations."""


@dataclass(frozen=True)
class AlignmentParams:
    """Scoring constants for the local alignment.

    binarization_threshold: dot products >= this count as a match.
    """

    match_bonus: float = 1.0
    mismatch_penalty: float = 1.0
    gap_penalty: float = 0.5
    binarization_threshold: float = 0.75

    def __post_init__(self) -> None:
        for name in ("match_bonus", "mismatch_penalty", "gap_penalty", "binarization_threshold"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise AlignmentError(f"{name} must be finite, got {v!r}")
        if self.match_bonus <= 0:
            raise AlignmentError("match_bonus must be > 0")
        if self.mismatch_penalty < 0 or self.gap_penalty < 0:
            raise AlignmentError("penalties must be >= 0")
        if not -1.0 <= self.binarization_threshold <= 1.0:
            raise AlignmentError("binarization_threshold must lie in [-1, 1]")


@dataclass(frozen=True)
class FeatureSequence:
    """Unit-norm feature frames for one track, shape (n_frames, dim)."""

    track_id: str
    frames: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 2:
            raise AlignmentError(f"{self.track_id}: frames must be 2-D, got shape {arr.shape}")
        if arr.shape[0] > 0:
            norms = np.linalg.norm(arr, axis=1)
            bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
            if np.any(bad):
                k = int(np.argmax(bad))
                raise AlignmentError(
                    f"{self.track_id}: frame {k} has norm {norms[k]:.9f}, expected 1"
                )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


def load_feature_sequence(path: str | Path, track_id: str | None = None) -> FeatureSequence:
    """Read frames from CSV (one frame per row, '#' comments skipped)."""
    path = Path(path)
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise AlignmentError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise AlignmentError(f"{path}: no frames")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise AlignmentError(f"{path}: ragged rows, widths {sorted(widths)}")
    return FeatureSequence(track_id=track_id or path.stem, frames=np.asarray(rows))


@njit(cache=True, nogil=True)
def _alignment_best(binary, match_bonus, mismatch_penalty, gap_penalty):
    """Best local alignment score over a binary match matrix.

    Two-row dynamic program: cell (i, j) extends a diagonal (match or
    mismatch) or pays a gap from above/left, floored at zero.
    """
    n, m = binary.shape
    prev = np.zeros(m + 1)
    cur = np.zeros(m + 1)
    best = 0.0
    for i in range(n):
        cur[0] = 0.0
        for j in range(m):
            if binary[i, j]:
                v = prev[j] + match_bonus
            else:
                v = prev[j] - mismatch_penalty
            up = prev[j + 1] - gap_penalty
            if up > v:
                v = up
            left = cur[j] - gap_penalty
            if left > v:
                v = left
            if v < 0.0:
                v = 0.0
            cur[j + 1] = v
            if v > best:
                best = v
        prev, cur = cur, prev
    return best


def score_pair_alignment(
    a: FeatureSequence, b: FeatureSequence, params: AlignmentParams | None = None
) -> float:
    """Alignment score for one ordered-independent pair of sequences."""
    params = params or AlignmentParams()
    if a.n_frames == 0 or b.n_frames == 0:
        empty = a.track_id if a.n_frames == 0 else b.track_id
        raise AlignmentError(f"{empty}: empty sequence cannot be scored")
    if a.dim != b.dim:
        raise AlignmentError(
            f"dimension mismatch: {a.track_id} has {a.dim}, {b.track_id} has {b.dim}"
        )
    cross = a.frames @ b.frames.T
    binary = (cross >= params.binarization_threshold).astype(np.uint8)
    return float(
        _alignment_best(
            binary, params.match_bonus, params.mismatch_penalty, params.gap_penalty
        )
    )


def score_all_pairs(
    manifest: WorkManifest,
    features: Mapping[str, FeatureSequence],
    params: AlignmentParams | None = None,
    workers: int = 1,
) -> ScoreMatrix:
    """Score every unordered candidate pair exactly once.

    Results are written into the matrix keyed by pair index, so the
    output is identical for any worker count.
    """
    params = params or AlignmentParams()
    missing = [tid for tid in manifest.track_ids if tid not in features]
    if missing:
        raise AlignmentError(f"missing feature sequences for: {', '.join(missing[:5])}")
    n = manifest.n
    ids = manifest.track_ids
    values = np.zeros((n, n))
    np.fill_diagonal(values, SELF_SCORE)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair: tuple[int, int]) -> float:
        i, j = pair
        return score_pair_alignment(features[ids[i]], features[ids[j]], params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(one, pairs))
    else:
        scores = [one(p) for p in pairs]
    for (i, j), s in zip(pairs, scores):
        values[i, j] = s
        values[j, i] = s
    return ScoreMatrix(track_ids=ids, values=values)
