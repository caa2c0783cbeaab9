"""Logistic mapping from raw similarity scores to distances in [0, 1].

High scores mean near-certain matches and low scores near-certain
non-matches, with the uncertain zone in between, so the map is a
decreasing logistic centered on the score where a match becomes an even
bet: ``d = 1 / (1 + exp((s - m) / sigma))``.  A score equal to the
midpoint ``m`` lands exactly on distance 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from covergraph.model import DistanceMatrix, ScoreMatrix

#: Defaults from calibration against alignment-score distributions where
#: ~2 is the typical non-match score and >8 is unambiguous.
DEFAULT_MIDPOINT = 4.3
DEFAULT_SCALE = 0.5


@dataclass(frozen=True)
class LogisticParams:
    """Midpoint and scale of the score-to-distance logistic, in score units."""

    midpoint: float = DEFAULT_MIDPOINT
    scale: float = DEFAULT_SCALE

    def __post_init__(self) -> None:
        if not np.isfinite(self.midpoint):
            raise ValueError("midpoint must be finite")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("scale must be a positive finite number")


def score_to_distance(s, params: LogisticParams = LogisticParams()):
    """Map scores to distances in (0, 1); strictly decreasing in ``s``.

    Accepts scalars or arrays.  Evaluated in the numerically stable
    branch form so extreme scores saturate instead of overflowing.
    """
    s = np.asarray(s, dtype=np.float64)
    z = (s - params.midpoint) / params.scale
    # 1/(1+e^z); for z >= 0 rewrite as e^-z/(1+e^-z) to keep exp bounded.
    out = np.empty_like(z)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return float(out) if out.ndim == 0 else out


def matrix_to_distances(
    scores: ScoreMatrix, params: LogisticParams = LogisticParams()
) -> DistanceMatrix:
    """Transform every off-diagonal score; the diagonal is exactly 0."""
    values = score_to_distance(scores.values, params)
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(track_ids=scores.track_ids, values=values, collapsed=False)
