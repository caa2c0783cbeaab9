"""Evaluation protocols for labeled works.

Two protocols share one classifier shape (score >= threshold is a
predicted positive):

* ranking: each work gets the threshold minimizing its own total errors,
  an oracle bound on per-work separability;
* classification: one universal threshold, the upper median of the
  per-work optima, is applied everywhere.

Also provides retrieval statistics over per-query ranks and the paired
direct-versus-ensemble comparison that surfaces rescued tracks (true
covers the direct scorer misses but the collapsed ensemble recovers).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from covergraph.collapse import CollapseResult, PathTrace, expand_path
from covergraph.hierarchy import FinalScoreTable
from covergraph.model import POSITIVE, WorkManifest


class EvaluationError(ValueError):
    """Raised when inputs cannot support the requested protocol."""


@dataclass(frozen=True)
class ThresholdReport:
    """Error counts of ``score >= threshold`` against binary labels."""

    threshold: float
    false_negatives: int
    false_positives: int
    n_positive: int
    n_negative: int
    #: True when only one class is present and the threshold is a sentinel.
    degenerate: bool = False

    @property
    def total_errors(self) -> int:
        return self.false_negatives + self.false_positives

    @property
    def fn_rate(self) -> float:
        return self.false_negatives / self.n_positive if self.n_positive else 0.0

    @property
    def fp_rate(self) -> float:
        return self.false_positives / self.n_negative if self.n_negative else 0.0

    @property
    def error_rate(self) -> float:
        total = self.n_positive + self.n_negative
        return self.total_errors / total if total else 0.0

    @property
    def recall(self) -> float:
        return 1.0 - self.fn_rate

    @property
    def false_positive_rate(self) -> float:
        return self.fp_rate

    def as_report_row(self) -> dict[str, float | int | bool]:
        return {
            "best_threshold": self.threshold,
            "fn": self.false_negatives,
            "fp": self.false_positives,
            "both": self.total_errors,
            "fn_rel": self.fn_rate,
            "fp_rel": self.fp_rate,
            "both_rel": self.error_rate,
            "degenerate": self.degenerate,
        }


def _checked(scores: np.ndarray, positive: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if scores.ndim != 1 or scores.shape != positive.shape:
        raise EvaluationError("scores and labels must be 1-D arrays of equal length")
    if scores.size == 0:
        raise EvaluationError("nothing to evaluate")
    if not np.all(np.isfinite(scores)):
        raise EvaluationError("scores must be finite")
    return scores, positive


def classify_at(scores: np.ndarray, positive: np.ndarray, threshold: float) -> ThresholdReport:
    """Count errors of the fixed-threshold classifier."""
    scores, positive = _checked(scores, positive)
    pred = scores >= threshold
    fn = int(np.count_nonzero(positive & ~pred))
    fp = int(np.count_nonzero(~positive & pred))
    n_pos = int(np.count_nonzero(positive))
    return ThresholdReport(
        threshold=float(threshold),
        false_negatives=fn,
        false_positives=fp,
        n_positive=n_pos,
        n_negative=int(scores.size - n_pos),
        degenerate=n_pos == 0 or n_pos == scores.size,
    )


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct scores, plus both sentinels.

    Every achievable classification of the given scores is realized by
    exactly one candidate, so sweeping them is exhaustive.
    """
    scores = np.asarray(scores, dtype=np.float64)
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def optimal_threshold(scores: np.ndarray, positive: np.ndarray) -> ThresholdReport:
    """Exhaustive sweep for the minimum-total-error threshold.

    Ties resolve toward the highest threshold.  With a single class the
    optimum degenerates to a sentinel: -inf accepts everything for an
    all-positive work, +inf rejects everything for an all-negative one.
    """
    scores, positive = _checked(scores, positive)
    best: ThresholdReport | None = None
    for thr in candidate_thresholds(scores):
        report = classify_at(scores, positive, thr)
        if best is None or report.total_errors <= best.total_errors:
            best = report
    assert best is not None
    return best


def sweep_rows(scores: np.ndarray, positive: np.ndarray) -> list[dict[str, float | int]]:
    """Full error curve with finite endpoints, for plots and the UI.

    The sentinel thresholds are replaced by ``min - 1`` and ``max + 1``,
    which realize the same accept-all / reject-all classifications while
    staying representable in strict JSON.
    """
    scores, positive = _checked(scores, positive)
    thresholds = candidate_thresholds(scores)
    thresholds[0] = float(scores.min()) - 1.0
    thresholds[-1] = float(scores.max()) + 1.0
    rows = []
    for thr in thresholds:
        r = classify_at(scores, positive, float(thr))
        rows.append(
            {
                "threshold": float(thr),
                "false_negatives": r.false_negatives,
                "false_positives": r.false_positives,
                "errors": r.total_errors,
            }
        )
    return rows


def universal_threshold(thresholds: Sequence[float]) -> float:
    """Upper median of per-work optimal thresholds.

    For an even count this is the greater of the two middle values, so the
    result is always one of the inputs.
    """
    values = [float(t) for t in thresholds]
    if not values:
        raise EvaluationError("no thresholds to aggregate")
    if any(not np.isfinite(v) for v in values):
        raise EvaluationError("universal threshold requires finite per-work thresholds")
    values.sort()
    return values[len(values) // 2]


@dataclass(frozen=True)
class RetrievalStats:
    """Rank-based retrieval quality over a set of queries."""

    n_queries: int
    mean_rank: float
    mean_reciprocal_rank: float
    #: cutoff -> number of queries whose rank is <= cutoff.
    recall_at: dict[int, int]


def retrieval_stats(
    ranks: Sequence[int],
    cutoffs: Sequence[int] = (1, 10),
    n_candidates: int | None = None,
) -> RetrievalStats:
    """Aggregate 1-based ranks of the first relevant hit per query."""
    if not ranks:
        raise EvaluationError("no ranks given")
    checked: list[int] = []
    for r in ranks:
        r = int(r)
        if r < 1:
            raise EvaluationError(f"ranks are 1-based, got {r}")
        if n_candidates is not None and r > n_candidates:
            raise EvaluationError(f"rank {r} exceeds candidate count {n_candidates}")
        checked.append(r)
    arr = np.asarray(checked, dtype=np.float64)
    return RetrievalStats(
        n_queries=len(checked),
        mean_rank=float(arr.mean()),
        mean_reciprocal_rank=float((1.0 / arr).mean()),
        recall_at={int(c): int(np.count_nonzero(arr <= c)) for c in cutoffs},
    )


@dataclass(frozen=True)
class RescuedTrack:
    """A true cover the direct scorer rejects but the ensemble accepts."""

    index: int
    track_id: str
    direct_score: float
    ensemble_score: float
    path: PathTrace | None


@dataclass(frozen=True)
class PairedReport:
    """Direct and ensemble evaluated on the same labeled work."""

    work_id: str
    n_evaluated: int
    direct_ranking: ThresholdReport
    ensemble_ranking: ThresholdReport
    rescued: tuple[RescuedTrack, ...]
    direct_classification: ThresholdReport | None = None
    ensemble_classification: ThresholdReport | None = None


def labeled_eval_mask(manifest: WorkManifest, table: FinalScoreTable) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation mask and positive flags over candidate indices.

    The reference itself is excluded (it trivially scores 100) and so is
    any unlabeled candidate.
    """
    if tuple(table.track_ids) != manifest.track_ids:
        raise EvaluationError("score table and manifest track ids disagree")
    labels = manifest.labels or {}
    mask = np.zeros(manifest.n, dtype=bool)
    positive = np.zeros(manifest.n, dtype=bool)
    for i, tid in enumerate(manifest.track_ids):
        if i == manifest.reference_index or tid not in labels:
            continue
        mask[i] = True
        positive[i] = labels[tid] == POSITIVE
    if not mask.any():
        raise EvaluationError(f"work {manifest.work_id!r} has no labeled candidates")
    return mask, positive


def compare_direct_vs_ensemble(
    manifest: WorkManifest,
    table: FinalScoreTable,
    collapse_result: CollapseResult | None = None,
    bridges: Mapping[tuple[int, int], int] | None = None,
    direct_threshold: float | None = None,
    ensemble_threshold: float | None = None,
) -> PairedReport:
    """Rank both score columns and collect the rescued tracks.

    A track is rescued when it is labeled positive, falls below the
    direct column's own optimal threshold, and still clears the ensemble
    column's optimal threshold.  When shortcut provenance is supplied
    (a collapse result, or its bridge map reloaded from disk), each
    rescued track carries the path explaining its score.
    """
    if bridges is None and collapse_result is not None:
        bridges = collapse_result.bridges
    mask, positive = labeled_eval_mask(manifest, table)
    idx = np.flatnonzero(mask)
    direct_rank = optimal_threshold(table.direct_score[idx], positive[idx])
    ensemble_rank = optimal_threshold(table.ensemble_score[idx], positive[idx])

    rescued: list[RescuedTrack] = []
    ref = manifest.reference_index
    for i in idx:
        i = int(i)
        if not positive[i]:
            continue
        d, e = float(table.direct_score[i]), float(table.ensemble_score[i])
        if d < direct_rank.threshold and e >= ensemble_rank.threshold:
            path = None
            if bridges is not None:
                path = expand_path(bridges, manifest.n, ref, i)
            rescued.append(
                RescuedTrack(
                    index=i,
                    track_id=manifest.track_ids[i],
                    direct_score=d,
                    ensemble_score=e,
                    path=path,
                )
            )

    direct_cls = ensemble_cls = None
    if direct_threshold is not None:
        direct_cls = classify_at(table.direct_score[idx], positive[idx], direct_threshold)
    if ensemble_threshold is not None:
        ensemble_cls = classify_at(table.ensemble_score[idx], positive[idx], ensemble_threshold)

    return PairedReport(
        work_id=manifest.work_id,
        n_evaluated=int(idx.size),
        direct_ranking=direct_rank,
        ensemble_ranking=ensemble_rank,
        rescued=tuple(rescued),
        direct_classification=direct_cls,
        ensemble_classification=ensemble_cls,
    )


def rescued_payload(
    report: PairedReport, table: FinalScoreTable
) -> list[dict[str, object]]:
    """Rescued tracks with their provenance paths, one row per path node."""
    out: list[dict[str, object]] = []
    ids = table.track_ids
    for track in report.rescued:
        nodes = []
        if track.path is not None:
            for depth, node in zip(track.path.depths, track.path.nodes):
                nodes.append(
                    {
                        "depth": depth,
                        "track_id": ids[node],
                        "direct_score": float(table.direct_score[node]),
                        "ensemble_score": float(table.ensemble_score[node]),
                    }
                )
        out.append(
            {
                "track_id": track.track_id,
                "direct_score": track.direct_score,
                "ensemble_score": track.ensemble_score,
                "path": nodes,
            }
        )
    return out
