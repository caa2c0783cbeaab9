"""Threshold selection, retrieval statistics and the paired comparison."""

import numpy as np
import pytest

from covergraph.collapse import CollapseParams, collapse
from covergraph.distance import matrix_to_distances
from covergraph.evaluation import (
    EvaluationError,
    candidate_thresholds,
    classify_at,
    compare_direct_vs_ensemble,
    labeled_eval_mask,
    optimal_threshold,
    rescued_payload,
    retrieval_stats,
    sweep_rows,
    universal_threshold,
)
from covergraph.hierarchy import AVERAGE, build_dendrogram, final_scores
from covergraph.model import (
    NEGATIVE,
    POSITIVE,
    SELF_SCORE,
    ScoreMatrix,
    TrackRef,
    WorkManifest,
)
from covergraph.synth import SyntheticSpec, generate_synthetic_work

from oracles import min_errors_oracle, threshold_error_counts


class TestClassifyAt:
    def test_hand_counted_example(self):
        scores = np.array([9.0, 7.0, 5.0, 3.0, 1.0])
        positive = np.array([True, True, False, True, False])
        report = classify_at(scores, positive, 4.0)
        assert report.false_negatives == 1  # the positive at 3.0
        assert report.false_positives == 1  # the negative at 5.0
        assert report.n_positive == 3
        assert report.n_negative == 2
        assert report.total_errors == 2
        assert report.fn_rate == pytest.approx(1 / 3)
        assert report.fp_rate == pytest.approx(1 / 2)
        assert report.error_rate == pytest.approx(2 / 5)
        assert report.recall == pytest.approx(2 / 3)
        assert not report.degenerate

    def test_boundary_score_counts_as_predicted_positive(self):
        report = classify_at(np.array([4.0]), np.array([True]), 4.0)
        assert report.false_negatives == 0

    def test_input_validation(self):
        with pytest.raises(EvaluationError):
            classify_at(np.array([1.0, 2.0]), np.array([True]), 0.5)
        with pytest.raises(EvaluationError):
            classify_at(np.array([]), np.array([], dtype=bool), 0.5)
        with pytest.raises(EvaluationError):
            classify_at(np.array([np.nan]), np.array([True]), 0.5)


class TestOptimalThreshold:
    def test_matches_exhaustive_oracle_on_random_data(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            scores = rng.uniform(0.0, 20.0, size=n)
            positive = rng.random(n) < 0.4
            best = optimal_threshold(scores, positive)
            assert best.total_errors == min_errors_oracle(scores, positive)
            # The returned threshold must actually realize that count.
            assert (
                threshold_error_counts(scores, positive, best.threshold)
                == best.total_errors
            )

    def test_matches_oracle_on_tie_rich_scores(self):
        rng = np.random.default_rng(1)
        alphabet = np.array([1.0, 2.0, 3.0])
        for _ in range(60):
            n = int(rng.integers(2, 15))
            scores = rng.choice(alphabet, size=n)
            positive = rng.random(n) < 0.5
            best = optimal_threshold(scores, positive)
            assert best.total_errors == min_errors_oracle(scores, positive)

    def test_ties_resolve_to_the_highest_threshold(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            scores = rng.choice(np.array([1.0, 2.0, 4.0]), size=n)
            positive = rng.random(n) < 0.5
            best = optimal_threshold(scores, positive)
            higher = [
                t
                for t in candidate_thresholds(scores)
                if t > best.threshold
            ]
            for t in higher:
                assert (
                    threshold_error_counts(scores, positive, t) > best.total_errors
                )

    def test_separable_scores_find_a_zero_error_split(self):
        scores = np.array([10.0, 9.0, 8.0, 2.0, 1.0])
        positive = np.array([True, True, True, False, False])
        best = optimal_threshold(scores, positive)
        assert best.total_errors == 0
        assert 2.0 < best.threshold <= 8.0

    def test_all_positive_degenerates_to_accept_everything(self):
        best = optimal_threshold(np.array([3.0, 1.0]), np.array([True, True]))
        assert best.threshold == -np.inf
        assert best.degenerate
        assert best.total_errors == 0

    def test_all_negative_degenerates_to_reject_everything(self):
        best = optimal_threshold(np.array([3.0, 1.0]), np.array([False, False]))
        assert best.threshold == np.inf
        assert best.degenerate
        assert best.total_errors == 0


class TestSweepRows:
    def test_endpoints_are_finite_and_curve_is_exhaustive(self):
        scores = np.array([5.0, 3.0, 3.0, 1.0])
        positive = np.array([True, True, False, False])
        rows = sweep_rows(scores, positive)
        # 3 distinct scores -> 2 midpoints + 2 finite endpoints.
        assert len(rows) == 4
        assert rows[0]["threshold"] == 0.0
        assert rows[-1]["threshold"] == 6.0
        assert rows[0]["false_negatives"] == 0
        assert rows[0]["false_positives"] == 2
        assert rows[-1]["false_negatives"] == 2
        assert rows[-1]["false_positives"] == 0
        best_row = min(r["errors"] for r in rows)
        assert best_row == optimal_threshold(scores, positive).total_errors
        for r in rows:
            assert np.isfinite(r["threshold"])


class TestUniversalThreshold:
    def test_upper_median_of_even_count(self):
        assert universal_threshold([1.0, 2.0, 3.0, 4.0]) == 3.0

    def test_median_of_odd_count(self):
        assert universal_threshold([5.0, 1.0, 3.0]) == 3.0

    def test_result_is_always_one_of_the_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            values = list(rng.uniform(0, 100, size=int(rng.integers(1, 12))))
            assert universal_threshold(values) in values

    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(EvaluationError):
            universal_threshold([])
        with pytest.raises(EvaluationError):
            universal_threshold([1.0, np.inf])


class TestRetrievalStats:
    def test_hand_computed_example(self):
        stats = retrieval_stats([1, 2, 4], cutoffs=(1, 2, 10))
        assert stats.n_queries == 3
        assert stats.mean_rank == pytest.approx(7 / 3)
        assert stats.mean_reciprocal_rank == pytest.approx(7 / 12)
        assert stats.recall_at == {1: 1, 2: 2, 10: 3}

    def test_perfect_retrieval(self):
        stats = retrieval_stats([1, 1, 1, 1])
        assert stats.mean_rank == 1.0
        assert stats.mean_reciprocal_rank == 1.0
        assert stats.recall_at[1] == 4

    def test_validation(self):
        with pytest.raises(EvaluationError):
            retrieval_stats([])
        with pytest.raises(EvaluationError):
            retrieval_stats([0])
        with pytest.raises(EvaluationError):
            retrieval_stats([5], n_candidates=4)


def tiny_work(labels):
    tracks = tuple(TrackRef(id=f"t{i}") for i in range(len(labels) + 1))
    label_map = {
        tracks[i + 1].id: POSITIVE if lab else NEGATIVE
        for i, lab in enumerate(labels)
        if lab is not None
    }
    label_map[tracks[0].id] = POSITIVE
    return WorkManifest(
        work_id="w", reference=tracks[0], candidates=tracks, labels=label_map
    )


class TestLabeledEvalMask:
    def _table(self, manifest):
        n = manifest.n
        rng = np.random.default_rng(4)
        raw = rng.uniform(1.0, 9.0, size=(n, n))
        raw = (raw + raw.T) / 2
        np.fill_diagonal(raw, SELF_SCORE)
        scores = ScoreMatrix(track_ids=manifest.track_ids, values=raw)
        d = matrix_to_distances(scores)
        dend = build_dendrogram(d, AVERAGE)
        return final_scores(dend, manifest.reference_index, scores)

    def test_reference_and_unlabeled_excluded(self):
        manifest = tiny_work([True, None, False, True])
        mask, positive = labeled_eval_mask(manifest, self._table(manifest))
        np.testing.assert_array_equal(mask, [False, True, False, True, True])
        np.testing.assert_array_equal(positive[mask], [True, False, True])

    def test_no_labeled_candidates_is_an_error(self):
        manifest = tiny_work([None, None])
        with pytest.raises(EvaluationError, match="no labeled"):
            labeled_eval_mask(manifest, self._table(manifest))

    def test_id_mismatch_is_an_error(self):
        manifest = tiny_work([True, False])
        other = tiny_work([True, False])
        table = self._table(other)
        renamed = WorkManifest(
            work_id="w",
            reference=TrackRef(id="r"),
            candidates=(TrackRef(id="r"), TrackRef(id="x"), TrackRef(id="y")),
            labels={"r": POSITIVE, "x": POSITIVE},
        )
        with pytest.raises(EvaluationError, match="disagree"):
            labeled_eval_mask(renamed, table)
        del manifest


class TestPairedComparison:
    def _pipeline(self, seed=21, n=60):
        spec = SyntheticSpec(n_candidates=n, positive_fraction=0.3, rng_seed=seed)
        manifest, scores = generate_synthetic_work(spec)
        d = matrix_to_distances(scores)
        result = collapse(d, CollapseParams())
        dend = build_dendrogram(result.distances, AVERAGE)
        table = final_scores(dend, manifest.reference_index, scores)
        return manifest, scores, result, table

    def test_report_shape_and_threshold_consistency(self):
        manifest, _scores, result, table = self._pipeline()
        report = compare_direct_vs_ensemble(manifest, table, collapse_result=result)
        assert report.work_id == "synthetic"
        assert report.n_evaluated == manifest.n - 1
        mask, positive = labeled_eval_mask(manifest, table)
        idx = np.flatnonzero(mask)
        assert report.direct_ranking.total_errors == min_errors_oracle(
            table.direct_score[idx], positive[idx]
        )
        assert report.ensemble_ranking.total_errors == min_errors_oracle(
            table.ensemble_score[idx], positive[idx]
        )

    def test_rescued_definition_holds_exactly(self):
        manifest, _scores, result, table = self._pipeline()
        report = compare_direct_vs_ensemble(manifest, table, collapse_result=result)
        labels = manifest.labels
        rescued_ids = {t.track_id for t in report.rescued}
        for i, tid in enumerate(manifest.track_ids):
            if i == manifest.reference_index:
                continue
            should = (
                labels[tid] == POSITIVE
                and table.direct_score[i] < report.direct_ranking.threshold
                and table.ensemble_score[i] >= report.ensemble_ranking.threshold
            )
            assert (tid in rescued_ids) == should

    def test_rescued_paths_come_from_bridge_map(self):
        manifest, _scores, result, table = self._pipeline()
        via_result = compare_direct_vs_ensemble(
            manifest, table, collapse_result=result
        )
        via_bridges = compare_direct_vs_ensemble(
            manifest, table, bridges=dict(result.bridges)
        )
        assert len(via_result.rescued) > 0
        for a, b in zip(via_result.rescued, via_bridges.rescued):
            assert a.path.nodes == b.path.nodes
            assert a.path.nodes[0] == manifest.reference_index
            assert a.path.nodes[-1] == a.index

    def test_without_provenance_paths_are_none(self):
        manifest, _scores, _result, table = self._pipeline()
        report = compare_direct_vs_ensemble(manifest, table)
        assert len(report.rescued) > 0
        assert all(t.path is None for t in report.rescued)

    def test_fixed_thresholds_fill_classification_reports(self):
        manifest, _scores, result, table = self._pipeline()
        report = compare_direct_vs_ensemble(
            manifest,
            table,
            collapse_result=result,
            direct_threshold=6.0,
            ensemble_threshold=50.0,
        )
        mask, positive = labeled_eval_mask(manifest, table)
        idx = np.flatnonzero(mask)
        assert report.direct_classification.total_errors == threshold_error_counts(
            table.direct_score[idx], positive[idx], 6.0
        )
        assert report.ensemble_classification.threshold == 50.0

    def test_payload_rows_mirror_path_nodes(self):
        manifest, _scores, result, table = self._pipeline()
        report = compare_direct_vs_ensemble(manifest, table, collapse_result=result)
        rows = rescued_payload(report, table)
        assert len(rows) == len(report.rescued)
        for row, track in zip(rows, report.rescued):
            assert row["track_id"] == track.track_id
            assert row["direct_score"] == track.direct_score
            assert [n["depth"] for n in row["path"]] == list(track.path.depths)
            assert [n["track_id"] for n in row["path"]] == [
                manifest.track_ids[i] for i in track.path.nodes
            ]
            assert row["path"][0]["ensemble_score"] == 100.0


class TestReportRow:
    def test_as_report_row_keys_and_values(self):
        report = classify_at(
            np.array([5.0, 1.0]), np.array([True, False]), 3.0
        )
        row = report.as_report_row()
        assert row == {
            "best_threshold": 3.0,
            "fn": 0,
            "fp": 0,
            "both": 0,
            "fn_rel": 0.0,
            "fp_rel": 0.0,
            "both_rel": 0.0,
            "degenerate": False,
        }
