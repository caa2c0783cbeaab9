"""Workspace orchestration: staleness, determinism, reports, annotations."""

import json

import numpy as np
import pytest

from covergraph.collapse import CollapseParams
from covergraph.distance import LogisticParams
from covergraph.evaluation import optimal_threshold, sweep_rows, universal_threshold
from covergraph.hierarchy import COMPLETE
from covergraph.model import SELF_SCORE, ScoreMatrix, TrackRef, WorkManifest
from covergraph.synth import SyntheticSpec, generate_synthetic_work
from covergraph.workspace import (
    AnnotationConflict,
    PipelineError,
    PipelineParams,
    Workspace,
    append_annotation,
    load_annotation,
    load_bridges,
    load_dendrogram_merges,
    load_final_table,
)

ALL_STAGES = ("distances", "collapsed", "dendrogram", "final")


def seeded_work(seed=31, n=30, work_id="w01"):
    spec = SyntheticSpec(
        n_candidates=n, positive_fraction=0.3, rng_seed=seed, work_id=work_id
    )
    return generate_synthetic_work(spec)


def make_workspace(root, seeds=(31,), n=30):
    ws = Workspace(root)
    for k, seed in enumerate(seeds):
        manifest, scores = seeded_work(seed=seed, n=n, work_id=f"w{k:02d}")
        ws.add_work(manifest, scores)
    return ws


class TestWorkRegistry:
    def test_add_list_and_reload(self, tmp_path):
        ws = make_workspace(tmp_path, seeds=(31, 32))
        assert ws.list_works() == ["w00", "w01"]
        assert ws.has_work("w00")
        assert not ws.has_work("nope")
        manifest, _ = seeded_work(seed=31, work_id="w00")
        assert ws.load_manifest("w00") == manifest

    def test_duplicate_add_refused_unless_overwrite(self, tmp_path):
        ws = make_workspace(tmp_path)
        manifest, scores = seeded_work(work_id="w00")
        with pytest.raises(PipelineError, match="already exists"):
            ws.add_work(manifest, scores)
        ws.add_work(manifest, scores, overwrite=True)

    def test_unknown_work_names_the_stage(self, tmp_path):
        ws = Workspace(tmp_path)
        with pytest.raises(PipelineError) as exc:
            ws.load_manifest("ghost")
        assert str(exc.value).startswith("pairwise-scoring:")

    def test_missing_score_file_is_a_scoring_error(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.paths("w00").scores.unlink()
        with pytest.raises(PipelineError, match="score file not found"):
            ws.run("w00")


class TestPipelineRun:
    def test_first_run_builds_everything(self, tmp_path):
        ws = make_workspace(tmp_path)
        result = ws.run("w00")
        assert result.work_id == "w00"
        assert result.recomputed == {s: True for s in ALL_STAGES}
        assert result.sweeps_run >= 1
        assert result.converged is True
        wp = ws.paths("w00")
        for path in (
            wp.distances_raw,
            wp.distances_collapsed,
            wp.bridges,
            wp.dendrogram_merges,
            wp.dendrogram_json,
            wp.final_scores,
            wp.params,
        ):
            assert path.is_file(), path

    def test_identical_rerun_reuses_everything(self, tmp_path):
        ws = make_workspace(tmp_path)
        first = ws.run("w00")
        again = ws.run("w00")
        assert again.recomputed == {s: False for s in ALL_STAGES}
        assert again.sweeps_run is None and again.converged is None
        assert again.params_hash == first.params_hash

    def test_force_rebuilds_everything(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        assert ws.run("w00", force=True).recomputed == {s: True for s in ALL_STAGES}

    def test_params_file_records_the_stage_chain(self, tmp_path):
        ws = make_workspace(tmp_path)
        result = ws.run("w00")
        recorded = ws.read_params("w00")
        assert recorded["work_id"] == "w00"
        assert set(recorded["stages"]) == {
            "scores",
            "distances",
            "collapsed",
            "dendrogram",
            "final",
        }
        assert recorded["params_hash"] == recorded["stages"]["final"]
        assert ws.params_hash("w00") == result.params_hash


class TestStaleness:
    @staticmethod
    def _rerun(ws, **kw):
        return ws.run("w00", params=PipelineParams(**kw)).recomputed

    def test_midpoint_change_invalidates_from_distances_down(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        got = self._rerun(ws, logistic=LogisticParams(midpoint=5.0))
        assert got == {s: True for s in ALL_STAGES}

    def test_eta_change_keeps_raw_distances(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        got = self._rerun(ws, collapse=CollapseParams(eta=0.05))
        assert got == {
            "distances": False,
            "collapsed": True,
            "dendrogram": True,
            "final": True,
        }

    def test_linkage_change_keeps_collapsed_distances(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        got = self._rerun(ws, linkage=COMPLETE)
        assert got == {
            "distances": False,
            "collapsed": False,
            "dendrogram": True,
            "final": True,
        }

    def test_score_file_edit_invalidates_everything(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        wp = ws.paths("w00")
        wp.scores.write_text(wp.scores.read_text() + "# touched\n")
        assert ws.run("w00").recomputed == {s: True for s in ALL_STAGES}

    def test_deleted_artifact_rebuilds_only_its_stage(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        ws.paths("w00").distances_collapsed.unlink()
        assert ws.run("w00").recomputed == {
            "distances": False,
            "collapsed": True,
            "dendrogram": False,
            "final": False,
        }

    def test_params_hash_tracks_parameter_changes(self, tmp_path):
        ws = make_workspace(tmp_path)
        base = ws.run("w00").params_hash
        changed = ws.run("w00", params=PipelineParams(collapse=CollapseParams(eta=0.05)))
        assert changed.params_hash != base
        back = ws.run("w00", params=PipelineParams())
        assert back.params_hash == base


class TestArtifactRoundTrips:
    def test_reloaded_artifacts_are_bit_identical(self, tmp_path):
        from covergraph.collapse import collapse
        from covergraph.distance import matrix_to_distances
        from covergraph.hierarchy import AVERAGE, build_dendrogram, final_scores
        from covergraph.model import load_score_matrix

        ws = make_workspace(tmp_path)
        ws.run("w00")
        wp = ws.paths("w00")
        manifest = ws.load_manifest("w00")
        scores = load_score_matrix(wp.scores, manifest)
        raw = matrix_to_distances(scores)
        result = collapse(raw, CollapseParams())
        dend = build_dendrogram(result.distances, AVERAGE)
        table = final_scores(dend, manifest.reference_index, scores)

        assert load_bridges(wp.bridges) == result.bridges
        reloaded = load_dendrogram_merges(wp.dendrogram_merges, manifest)
        assert reloaded.linkage == AVERAGE
        assert reloaded.merges == dend.merges
        stored = load_final_table(wp.final_scores, manifest)
        np.testing.assert_array_equal(stored.direct_score, table.direct_score)
        np.testing.assert_array_equal(stored.ensemble_score, table.ensemble_score)
        np.testing.assert_array_equal(
            stored.cophenetic_to_reference, table.cophenetic_to_reference
        )

    def test_two_fresh_workspaces_agree_byte_for_byte(self, tmp_path):
        ws_a = make_workspace(tmp_path / "a", seeds=(31, 32))
        ws_b = make_workspace(tmp_path / "b", seeds=(31, 32))
        for ws in (ws_a, ws_b):
            for wid in ws.list_works():
                ws.run(wid)
        names = (
            "scores.csv",
            "distances_raw.csv",
            "distances_collapsed.csv",
            "bridges.csv",
            "dendrogram_merges.csv",
            "dendrogram.json",
            "final_scores.csv",
            "params.json",
            "manifest.json",
        )
        for wid in ("w00", "w01"):
            dir_a = ws_a.paths(wid).directory
            dir_b = ws_b.paths(wid).directory
            for name in names:
                assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes(), name


class TestEvaluateReports:
    def _evaluated(self, tmp_path):
        ws = make_workspace(tmp_path, seeds=(31, 32, 33))
        for wid in ws.list_works():
            ws.run(wid)
        return ws, ws.evaluate(figures=False)

    def test_report_files_and_structure(self, tmp_path):
        ws, out = self._evaluated(tmp_path)
        assert out["works"] == ["w00", "w01", "w02"]
        assert out["methods"] == ["direct", "ensemble"]
        for name in (
            "ranking.json",
            "ranking.csv",
            "classification.json",
            "classification.csv",
            "rescued.json",
        ):
            assert (ws.reports_dir / name).is_file(), name
        payload = json.loads((ws.reports_dir / "ranking.json").read_text())
        assert payload["protocol"] == "ranking"
        assert set(payload["works"]) == {"w00", "w01", "w02"}

    def test_universal_threshold_is_upper_median_of_optima(self, tmp_path):
        from covergraph.evaluation import labeled_eval_mask

        ws, out = self._evaluated(tmp_path)
        per_work = {}
        for wid in ws.list_works():
            manifest = ws.load_manifest(wid)
            table = load_final_table(ws.paths(wid).final_scores, manifest)
            mask, positive = labeled_eval_mask(manifest, table)
            idx = np.flatnonzero(mask)
            per_work[wid] = {
                "direct": optimal_threshold(table.direct_score[idx], positive[idx]),
                "ensemble": optimal_threshold(table.ensemble_score[idx], positive[idx]),
            }
        for m in ("direct", "ensemble"):
            want = universal_threshold([per_work[w][m].threshold for w in per_work])
            assert out["universal_thresholds"][m] == want
            assert out["ranking"][wid][m]["best_threshold"] == per_work[wid][m].threshold

    def test_rescued_rows_reference_real_tracks(self, tmp_path):
        ws, out = self._evaluated(tmp_path)
        total = 0
        for wid, rows in out["rescued"].items():
            ids = set(ws.load_manifest(wid).track_ids)
            for row in rows:
                total += 1
                assert row["track_id"] in ids
                assert row["path"][0]["depth"] == 0
        assert total > 0

    def test_protocol_and_method_validated(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        with pytest.raises(PipelineError, match="unknown protocol"):
            ws.evaluate(protocol="auc")
        with pytest.raises(PipelineError, match="unknown method"):
            ws.evaluate(method="magic")

    def test_missing_final_scores_is_an_evaluation_error(self, tmp_path):
        ws = make_workspace(tmp_path)
        with pytest.raises(PipelineError) as exc:
            ws.evaluate(figures=False)
        assert str(exc.value).startswith("evaluation:")

    def test_unlabeled_work_is_rejected_with_stage_tag(self, tmp_path):
        ws = Workspace(tmp_path)
        tracks = tuple(TrackRef(id=f"t{i}") for i in range(4))
        manifest = WorkManifest(work_id="raw", reference=tracks[0], candidates=tracks)
        rng = np.random.default_rng(8)
        values = rng.uniform(1.0, 9.0, size=(4, 4))
        values = (values + values.T) / 2
        np.fill_diagonal(values, SELF_SCORE)
        ws.add_work(manifest, ScoreMatrix(track_ids=manifest.track_ids, values=values))
        ws.run("raw")
        with pytest.raises(PipelineError, match="no labeled"):
            ws.evaluate(["raw"], figures=False)


class TestSweep:
    def test_curves_match_direct_computation_and_files_exist(self, tmp_path):
        from covergraph.evaluation import labeled_eval_mask

        ws = make_workspace(tmp_path)
        ws.run("w00")
        curves = ws.sweep("w00", figures=False)
        manifest = ws.load_manifest("w00")
        table = load_final_table(ws.paths("w00").final_scores, manifest)
        mask, positive = labeled_eval_mask(manifest, table)
        idx = np.flatnonzero(mask)
        assert curves["direct"] == sweep_rows(table.direct_score[idx], positive[idx])
        assert curves["ensemble"] == sweep_rows(
            table.ensemble_score[idx], positive[idx]
        )
        wp = ws.paths("w00")
        assert (wp.directory / "sweep_direct.csv").is_file()
        assert (wp.directory / "sweep_ensemble.csv").is_file()

    def test_sweep_requires_final_scores(self, tmp_path):
        ws = make_workspace(tmp_path)
        with pytest.raises(PipelineError, match="no final scores"):
            ws.sweep("w00", figures=False)


class TestFigures:
    def test_run_with_figures_writes_png_files(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00", figures=True)
        figdir = ws.paths("w00").figures_dir
        for name in (
            "scores_ensemble.png",
            "scores_direct.png",
            "distances.png",
            "dendrogram.png",
        ):
            path = figdir / name
            assert path.is_file(), name
            assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_evaluate_figures_land_in_reports(self, tmp_path):
        ws = make_workspace(tmp_path, seeds=(31, 32))
        for wid in ws.list_works():
            ws.run(wid)
        ws.evaluate(figures=True)
        for name in ("ranking_error_rates.png", "classification_error_rates.png"):
            assert (ws.reports_dir / "figures" / name).is_file()

    def test_sweep_figure(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        ws.sweep("w00", figures=True)
        assert (ws.paths("w00").figures_dir / "sweep.png").is_file()


class TestAnnotations:
    def _ready(self, tmp_path):
        ws = make_workspace(tmp_path)
        ws.run("w00")
        return ws

    def test_append_and_reload(self, tmp_path):
        ws = self._ready(tmp_path)
        entry = append_annotation(ws, "w00", threshold=60.0, annotator="ka")
        assert entry["revision"] == 1
        assert entry["threshold"] == 60.0
        assert entry["annotator"] == "ka"
        assert entry["params_hash"] == ws.params_hash("w00")
        assert load_annotation(ws.paths("w00")) == entry

    def test_positive_set_snapshot_matches_scores(self, tmp_path):
        ws = self._ready(tmp_path)
        entry = append_annotation(ws, "w00", threshold=55.0, annotator="ka")
        manifest = ws.load_manifest("w00")
        table = load_final_table(ws.paths("w00").final_scores, manifest)
        want = [
            tid
            for i, tid in enumerate(table.track_ids)
            if table.ensemble_score[i] >= 55.0
        ]
        assert entry["positives"] == want
        assert manifest.reference.id in entry["positives"]

    def test_optimistic_concurrency(self, tmp_path):
        ws = self._ready(tmp_path)
        append_annotation(ws, "w00", threshold=60.0, annotator="a")
        entry = append_annotation(ws, "w00", threshold=61.0, annotator="b", base_revision=1)
        assert entry["revision"] == 2
        with pytest.raises(AnnotationConflict) as exc:
            append_annotation(ws, "w00", threshold=62.0, annotator="c", base_revision=1)
        assert exc.value.current_revision == 2
        # The refused write must not have touched journal or snapshot.
        log = ws.paths("w00").annotation_log.read_text().strip().splitlines()
        assert len(log) == 2
        assert load_annotation(ws.paths("w00"))["revision"] == 2

    def test_journal_is_append_only(self, tmp_path):
        ws = self._ready(tmp_path)
        for k in range(3):
            append_annotation(ws, "w00", threshold=50.0 + k, annotator="ka")
        lines = ws.paths("w00").annotation_log.read_text().strip().splitlines()
        revisions = [json.loads(line)["revision"] for line in lines]
        assert revisions == [1, 2, 3]

    def test_validation_rejects_bad_inputs(self, tmp_path):
        ws = self._ready(tmp_path)
        with pytest.raises(ValueError, match="finite"):
            append_annotation(ws, "w00", threshold=float("nan"), annotator="ka")
        with pytest.raises(ValueError, match="0, 100"):
            append_annotation(ws, "w00", threshold=150.0, annotator="ka")
        with pytest.raises(ValueError, match="annotator"):
            append_annotation(ws, "w00", threshold=50.0, annotator="  ")

    def test_annotation_requires_final_scores(self, tmp_path):
        ws = make_workspace(tmp_path)
        with pytest.raises(PipelineError, match="no final scores"):
            append_annotation(ws, "w00", threshold=50.0, annotator="ka")
