"""On-disk workspace: per-work artifact trees and the pipeline runner.

Layout::

    <root>/
      works/<work_id>/
        manifest.json            track listing, reference, labels
        scores.csv               raw pairwise scores (triplet CSV)
        distances_raw.csv        transformed distances
        distances_collapsed.csv  after the graph collapse
        bridges.csv              provenance of accepted shortcuts
        dendrogram_merges.csv    merge list (engine-facing)
        dendrogram.json          merge tree payload (UI-facing)
        final_scores.csv         direct / ensemble columns, 0-100
        params.json              parameters and the stage hash chain
        annotations.log          append-only annotation journal
        annotation.json          latest annotation snapshot
        figures/                 rendered PNGs
      reports/                   cross-work evaluation outputs

Each stage records a hash of its parameters chained onto its input's
hash.  A rerun recomputes exactly the stages whose recorded hash no
longer matches: changing the collapse penalty regenerates the collapsed
matrix, tree and final scores but leaves raw scores and distances alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

import covergraph
from covergraph.collapse import CollapseParams, CollapseResult, collapse
from covergraph.distance import LogisticParams, matrix_to_distances
from covergraph.evaluation import (
    EvaluationError,
    compare_direct_vs_ensemble,
    rescued_payload,
    sweep_rows,
    universal_threshold,
)
from covergraph.hierarchy import (
    AVERAGE,
    Dendrogram,
    FinalScoreTable,
    LINKAGES,
    build_dendrogram,
    final_scores,
    payload_json,
)
from covergraph.model import (
    DistanceMatrix,
    ScoreMatrix,
    WorkManifest,
    load_distance_matrix,
    load_manifest,
    load_score_matrix,
    save_distance_matrix,
    save_manifest,
    save_score_matrix,
)

ENGINE_VERSION = covergraph.__version__

STAGE_SCORES = "pairwise-scoring"
STAGE_DISTANCES = "distance-transform"
STAGE_COLLAPSE = "graph-collapse"
STAGE_TREE = "hierarchy"
STAGE_FINAL = "final-scores"
STAGE_EVAL = "evaluation"


class PipelineError(RuntimeError):
    """A stage failed; the message names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class AnnotationConflict(RuntimeError):
    """Optimistic concurrency check failed on annotation write."""

    def __init__(self, expected: int, current: int):
        super().__init__(
            f"annotation revision moved: expected base {expected}, found {current}"
        )
        self.current_revision = current


@dataclass(frozen=True)
class PipelineParams:
    """Everything the pipeline needs beyond the raw scores."""

    logistic: LogisticParams = field(default_factory=LogisticParams)
    collapse: CollapseParams = field(default_factory=CollapseParams)
    linkage: str = AVERAGE

    def __post_init__(self) -> None:
        if self.linkage not in LINKAGES:
            raise ValueError(f"unknown linkage {self.linkage!r}")

    def as_dict(self) -> dict[str, object]:
        return {
            "logistic": {"midpoint": self.logistic.midpoint, "scale": self.logistic.scale},
            "collapse": {
                "eta": self.collapse.eta,
                "update_tolerance": self.collapse.update_tolerance,
                "max_sweeps": self.collapse.max_sweeps,
                "mode": self.collapse.mode,
            },
            "linkage": self.linkage,
        }


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()


def stage_chain(params: PipelineParams, scores_digest: str) -> dict[str, str]:
    """Hash of every stage's effective inputs, chained in pipeline order."""
    lg, cp = params.logistic, params.collapse
    chain = {"scores": scores_digest}
    chain["distances"] = _digest(
        STAGE_DISTANCES, ENGINE_VERSION, repr(lg.midpoint), repr(lg.scale), chain["scores"]
    )
    chain["collapsed"] = _digest(
        STAGE_COLLAPSE,
        ENGINE_VERSION,
        repr(cp.eta),
        repr(cp.update_tolerance),
        repr(cp.max_sweeps),
        cp.mode,
        chain["distances"],
    )
    chain["dendrogram"] = _digest(STAGE_TREE, ENGINE_VERSION, params.linkage, chain["collapsed"])
    chain["final"] = _digest(STAGE_FINAL, ENGINE_VERSION, chain["dendrogram"], chain["scores"])
    return chain


class WorkPaths:
    """Artifact locations for one work."""

    def __init__(self, root: Path, work_id: str):
        self.work_id = work_id
        self.directory = root / "works" / work_id

    @property
    def manifest(self) -> Path:
        return self.directory / "manifest.json"

    @property
    def scores(self) -> Path:
        return self.directory / "scores.csv"

    @property
    def distances_raw(self) -> Path:
        return self.directory / "distances_raw.csv"

    @property
    def distances_collapsed(self) -> Path:
        return self.directory / "distances_collapsed.csv"

    @property
    def bridges(self) -> Path:
        return self.directory / "bridges.csv"

    @property
    def dendrogram_merges(self) -> Path:
        return self.directory / "dendrogram_merges.csv"

    @property
    def dendrogram_json(self) -> Path:
        return self.directory / "dendrogram.json"

    @property
    def final_scores(self) -> Path:
        return self.directory / "final_scores.csv"

    @property
    def params(self) -> Path:
        return self.directory / "params.json"

    @property
    def annotation_log(self) -> Path:
        return self.directory / "annotations.log"

    @property
    def annotation_snapshot(self) -> Path:
        return self.directory / "annotation.json"

    @property
    def figures_dir(self) -> Path:
        return self.directory / "figures"


# ---------------------------------------------------------------------------
# Artifact readers and writers beyond what the core model provides
# ---------------------------------------------------------------------------

def _comment_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    comments: list[str] = []
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].lstrip().startswith("#"):
                comments.append(",".join(row).lstrip("# "))
            else:
                rows.append(row)
    return comments, rows


def save_bridges(result: CollapseResult, path: Path, comments: Iterable[str] = ()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append("i,j,k")
    for (i, j), k in sorted(result.bridges.items()):
        lines.append(f"{i},{j},{k}")
    path.write_text("\n".join(lines) + "\n")


def load_bridges(path: Path) -> dict[tuple[int, int], int]:
    _comments, rows = _comment_rows(path)
    bridges: dict[tuple[int, int], int] = {}
    for row in rows[1:]:
        i, j, k = (int(c) for c in row)
        bridges[(i, j)] = k
    return bridges


def save_dendrogram_merges(dend: Dendrogram, path: Path) -> None:
    lines = [f"# linkage={dend.linkage}", "a,b,height,size"]
    for a, b, h, s in dend.merges:
        lines.append(f"{a},{b},{h!r},{s}")
    path.write_text("\n".join(lines) + "\n")


def load_dendrogram_merges(path: Path, manifest: WorkManifest) -> Dendrogram:
    comments, rows = _comment_rows(path)
    linkage = AVERAGE
    for c in comments:
        if c.startswith("linkage="):
            linkage = c.split("=", 1)[1].strip()
    merges = tuple(
        (int(r[0]), int(r[1]), float(r[2]), int(r[3])) for r in rows[1:]
    )
    return Dendrogram(track_ids=manifest.track_ids, linkage=linkage, merges=merges)


def save_final_table(table: FinalScoreTable, path: Path, comments: Iterable[str] = ()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append("track_id,direct_score,ensemble_score,cophenetic_to_reference")
    for i, tid in enumerate(table.track_ids):
        lines.append(
            f"{tid},{float(table.direct_score[i])!r},"
            f"{float(table.ensemble_score[i])!r},"
            f"{float(table.cophenetic_to_reference[i])!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def load_final_table(path: Path, manifest: WorkManifest) -> FinalScoreTable:
    _comments, rows = _comment_rows(path)
    by_id = {r[0]: r for r in rows[1:]}
    if set(by_id) != set(manifest.track_ids):
        raise PipelineError(STAGE_FINAL, f"{path}: track ids disagree with manifest")
    direct = np.zeros(manifest.n)
    ensemble = np.zeros(manifest.n)
    coph = np.zeros(manifest.n)
    for i, tid in enumerate(manifest.track_ids):
        _tid, d, e, c = by_id[tid]
        direct[i], ensemble[i], coph[i] = float(d), float(e), float(c)
    return FinalScoreTable(
        track_ids=manifest.track_ids,
        reference_index=manifest.reference_index,
        direct_score=direct,
        ensemble_score=ensemble,
        cophenetic_to_reference=coph,
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Workspace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    """What one pipeline invocation did for one work."""

    work_id: str
    params_hash: str
    #: stage name -> True when the artifact was rebuilt this run.
    recomputed: dict[str, bool]
    sweeps_run: int | None
    converged: bool | None


class Workspace:
    """A directory of works plus cross-work reports."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def works_dir(self) -> Path:
        return self.root / "works"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def paths(self, work_id: str) -> WorkPaths:
        return WorkPaths(self.root, work_id)

    def list_works(self) -> list[str]:
        if not self.works_dir.is_dir():
            return []
        return sorted(
            p.name for p in self.works_dir.iterdir() if (p / "manifest.json").is_file()
        )

    def has_work(self, work_id: str) -> bool:
        return self.paths(work_id).manifest.is_file()

    def add_work(
        self, manifest: WorkManifest, scores: ScoreMatrix, overwrite: bool = False
    ) -> WorkPaths:
        wp = self.paths(manifest.work_id)
        if wp.manifest.exists() and not overwrite:
            raise PipelineError(
                STAGE_SCORES, f"work {manifest.work_id!r} already exists in workspace"
            )
        wp.directory.mkdir(parents=True, exist_ok=True)
        save_manifest(manifest, wp.manifest)
        save_score_matrix(scores, wp.scores, comments=[f"engine={ENGINE_VERSION}"])
        return wp

    def load_manifest(self, work_id: str) -> WorkManifest:
        wp = self.paths(work_id)
        if not wp.manifest.is_file():
            raise PipelineError(STAGE_SCORES, f"unknown work {work_id!r}")
        return load_manifest(wp.manifest)

    def read_params(self, work_id: str) -> dict | None:
        wp = self.paths(work_id)
        if not wp.params.is_file():
            return None
        return json.loads(wp.params.read_text())

    def params_hash(self, work_id: str) -> str | None:
        recorded = self.read_params(work_id)
        if recorded is None:
            return None
        return recorded.get("params_hash")

    # -- pipeline ----------------------------------------------------------

    def run(
        self,
        work_id: str,
        params: PipelineParams | None = None,
        figures: bool = False,
        force: bool = False,
    ) -> RunResult:
        """Bring every artifact of one work up to date with ``params``."""
        params = params or PipelineParams()
        wp = self.paths(work_id)
        manifest = self.load_manifest(work_id)
        if not wp.scores.is_file():
            raise PipelineError(STAGE_SCORES, f"score file not found: {wp.scores}")

        chain = stage_chain(params, hashlib.sha256(wp.scores.read_bytes()).hexdigest())
        recorded = self.read_params(work_id) or {}
        stages = recorded.get("stages", {})

        def fresh(stage: str, *artifacts: Path) -> bool:
            if force:
                return False
            return stages.get(stage) == chain[stage] and all(a.is_file() for a in artifacts)

        recomputed = {"distances": False, "collapsed": False, "dendrogram": False, "final": False}
        scores_m: ScoreMatrix | None = None
        raw: DistanceMatrix | None = None
        collapsed_m: DistanceMatrix | None = None
        result: CollapseResult | None = None
        dend: Dendrogram | None = None
        table: FinalScoreTable | None = None
        sweeps_run: int | None = None
        converged: bool | None = None

        def get_scores() -> ScoreMatrix:
            nonlocal scores_m
            if scores_m is None:
                try:
                    scores_m = load_score_matrix(wp.scores, manifest)
                except ValueError as exc:
                    raise PipelineError(STAGE_SCORES, str(exc)) from exc
            return scores_m

        def get_raw() -> DistanceMatrix:
            nonlocal raw
            if raw is None:
                raw = load_distance_matrix(wp.distances_raw, manifest)
            return raw

        def get_collapsed() -> DistanceMatrix:
            nonlocal collapsed_m
            if collapsed_m is None:
                collapsed_m = load_distance_matrix(wp.distances_collapsed, manifest)
            return collapsed_m

        def get_dend() -> Dendrogram:
            nonlocal dend
            if dend is None:
                dend = load_dendrogram_merges(wp.dendrogram_merges, manifest)
            return dend

        if not fresh("distances", wp.distances_raw):
            try:
                raw = matrix_to_distances(get_scores(), params.logistic)
            except ValueError as exc:
                raise PipelineError(STAGE_DISTANCES, str(exc)) from exc
            save_distance_matrix(
                raw,
                wp.distances_raw,
                comments=[
                    f"engine={ENGINE_VERSION}",
                    f"midpoint={params.logistic.midpoint!r} scale={params.logistic.scale!r}",
                ],
            )
            recomputed["distances"] = True

        if not fresh("collapsed", wp.distances_collapsed, wp.bridges):
            try:
                result = collapse(get_raw(), params.collapse)
            except ValueError as exc:
                raise PipelineError(STAGE_COLLAPSE, str(exc)) from exc
            collapsed_m = result.distances
            sweeps_run, converged = result.sweeps_run, result.converged
            save_distance_matrix(
                collapsed_m,
                wp.distances_collapsed,
                comments=[
                    f"engine={ENGINE_VERSION}",
                    f"eta={params.collapse.eta!r} mode={params.collapse.mode}",
                    f"sweeps={result.sweeps_run} converged={str(result.converged).lower()}",
                ],
            )
            save_bridges(
                result,
                wp.bridges,
                comments=[f"engine={ENGINE_VERSION}", f"eta={params.collapse.eta!r}"],
            )
            recomputed["collapsed"] = True

        if not fresh("dendrogram", wp.dendrogram_merges, wp.dendrogram_json):
            try:
                dend = build_dendrogram(get_collapsed(), params.linkage)
            except ValueError as exc:
                raise PipelineError(STAGE_TREE, str(exc)) from exc
            save_dendrogram_merges(dend, wp.dendrogram_merges)
            _atomic_write(
                wp.dendrogram_json,
                payload_json(
                    dend,
                    work_id=work_id,
                    reference_id=manifest.reference.id,
                    params_hash=chain["final"],
                ),
            )
            recomputed["dendrogram"] = True

        if not fresh("final", wp.final_scores):
            try:
                table = final_scores(get_dend(), manifest.reference_index, get_scores())
            except ValueError as exc:
                raise PipelineError(STAGE_FINAL, str(exc)) from exc
            save_final_table(
                table,
                wp.final_scores,
                comments=[
                    f"engine={ENGINE_VERSION}",
                    f"params_hash={chain['final']}",
                    f"reference={manifest.reference.id}",
                ],
            )
            recomputed["final"] = True

        _atomic_write(
            wp.params,
            json.dumps(
                {
                    "engine_version": ENGINE_VERSION,
                    "work_id": work_id,
                    "params": params.as_dict(),
                    "stages": chain,
                    "params_hash": chain["final"],
                },
                indent=2,
            )
            + "\n",
        )

        if figures:
            self._render_figures(wp, manifest, get_raw(), get_collapsed(), get_dend())

        return RunResult(
            work_id=work_id,
            params_hash=chain["final"],
            recomputed=recomputed,
            sweeps_run=sweeps_run,
            converged=converged,
        )

    def _render_figures(
        self,
        wp: WorkPaths,
        manifest: WorkManifest,
        raw: DistanceMatrix,
        collapsed_m: DistanceMatrix,
        dend: Dendrogram,
    ) -> None:
        from covergraph import plots

        table = load_final_table(wp.final_scores, manifest)
        positive = None
        if manifest.labels:
            positive = np.asarray(
                [manifest.labels.get(tid) == "positive" for tid in manifest.track_ids]
            )
        wp.figures_dir.mkdir(parents=True, exist_ok=True)
        plots.save_score_histogram(
            table, wp.figures_dir / "scores_ensemble.png", positive=positive, column="ensemble"
        )
        plots.save_score_histogram(
            table, wp.figures_dir / "scores_direct.png", positive=positive, column="direct"
        )
        plots.save_distance_heatmaps(raw, collapsed_m, wp.figures_dir / "distances.png")
        plots.save_dendrogram_figure(dend, wp.figures_dir / "dendrogram.png")

    # -- evaluation --------------------------------------------------------

    def evaluate(
        self,
        work_ids: Iterable[str] | None = None,
        protocol: str = "both",
        method: str = "both",
        figures: bool = True,
    ) -> dict[str, object]:
        """Cross-work reports; requires labeled works with final scores."""
        if protocol not in ("ranking", "classification", "both"):
            raise PipelineError(STAGE_EVAL, f"unknown protocol {protocol!r}")
        if method not in ("direct", "ensemble", "both"):
            raise PipelineError(STAGE_EVAL, f"unknown method {method!r}")
        methods = ["direct", "ensemble"] if method == "both" else [method]
        ids = sorted(work_ids) if work_ids is not None else self.list_works()
        if not ids:
            raise PipelineError(STAGE_EVAL, "no works to evaluate")

        reports = {}
        rescued: dict[str, list[dict[str, object]]] = {}
        for wid in ids:
            wp = self.paths(wid)
            manifest = self.load_manifest(wid)
            if not wp.final_scores.is_file():
                raise PipelineError(
                    STAGE_EVAL, f"work {wid!r} has no final scores; run the pipeline first"
                )
            table = load_final_table(wp.final_scores, manifest)
            bridges = load_bridges(wp.bridges) if wp.bridges.is_file() else {}
            try:
                paired = compare_direct_vs_ensemble(manifest, table, bridges=bridges)
            except EvaluationError as exc:
                raise PipelineError(STAGE_EVAL, str(exc)) from exc
            reports[wid] = paired
            rescued[wid] = rescued_payload(paired, table)

        self.reports_dir.mkdir(parents=True, exist_ok=True)
        out: dict[str, object] = {"works": ids, "methods": methods}

        if protocol in ("ranking", "both"):
            ranking = {
                wid: {
                    m: getattr(reports[wid], f"{m}_ranking").as_report_row() for m in methods
                }
                for wid in ids
            }
            payload = {
                "protocol": "ranking",
                "engine_version": ENGINE_VERSION,
                "works": ranking,
            }
            _atomic_write(self.reports_dir / "ranking.json", json.dumps(payload, indent=2) + "\n")
            self._write_report_csv(self.reports_dir / "ranking.csv", ranking, methods)
            out["ranking"] = ranking
            if figures:
                from covergraph import plots

                rates = {
                    wid: {
                        m: getattr(reports[wid], f"{m}_ranking").error_rate
                        for m in ("direct", "ensemble")
                    }
                    for wid in ids
                }
                plots.save_error_bars(
                    rates,
                    self.reports_dir / "figures" / "ranking_error_rates.png",
                    "per-work optimal-threshold error rates",
                )

        if protocol in ("classification", "both"):
            universal = {
                m: universal_threshold(
                    [getattr(reports[wid], f"{m}_ranking").threshold for wid in ids]
                )
                for m in methods
            }
            classification: dict[str, dict[str, dict]] = {}
            for wid in ids:
                manifest = self.load_manifest(wid)
                table = load_final_table(self.paths(wid).final_scores, manifest)
                paired = compare_direct_vs_ensemble(
                    manifest,
                    table,
                    direct_threshold=universal.get("direct"),
                    ensemble_threshold=universal.get("ensemble"),
                )
                classification[wid] = {
                    m: getattr(paired, f"{m}_classification").as_report_row() for m in methods
                }
            payload = {
                "protocol": "classification",
                "engine_version": ENGINE_VERSION,
                "universal_thresholds": universal,
                "works": classification,
            }
            _atomic_write(
                self.reports_dir / "classification.json", json.dumps(payload, indent=2) + "\n"
            )
            self._write_report_csv(
                self.reports_dir / "classification.csv", classification, methods
            )
            out["classification"] = classification
            out["universal_thresholds"] = universal
            if figures and method == "both":
                from covergraph import plots

                rates = {
                    wid: {m: classification[wid][m]["both_rel"] for m in methods}
                    for wid in ids
                }
                plots.save_error_bars(
                    rates,
                    self.reports_dir / "figures" / "classification_error_rates.png",
                    "universal-threshold error rates",
                )

        _atomic_write(self.reports_dir / "rescued.json", json.dumps(rescued, indent=2) + "\n")
        out["rescued"] = rescued
        return out

    @staticmethod
    def _write_report_csv(
        path: Path, rows: Mapping[str, Mapping[str, Mapping[str, object]]], methods: list[str]
    ) -> None:
        lines = [f"# engine={ENGINE_VERSION}"]
        lines.append("work_id,method,best_threshold,fn,fp,both,fn_rel,fp_rel,both_rel")
        for wid in sorted(rows):
            for m in methods:
                r = rows[wid][m]
                lines.append(
                    f"{wid},{m},{r['best_threshold']!r},{r['fn']},{r['fp']},{r['both']},"
                    f"{r['fn_rel']!r},{r['fp_rel']!r},{r['both_rel']!r}"
                )
        path.write_text("\n".join(lines) + "\n")

    def sweep(self, work_id: str, columns: Iterable[str] = ("direct", "ensemble"), figures: bool = True) -> dict[str, list[dict]]:
        """Full threshold error curves for one labeled work, written to CSV."""
        from covergraph.evaluation import labeled_eval_mask, optimal_threshold

        wp = self.paths(work_id)
        manifest = self.load_manifest(work_id)
        if not wp.final_scores.is_file():
            raise PipelineError(STAGE_EVAL, f"work {work_id!r} has no final scores")
        table = load_final_table(wp.final_scores, manifest)
        try:
            mask, positive = labeled_eval_mask(manifest, table)
        except EvaluationError as exc:
            raise PipelineError(STAGE_EVAL, str(exc)) from exc
        idx = np.flatnonzero(mask)
        curves: dict[str, list[dict]] = {}
        optima: dict[str, float] = {}
        for column in columns:
            scores = (table.direct_score if column == "direct" else table.ensemble_score)[idx]
            curves[column] = sweep_rows(scores, positive[idx])
            optima[column] = optimal_threshold(scores, positive[idx]).threshold
            lines = [f"# engine={ENGINE_VERSION}", f"# column={column}"]
            lines.append("threshold,false_negatives,false_positives,errors")
            for r in curves[column]:
                lines.append(
                    f"{r['threshold']!r},{r['false_negatives']},{r['false_positives']},{r['errors']}"
                )
            (wp.directory / f"sweep_{column}.csv").write_text("\n".join(lines) + "\n")
        if figures:
            from covergraph import plots

            wp.figures_dir.mkdir(parents=True, exist_ok=True)
            plots.save_sweep_figure(curves, wp.figures_dir / "sweep.png", optimal=optima)
        return curves


# ---------------------------------------------------------------------------
# Annotations: append-only journal plus an atomic snapshot
# ---------------------------------------------------------------------------

_annotation_locks: dict[Path, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _locks_guard:
        return _annotation_locks.setdefault(path, threading.Lock())


def load_annotation(wp: WorkPaths) -> dict | None:
    if not wp.annotation_snapshot.is_file():
        return None
    return json.loads(wp.annotation_snapshot.read_text())


def append_annotation(
    ws: Workspace,
    work_id: str,
    threshold: float,
    annotator: str,
    base_revision: int | None = None,
) -> dict:
    """Record an accepted threshold; returns the new snapshot.

    The journal is append-only; the snapshot is replaced atomically.  When
    ``base_revision`` is given and does not match the current revision,
    the write is refused so a stale client cannot silently clobber a
    newer annotation.
    """
    if not isinstance(threshold, (int, float)) or not np.isfinite(threshold):
        raise ValueError("threshold must be a finite number")
    if not 0.0 <= float(threshold) <= 100.0:
        raise ValueError("threshold must lie in [0, 100]")
    if not isinstance(annotator, str) or not annotator.strip():
        raise ValueError("annotator must be a non-empty string")

    wp = ws.paths(work_id)
    manifest = ws.load_manifest(work_id)
    if not wp.final_scores.is_file():
        raise PipelineError(STAGE_EVAL, f"work {work_id!r} has no final scores to annotate")

    with _lock_for(wp.directory.resolve()):
        current = load_annotation(wp)
        current_rev = int(current["revision"]) if current else 0
        if base_revision is not None and int(base_revision) != current_rev:
            raise AnnotationConflict(int(base_revision), current_rev)

        table = load_final_table(wp.final_scores, manifest)
        positives = [
            tid
            for i, tid in enumerate(table.track_ids)
            if table.ensemble_score[i] >= float(threshold)
        ]
        entry = {
            "work_id": work_id,
            "revision": current_rev + 1,
            "threshold": float(threshold),
            "annotator": annotator.strip(),
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "params_hash": ws.params_hash(work_id),
            "positives": positives,
        }
        with open(wp.annotation_log, "a") as fh:
            fh.write(json.dumps(entry) + "\n")
        _atomic_write(wp.annotation_snapshot, json.dumps(entry, indent=2) + "\n")
    return entry
