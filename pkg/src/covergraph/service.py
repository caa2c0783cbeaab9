"""HTTP facade over a workspace for the annotation UI.

All GET endpoints are pure views of on-disk artifacts: they never trigger
pipeline stages and never write.  The single mutating endpoint appends an
annotation under an optimistic concurrency check.  Responses that derive
from pipeline artifacts carry the work's ``params_hash`` so clients can
detect that two responses came from the same pipeline configuration.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from covergraph import __version__
from covergraph.collapse import expand_path
from covergraph.evaluation import (
    EvaluationError,
    labeled_eval_mask,
    optimal_threshold,
    sweep_rows,
)
from covergraph.hierarchy import cut_clusters
from covergraph.model import WorkManifest
from covergraph.workspace import (
    AnnotationConflict,
    FinalScoreTable,
    Workspace,
    append_annotation,
    load_annotation,
    load_bridges,
    load_dendrogram_merges,
    load_final_table,
)


def create_app(workspace_root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    ws = Workspace(workspace_root)
    app = FastAPI(title="covergraph", version=__version__)

    def get_manifest(work_id: str) -> WorkManifest:
        if not ws.has_work(work_id):
            raise HTTPException(status_code=404, detail=f"unknown work {work_id!r}")
        return ws.load_manifest(work_id)

    def get_table(work_id: str, manifest: WorkManifest) -> FinalScoreTable:
        wp = ws.paths(work_id)
        if not wp.final_scores.is_file():
            raise HTTPException(
                status_code=404,
                detail=f"work {work_id!r} has no final scores; run the pipeline first",
            )
        return load_final_table(wp.final_scores, manifest)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "engine_version": __version__}

    @app.get("/api/works")
    def works() -> dict:
        rows = []
        for wid in ws.list_works():
            manifest = ws.load_manifest(wid)
            rows.append(
                {
                    "work_id": wid,
                    "n_candidates": manifest.n,
                    "reference_id": manifest.reference.id,
                    "labeled": bool(manifest.labels),
                    "has_final_scores": ws.paths(wid).final_scores.is_file(),
                    "params_hash": ws.params_hash(wid),
                }
            )
        return {"works": rows}

    @app.get("/api/works/{work_id}")
    def work_detail(work_id: str) -> dict:
        manifest = get_manifest(work_id)
        recorded = ws.read_params(work_id) or {}
        return {
            "work_id": work_id,
            "reference_id": manifest.reference.id,
            "n_candidates": manifest.n,
            "candidates": [
                {
                    "id": t.id,
                    "title": t.title,
                    "artist": t.artist,
                    "uri": t.uri,
                    "label": (manifest.labels or {}).get(t.id),
                }
                for t in manifest.candidates
            ],
            "params": recorded.get("params"),
            "params_hash": recorded.get("params_hash"),
            "engine_version": __version__,
        }

    @app.get("/api/works/{work_id}/scores")
    def scores(work_id: str) -> dict:
        manifest = get_manifest(work_id)
        table = get_table(work_id, manifest)
        rows = []
        for i, t in enumerate(manifest.candidates):
            rows.append(
                {
                    "track_id": t.id,
                    "title": t.title,
                    "artist": t.artist,
                    "label": (manifest.labels or {}).get(t.id),
                    "direct_score": float(table.direct_score[i]),
                    "ensemble_score": float(table.ensemble_score[i]),
                    "cophenetic": float(table.cophenetic_to_reference[i]),
                }
            )
        return {
            "work_id": work_id,
            "reference_id": manifest.reference.id,
            "rows": rows,
            "params_hash": ws.params_hash(work_id),
        }

    @app.get("/api/works/{work_id}/dendrogram")
    def dendrogram(work_id: str) -> Response:
        get_manifest(work_id)
        path = ws.paths(work_id).dendrogram_json
        if not path.is_file():
            raise HTTPException(
                status_code=404, detail=f"work {work_id!r} has no dendrogram artifact"
            )
        # Streamed verbatim: deep trees would overflow a recursive encoder,
        # and byte-stability keeps caching trivial.
        return Response(content=path.read_bytes(), media_type="application/json")

    @app.get("/api/works/{work_id}/clusters")
    def clusters(work_id: str, threshold: float) -> dict:
        manifest = get_manifest(work_id)
        if not np.isfinite(threshold) or threshold < 0:
            raise HTTPException(status_code=400, detail="threshold must be finite and >= 0")
        wp = ws.paths(work_id)
        if not wp.dendrogram_merges.is_file():
            raise HTTPException(
                status_code=404, detail=f"work {work_id!r} has no dendrogram artifact"
            )
        dend = load_dendrogram_merges(wp.dendrogram_merges, manifest)
        assignment = cut_clusters(dend, threshold)
        return {
            "work_id": work_id,
            "threshold": threshold,
            "clusters": [
                {
                    "track_id": manifest.track_ids[i],
                    "cluster_index": int(assignment[i]),
                    "cluster_track_id": manifest.track_ids[int(assignment[i])],
                }
                for i in range(manifest.n)
            ],
            "params_hash": ws.params_hash(work_id),
        }

    @app.get("/api/works/{work_id}/path/{track_id}")
    def provenance_path(work_id: str, track_id: str) -> dict:
        manifest = get_manifest(work_id)
        try:
            idx = manifest.index_of(track_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown track {track_id!r}")
        ref = manifest.reference_index
        if idx == ref:
            raise HTTPException(
                status_code=400, detail="the reference has no path to itself"
            )
        wp = ws.paths(work_id)
        if not wp.bridges.is_file():
            raise HTTPException(
                status_code=404, detail=f"work {work_id!r} has no collapse artifacts"
            )
        bridges = load_bridges(wp.bridges)
        if bridges.get((min(ref, idx), max(ref, idx))) is None:
            raise HTTPException(
                status_code=404,
                detail="no path recorded (direct match or isolated track)",
            )
        table = get_table(work_id, manifest)
        trace = expand_path(bridges, manifest.n, ref, idx)
        return {
            "work_id": work_id,
            "track_id": track_id,
            "nodes": [
                {
                    "depth": depth,
                    "track_id": manifest.track_ids[node],
                    "direct_score": float(table.direct_score[node]),
                    "ensemble_score": float(table.ensemble_score[node]),
                }
                for depth, node in zip(trace.depths, trace.nodes)
            ],
            "params_hash": ws.params_hash(work_id),
        }

    @app.get("/api/works/{work_id}/sweep")
    def sweep(work_id: str) -> dict:
        manifest = get_manifest(work_id)
        table = get_table(work_id, manifest)
        try:
            mask, positive = labeled_eval_mask(manifest, table)
        except EvaluationError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        idx = np.flatnonzero(mask)
        out: dict = {"work_id": work_id, "params_hash": ws.params_hash(work_id)}
        optima = {}
        for column, values in (
            ("direct", table.direct_score),
            ("ensemble", table.ensemble_score),
        ):
            out[column] = sweep_rows(values[idx], positive[idx])
            optima[column] = optimal_threshold(values[idx], positive[idx]).threshold
        out["optimal"] = optima
        return out

    @app.get("/api/works/{work_id}/annotation")
    def annotation(work_id: str) -> dict:
        get_manifest(work_id)
        snapshot = load_annotation(ws.paths(work_id))
        if snapshot is None:
            raise HTTPException(status_code=404, detail=f"work {work_id!r} has no annotation")
        return snapshot

    @app.post("/api/works/{work_id}/annotation")
    def annotate(work_id: str, body: dict = Body(...)) -> dict:
        get_manifest(work_id)
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        threshold = body.get("threshold")
        annotator = body.get("annotator")
        base_revision = body.get("base_revision")
        if base_revision is not None and not isinstance(base_revision, int):
            raise HTTPException(status_code=400, detail="base_revision must be an integer")
        try:
            return append_annotation(
                ws,
                work_id,
                threshold=threshold,
                annotator=annotator,
                base_revision=base_revision,
            )
        except AnnotationConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={
                    "message": str(exc),
                    "current_revision": exc.current_revision,
                },
            )
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
