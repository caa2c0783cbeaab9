"""Regenerate the engine fixtures the frontend unit tests run against.

Usage: python3 scripts/make_fixtures.py  (from frontend/)

Everything is seeded, so reruns are byte-stable; the fixtures are
committed and the tests never shell out to the engine themselves.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from covergraph import (
    SyntheticSpec,
    build_dendrogram,
    collapse,
    cut_clusters,
    final_scores,
    generate_synthetic_work,
    matrix_to_distances,
    trace_path,
)
from covergraph.evaluation import labeled_eval_mask, optimal_threshold, sweep_rows
from covergraph.hierarchy import payload_json

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(
        n_candidates=40, positive_fraction=0.3, rng_seed=31, work_id="fixture"
    )
    manifest, scores = generate_synthetic_work(spec)
    raw = matrix_to_distances(scores)
    result = collapse(raw)
    dend = build_dendrogram(result.distances, "average")
    ref = manifest.reference_index
    table = final_scores(dend, ref, scores)
    ref_id = manifest.track_ids[ref]

    (OUT / "dendrogram.json").write_text(
        payload_json(dend, work_id="fixture", reference_id=ref_id, params_hash="fixture")
    )

    # Cut assignments across random heights plus exact merge heights,
    # which pin down the strict-below tie handling.
    rng = np.random.default_rng(123)
    heights = [h for _, _, h, _ in dend.merges]
    thresholds = [0.0, 1e-9, 2.0, max(heights)]
    thresholds += [float(t) for t in rng.uniform(0.0, 1.2, size=38)]
    thresholds += [float(t) for t in rng.choice(heights, size=8)]
    assignments = [[int(c) for c in cut_clusters(dend, t)] for t in thresholds]
    (OUT / "clusters.json").write_text(
        json.dumps({"thresholds": thresholds, "assignments": assignments})
    )

    rows = [
        {
            "track_id": t.id,
            "title": t.title,
            "artist": t.artist,
            "label": (manifest.labels or {}).get(t.id),
            "direct_score": float(table.direct_score[i]),
            "ensemble_score": float(table.ensemble_score[i]),
            "cophenetic": float(table.cophenetic_to_reference[i]),
        }
        for i, t in enumerate(manifest.candidates)
    ]
    (OUT / "scores.json").write_text(
        json.dumps(
            {
                "work_id": "fixture",
                "reference_id": ref_id,
                "rows": rows,
                "params_hash": "fixture",
            }
        )
    )

    mask, positive = labeled_eval_mask(manifest, table)
    idx = np.flatnonzero(mask)
    sweep = {
        "work_id": "fixture",
        "direct": sweep_rows(table.direct_score[idx], positive[idx]),
        "ensemble": sweep_rows(table.ensemble_score[idx], positive[idx]),
        "optimal": {
            "direct": optimal_threshold(table.direct_score[idx], positive[idx]).threshold,
            "ensemble": optimal_threshold(
                table.ensemble_score[idx], positive[idx]
            ).threshold,
        },
        "eval": {
            "ensemble_scores": [float(v) for v in table.ensemble_score[idx]],
            "positive": [bool(v) for v in positive[idx]],
        },
    }
    (OUT / "sweep.json").write_text(json.dumps(sweep))

    bridged = [
        i
        for i in range(manifest.n)
        if i != ref and result.bridges.get((min(ref, i), max(ref, i))) is not None
    ]
    direct = [
        i
        for i in range(manifest.n)
        if i != ref and result.bridges.get((min(ref, i), max(ref, i))) is None
    ]
    if not bridged or not direct:
        raise SystemExit("fixture seed yields no bridged/direct split; pick another seed")
    deepest = max(bridged, key=lambda i: max(trace_path(result, ref, i).depths))
    trace = trace_path(result, ref, deepest)
    (OUT / "path.json").write_text(
        json.dumps(
            {
                "work_id": "fixture",
                "track_id": manifest.track_ids[deepest],
                "nodes": [
                    {
                        "depth": int(d),
                        "track_id": manifest.track_ids[nd],
                        "direct_score": float(table.direct_score[nd]),
                        "ensemble_score": float(table.ensemble_score[nd]),
                    }
                    for d, nd in zip(trace.depths, trace.nodes)
                ],
                "no_path_track": manifest.track_ids[direct[0]],
            }
        )
    )
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
