"""Command-line interface.

All state lives in a workspace directory; every command reads or updates
that tree.  Defaults can be overridden by a JSON config file and any
explicitly passed flag wins over the config.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
from click.core import ParameterSource

from covergraph import __version__
from covergraph.alignment import AlignmentParams, load_feature_sequence, score_all_pairs
from covergraph.collapse import IN_PLACE, SYNCHRONOUS, CollapseParams
from covergraph.distance import LogisticParams
from covergraph.hierarchy import LINKAGES, cut_clusters
from covergraph.model import load_manifest, load_score_matrix
from covergraph.synth import SyntheticSpec, generate_synthetic_work
from covergraph.workspace import (
    PipelineError,
    PipelineParams,
    Workspace,
    load_bridges,
    load_dendrogram_merges,
    load_final_table,
)
from covergraph.collapse import expand_path


def _config_get(cfg: dict, *keys: str):
    node = cfg
    for key in keys:
        if not isinstance(node, dict) or key not in node:
            return None
        node = node[key]
    return node


def _pick(ctx: click.Context, name: str, cli_value, cfg_value):
    """Explicit flag > config file > click default."""
    if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
        return cli_value
    if cfg_value is not None:
        return cfg_value
    return cli_value


@click.group()
@click.version_option(__version__, prog_name="covergraph")
@click.option("--workspace", type=click.Path(path_type=Path), default=Path("workspace"),
              show_default=True, help="Workspace directory holding works and reports.")
@click.option("--logistic-midpoint", type=float, default=4.3, show_default=True,
              help="Score at which the transform yields distance 0.5.")
@click.option("--logistic-scale", type=float, default=0.5, show_default=True,
              help="Width of the logistic transition.")
@click.option("--eta", type=float, default=0.01, show_default=True,
              help="Penalty added per accepted shortcut during the collapse.")
@click.option("--linkage", type=click.Choice(LINKAGES), default="average",
              show_default=True, help="Cluster distance rule for the merge tree.")
@click.option("--seed", type=int, default=None, help="Seed for synthetic generation.")
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True),
              default=None, help="JSON config file; explicit flags override it.")
@click.pass_context
def main(ctx, workspace, logistic_midpoint, logistic_scale, eta, linkage, seed, config_path):
    """Cover-version identification over pairwise score graphs."""
    cfg = {}
    if config_path is not None:
        try:
            cfg = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise click.ClickException(f"config {config_path}: {exc}")
    ctx.obj = {
        "workspace": Path(_pick(ctx, "workspace", workspace, _config_get(cfg, "workspace"))),
        "midpoint": float(_pick(ctx, "logistic_midpoint", logistic_midpoint,
                                _config_get(cfg, "logistic", "midpoint"))),
        "scale": float(_pick(ctx, "logistic_scale", logistic_scale,
                             _config_get(cfg, "logistic", "scale"))),
        "eta": float(_pick(ctx, "eta", eta, _config_get(cfg, "collapse", "eta"))),
        "linkage": str(_pick(ctx, "linkage", linkage, _config_get(cfg, "linkage"))),
        "seed": _pick(ctx, "seed", seed, _config_get(cfg, "seed")),
        "config": cfg,
    }


def _params(obj: dict, mode=None, max_sweeps=None, update_tolerance=None) -> PipelineParams:
    cfg = obj["config"]
    mode = mode or _config_get(cfg, "collapse", "mode") or IN_PLACE
    max_sweeps = max_sweeps or _config_get(cfg, "collapse", "max_sweeps") or 100
    if update_tolerance is None:
        update_tolerance = _config_get(cfg, "collapse", "update_tolerance")
    if update_tolerance is None:
        update_tolerance = 1e-9
    try:
        return PipelineParams(
            logistic=LogisticParams(midpoint=obj["midpoint"], scale=obj["scale"]),
            collapse=CollapseParams(
                eta=obj["eta"],
                update_tolerance=float(update_tolerance),
                max_sweeps=int(max_sweeps),
                mode=mode,
            ),
            linkage=obj["linkage"],
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))


def _run_one(ws: Workspace, work_id: str, params: PipelineParams, figures: bool, force: bool):
    result = ws.run(work_id, params, figures=figures, force=force)
    done = [s for s, r in result.recomputed.items() if r]
    stages = ", ".join(done) if done else "all artifacts reused"
    click.echo(f"{work_id}: {stages} (params {result.params_hash[:12]})")
    if result.sweeps_run is not None:
        state = "converged" if result.converged else "hit sweep limit"
        click.echo(f"{work_id}: collapse {state} after {result.sweeps_run} sweeps")


@main.command()
@click.option("--n", "n_candidates", type=int, default=200, show_default=True)
@click.option("--positive-fraction", type=float, default=0.3, show_default=True)
@click.option("--latent-span", type=float, default=3.0, show_default=True)
@click.option("--decay-scale", type=float, default=1.0, show_default=True)
@click.option("--peak-score", type=float, default=12.0, show_default=True)
@click.option("--noise-spread", type=float, default=0.25, show_default=True)
@click.option("--negative-center", type=float, default=2.0, show_default=True)
@click.option("--negative-spread", type=float, default=0.5, show_default=True)
@click.option("--work-id", default="synthetic", show_default=True)
@click.option("--count", type=int, default=1, show_default=True,
              help="Generate several works, suffixing ids and advancing the seed.")
@click.option("--force", is_flag=True, help="Overwrite existing works of the same id.")
@click.pass_obj
def synth(obj, n_candidates, positive_fraction, latent_span, decay_scale, peak_score,
          noise_spread, negative_center, negative_spread, work_id, count, force):
    """Generate seeded synthetic works with known labels."""
    ws = Workspace(obj["workspace"])
    base_seed = obj["seed"] if obj["seed"] is not None else 0
    for k in range(count):
        wid = work_id if count == 1 else f"{work_id}{k:02d}"
        try:
            spec = SyntheticSpec(
                n_candidates=n_candidates,
                positive_fraction=positive_fraction,
                latent_span=latent_span,
                decay_scale=decay_scale,
                peak_score=peak_score,
                noise_spread=noise_spread,
                negative_center=negative_center,
                negative_spread=negative_spread,
                rng_seed=base_seed + k,
                work_id=wid,
            )
            manifest, scores = generate_synthetic_work(spec)
            ws.add_work(manifest, scores, overwrite=force)
        except (ValueError, PipelineError) as exc:
            raise click.ClickException(str(exc))
        n_pos = sum(1 for v in manifest.labels.values() if v == "positive")
        click.echo(f"{wid}: {manifest.n} candidates, {n_pos} positives, seed {base_seed + k}")


@main.command()
@click.option("--work", "work_ids", multiple=True, help="Work to process (repeatable); default all.")
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path, exists=True),
              default=None, help="Import this manifest before running.")
@click.option("--scores", "scores_path", type=click.Path(path_type=Path, exists=True),
              default=None, help="Raw pairwise scores (triplet or dense CSV) to import.")
@click.option("--features-dir", type=click.Path(path_type=Path, exists=True, file_okay=False),
              default=None, help="Directory of per-track frame CSVs to score pairwise.")
@click.option("--mode", type=click.Choice([IN_PLACE, SYNCHRONOUS]), default=None,
              help="Collapse sweep discipline.")
@click.option("--max-sweeps", type=int, default=None)
@click.option("--update-tolerance", type=float, default=None)
@click.option("--figures/--no-figures", default=False, show_default=True,
              help="Render per-work diagnostic PNGs.")
@click.option("--force", is_flag=True, help="Recompute every stage.")
@click.pass_obj
def run(obj, work_ids, manifest_path, scores_path, features_dir, mode, max_sweeps,
        update_tolerance, figures, force):
    """Run the pipeline: scores -> distances -> collapse -> tree -> final scores."""
    ws = Workspace(obj["workspace"])
    params = _params(obj, mode=mode, max_sweeps=max_sweeps, update_tolerance=update_tolerance)
    try:
        if manifest_path is not None:
            manifest = load_manifest(manifest_path)
            if scores_path is not None:
                scores = load_score_matrix(scores_path, manifest)
            elif features_dir is not None:
                features = {}
                for tid in manifest.track_ids:
                    fpath = Path(features_dir) / f"{tid}.csv"
                    if not fpath.is_file():
                        raise click.ClickException(f"missing feature file: {fpath}")
                    features[tid] = load_feature_sequence(fpath, tid)
                scores = score_all_pairs(manifest, features, AlignmentParams())
            else:
                raise click.ClickException("--manifest needs --scores or --features-dir")
            ws.add_work(manifest, scores, overwrite=True)
            work_ids = (*work_ids, manifest.work_id)
        targets = list(dict.fromkeys(work_ids)) or ws.list_works()
        if not targets:
            raise click.ClickException("workspace has no works; import or generate one first")
        for wid in targets:
            _run_one(ws, wid, params, figures, force)
    except (PipelineError, ValueError) as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option("--work", "work_ids", multiple=True, help="Works to evaluate; default all.")
@click.option("--protocol", type=click.Choice(["ranking", "classification", "both"]),
              default="both", show_default=True)
@click.option("--method", type=click.Choice(["direct", "ensemble", "both"]),
              default="both", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--refresh/--no-refresh", default=True, show_default=True,
              help="Bring artifacts up to date with the current parameters first.")
@click.pass_obj
def evaluate(obj, work_ids, protocol, method, figures, refresh):
    """Write ranking/classification reports and the rescued-track listing."""
    ws = Workspace(obj["workspace"])
    params = _params(obj)
    ids = list(work_ids) or ws.list_works()
    if not ids:
        raise click.ClickException("workspace has no works to evaluate")
    try:
        if refresh:
            for wid in ids:
                ws.run(wid, params)
        out = ws.evaluate(ids, protocol=protocol, method=method, figures=figures)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    if "ranking" in out:
        click.echo("ranking (per-work optimal thresholds):")
        for wid, rows in out["ranking"].items():
            for m, r in rows.items():
                click.echo(
                    f"  {wid} {m}: thr={r['best_threshold']:.6g} fn={r['fn']} "
                    f"fp={r['fp']} both={r['both']} rate={r['both_rel']:.4f}"
                )
    if "universal_thresholds" in out:
        uni = out["universal_thresholds"]
        click.echo("classification (universal thresholds): "
                   + ", ".join(f"{m}={t:.6g}" for m, t in uni.items()))
    n_rescued = sum(len(v) for v in out["rescued"].values())
    click.echo(f"rescued tracks: {n_rescued} (reports in {ws.reports_dir})")


@main.command()
@click.option("--work", required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.pass_obj
def sweep(obj, work, figures):
    """Emit full threshold error curves for one labeled work."""
    ws = Workspace(obj["workspace"])
    try:
        curves = ws.sweep(work, figures=figures)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    for column, rows in curves.items():
        best = min(rows, key=lambda r: r["errors"])
        click.echo(f"{column}: {len(rows)} thresholds, min errors {best['errors']}")
    click.echo(f"curves written to {ws.paths(work).directory}")


@main.command()
@click.option("--work", required=True)
@click.option("--track", required=True)
@click.pass_obj
def path(obj, work, track):
    """Show how the collapse connected one track to the reference."""
    ws = Workspace(obj["workspace"])
    try:
        manifest = ws.load_manifest(work)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    wp = ws.paths(work)
    if not wp.bridges.is_file():
        raise click.ClickException(f"work {work!r} has no collapse artifacts; run first")
    try:
        idx = manifest.index_of(track)
    except KeyError:
        raise click.ClickException(f"unknown track {track!r}")
    ref = manifest.reference_index
    if idx == ref:
        raise click.ClickException("the reference has no path to itself")
    bridges = load_bridges(wp.bridges)
    if bridges.get((min(ref, idx), max(ref, idx))) is None:
        click.echo("no path recorded (direct match or isolated track)")
        return
    table = load_final_table(wp.final_scores, manifest) if wp.final_scores.is_file() else None
    trace = expand_path(bridges, manifest.n, ref, idx)
    click.echo("depth  track_id        direct  ensemble")
    for depth, node in zip(trace.depths, trace.nodes):
        tid = manifest.track_ids[node]
        if table is not None:
            click.echo(
                f"{depth:>5}  {tid:<14}  {table.direct_score[node]:>6.1f}  "
                f"{table.ensemble_score[node]:>8.1f}"
            )
        else:
            click.echo(f"{depth:>5}  {tid}")


@main.command()
@click.option("--work", required=True)
@click.option("--threshold", type=float, required=True,
              help="Cut height in distance units (0 to 1).")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write assignments to this CSV instead of stdout.")
@click.pass_obj
def clusters(obj, work, threshold, out):
    """Flat clusters of one work at a cut height."""
    ws = Workspace(obj["workspace"])
    try:
        manifest = ws.load_manifest(work)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    wp = ws.paths(work)
    if not wp.dendrogram_merges.is_file():
        raise click.ClickException(f"work {work!r} has no dendrogram; run first")
    dend = load_dendrogram_merges(wp.dendrogram_merges, manifest)
    try:
        assignment = cut_clusters(dend, threshold)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    if out is not None:
        lines = ["track_id,cluster_track_id"]
        for i, tid in enumerate(manifest.track_ids):
            lines.append(f"{tid},{manifest.track_ids[int(assignment[i])]}")
        Path(out).write_text("\n".join(lines) + "\n")
        click.echo(f"wrote {out}")
        return
    groups: dict[int, list[str]] = {}
    for i, tid in enumerate(manifest.track_ids):
        groups.setdefault(int(assignment[i]), []).append(tid)
    for root in sorted(groups):
        members = groups[root]
        click.echo(f"{manifest.track_ids[root]} ({len(members)}): {', '.join(members)}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--ui-dir", type=click.Path(path_type=Path, exists=True, file_okay=False),
              default=None, help="Static directory to serve at the site root.")
@click.pass_obj
def serve(obj, host, port, ui_dir):
    """Serve the workspace over HTTP for the annotation UI."""
    import uvicorn

    from covergraph.service import create_app

    app = create_app(obj["workspace"], ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
