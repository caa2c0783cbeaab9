import { AnnotationConflictError, ApiClient, ApiError } from "./api.js";
import { renderDendrogram } from "./dendrogram.js";
import { renderNoPath, renderPathTable } from "./path.js";
import { positiveSet, sliderToHeight, ViewState } from "./state.js";
import { readoutAt } from "./sweep.js";
import type {
  DendrogramPayload,
  PathResponse,
  ScoresResponse,
  SweepResponse,
  WorkSummary,
} from "./types.js";

const api = new ApiClient("");
const state = new ViewState();

interface WorkCache {
  scores: ScoresResponse;
  dendrogram: DendrogramPayload | null;
  dendrogramError: string | null;
  sweep: SweepResponse | null;
  lastRevision: number | null;
  paths: Map<string, PathResponse | null>;
}

let cache: WorkCache | null = null;
let committing = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const workSelect = el<HTMLSelectElement>("work-select");
const workMeta = el<HTMLElement>("work-meta");
const slider = el<HTMLInputElement>("threshold-slider");
const thresholdValue = el<HTMLElement>("threshold-value");
const dirtyFlag = el<HTMLElement>("dirty-flag");
const readout = el<HTMLElement>("readout");
const annotatorInput = el<HTMLInputElement>("annotator-input");
const commitBtn = el<HTMLButtonElement>("commit-btn");
const commitStatus = el<HTMLElement>("commit-status");
const dendrogramPanel = el<HTMLElement>("dendrogram-panel");
const positivesPanel = el<HTMLElement>("positives-panel");
const pathPanel = el<HTMLElement>("path-panel");
const errorPanel = el<HTMLElement>("error-panel");

function showError(message: string): void {
  errorPanel.textContent = message;
  errorPanel.classList.add("visible");
}

function clearError(): void {
  errorPanel.textContent = "";
  errorPanel.classList.remove("visible");
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.message} (HTTP ${err.status})`;
  return err instanceof Error ? err.message : String(err);
}

function renderDendrogramPanel(): void {
  if (cache === null) return;
  if (cache.dendrogram === null) {
    dendrogramPanel.innerHTML = `<p class="panel-note">${cache.dendrogramError ?? "no dendrogram"}</p>`;
    return;
  }
  const cutHeight = sliderToHeight(state.threshold);
  try {
    const width = Math.max(dendrogramPanel.clientWidth || 900, 400);
    dendrogramPanel.innerHTML = renderDendrogram(cache.dendrogram, cutHeight, { width });
  } catch (err) {
    dendrogramPanel.innerHTML = "";
    showError(`dendrogram: ${describeError(err)}`);
  }
}

function renderReadout(): void {
  if (cache === null || cache.sweep === null) {
    readout.classList.add("hidden");
    readout.textContent = "";
    return;
  }
  const row = readoutAt(cache.sweep.ensemble, state.threshold);
  readout.classList.remove("hidden");
  readout.textContent =
    `missed positives ${row.false_negatives} · false alarms ${row.false_positives}` +
    ` · total errors ${row.errors}`;
}

function renderPositives(): void {
  if (cache === null) return;
  const ids = new Set(positiveSet(cache.scores.rows, state.threshold));
  const rows = [...cache.scores.rows].sort((a, b) => b.ensemble_score - a.ensemble_score);
  const parts: string[] = [];
  parts.push(`<h3>positive set · ${ids.size} of ${rows.length}</h3>`);
  parts.push('<table class="scores-table"><thead><tr>');
  parts.push("<th>track</th><th>direct</th><th>ensemble</th><th>label</th>");
  parts.push("</tr></thead><tbody>");
  for (const row of rows) {
    const isRef = row.track_id === cache.scores.reference_id;
    const classes = [ids.has(row.track_id) ? "positive" : "negative"];
    if (isRef) classes.push("reference-row");
    parts.push(
      `<tr class="${classes.join(" ")}" data-track="${row.track_id}">` +
        `<td>${row.track_id}${isRef ? " ★" : ""}</td>` +
        `<td>${row.direct_score.toFixed(1)}</td>` +
        `<td>${row.ensemble_score.toFixed(1)}</td>` +
        `<td>${row.label ?? ""}</td></tr>`,
    );
  }
  parts.push("</tbody></table>");
  positivesPanel.innerHTML = parts.join("");
}

function renderPathPanel(): void {
  if (cache === null || state.pathTrack === null) {
    pathPanel.innerHTML = '<p class="panel-note">click a track to inspect its path</p>';
    return;
  }
  const trackId = state.pathTrack;
  if (!cache.paths.has(trackId)) return; // fetch still in flight
  const path = cache.paths.get(trackId)!;
  if (path === null) {
    pathPanel.innerHTML = renderNoPath(trackId);
    return;
  }
  pathPanel.innerHTML = renderPathTable(path, {
    direct: cache.sweep?.optimal.direct ?? null,
    ensemble: state.threshold,
  });
}

function renderControls(): void {
  slider.value = String(state.threshold);
  thresholdValue.textContent = state.threshold.toFixed(1);
  dirtyFlag.classList.toggle("hidden", !state.dirty);
  commitBtn.disabled = committing || !state.dirty || cache === null;
}

function renderAll(): void {
  renderControls();
  renderDendrogramPanel();
  renderReadout();
  renderPositives();
  renderPathPanel();
}

async function selectPathTrack(trackId: string): Promise<void> {
  if (cache === null || state.workId === null) return;
  state.pathTrack = trackId;
  if (!cache.paths.has(trackId)) {
    pathPanel.innerHTML = '<p class="panel-note">loading path…</p>';
    try {
      if (trackId === cache.scores.reference_id) {
        // The reference is its own depth-0 chain; no endpoint to ask.
        const row = cache.scores.rows.find((r) => r.track_id === trackId)!;
        cache.paths.set(trackId, {
          work_id: state.workId,
          track_id: trackId,
          nodes: [
            {
              depth: 0,
              track_id: trackId,
              direct_score: row.direct_score,
              ensemble_score: row.ensemble_score,
            },
          ],
        });
      } else {
        cache.paths.set(trackId, await api.getPath(state.workId, trackId));
      }
    } catch (err) {
      pathPanel.innerHTML = `<p class="panel-note">path: ${describeError(err)}</p>`;
      return;
    }
  }
  renderPathPanel();
}

async function loadWork(workId: string): Promise<void> {
  clearError();
  commitStatus.textContent = "";
  cache = null;
  dendrogramPanel.innerHTML = '<p class="panel-note">loading…</p>';
  try {
    const [detail, scores, sweep, annotation] = await Promise.all([
      api.getWork(workId),
      api.getScores(workId),
      api.getSweep(workId),
      api.getAnnotation(workId),
    ]);
    let dendrogram: DendrogramPayload | null = null;
    let dendrogramError: string | null = null;
    try {
      dendrogram = await api.getDendrogram(workId);
    } catch (err) {
      dendrogramError = describeError(err);
    }
    cache = {
      scores,
      dendrogram,
      dendrogramError,
      sweep,
      lastRevision: annotation?.revision ?? null,
      paths: new Map(),
    };
    state.selectWork(workId, annotation?.threshold ?? null);
    workMeta.textContent =
      `${detail.n_candidates} candidates · reference ${detail.reference_id}` +
      (annotation !== null ? ` · annotation rev ${annotation.revision}` : " · not annotated");
    renderAll();
  } catch (err) {
    showError(`load ${workId}: ${describeError(err)}`);
    dendrogramPanel.innerHTML = "";
    positivesPanel.innerHTML = "";
    pathPanel.innerHTML = "";
  }
}

function describeSnapshot(revision: number, threshold: number, positives: number): string {
  return `saved revision ${revision}: threshold ${threshold.toFixed(1)}, ${positives} positives`;
}

async function commit(): Promise<void> {
  if (cache === null || state.workId === null || committing || !state.dirty) return;
  const annotator = annotatorInput.value.trim() || "annotator";
  committing = true;
  renderControls();
  commitStatus.textContent = "saving…";
  try {
    const saved = await api.postAnnotation(state.workId, {
      threshold: state.threshold,
      annotator,
      base_revision: cache.lastRevision,
    });
    cache.lastRevision = saved.revision;
    state.markCommitted(saved.threshold);
    commitStatus.textContent = describeSnapshot(
      saved.revision,
      saved.threshold,
      saved.positives.length,
    );
  } catch (err) {
    if (err instanceof AnnotationConflictError) {
      cache.lastRevision = err.currentRevision;
      commitStatus.innerHTML =
        `someone else saved revision ${err.currentRevision}; ` +
        '<button id="retry-btn" type="button">retry on top of it</button>';
    } else {
      commitStatus.innerHTML =
        `save failed: ${describeError(err)} ` + '<button id="retry-btn" type="button">retry</button>';
    }
    const retry = document.getElementById("retry-btn");
    retry?.addEventListener("click", () => void commit(), { once: true });
  } finally {
    committing = false;
    renderControls();
  }
}

function trackFromEvent(event: Event): string | null {
  const target = event.target as Element | null;
  const hit = target?.closest("[data-track]");
  return hit?.getAttribute("data-track") ?? null;
}

async function init(): Promise<void> {
  slider.addEventListener("input", () => {
    state.setThreshold(Number.parseFloat(slider.value));
    renderAll();
  });
  commitBtn.addEventListener("click", () => void commit());
  for (const panel of [dendrogramPanel, positivesPanel]) {
    panel.addEventListener("click", (event) => {
      const trackId = trackFromEvent(event);
      if (trackId !== null) void selectPathTrack(trackId);
    });
  }
  dendrogramPanel.addEventListener("mouseover", (event) => {
    state.hoveredTrack = trackFromEvent(event);
  });

  try {
    const works = await api.listWorks();
    const ready = works.filter((w: WorkSummary) => w.has_final_scores);
    if (ready.length === 0) {
      showError("no processed works on this server; run the pipeline first");
      return;
    }
    workSelect.innerHTML = ready
      .map((w) => `<option value="${w.work_id}">${w.work_id} (${w.n_candidates})</option>`)
      .join("");
    workSelect.addEventListener("change", () => void loadWork(workSelect.value));
    await loadWork(ready[0]!.work_id);
  } catch (err) {
    showError(describeError(err));
  }
}

void init();
