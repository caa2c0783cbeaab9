import type { PathResponse } from "./types.js";

export interface PathThresholds {
  /** Direct-score threshold, usually the sweep optimum; null hides
   * the direct bolding entirely (unlabeled work). */
  direct: number | null;
  /** Ensemble threshold, the slider's current value. */
  ensemble: number;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function cell(value: number, threshold: number | null): string {
  const text = value.toFixed(1);
  const above = threshold !== null && value >= threshold;
  return above ? `<td class="score above"><strong>${text}</strong></td>` : `<td class="score">${text}</td>`;
}

/** Depth-ordered provenance chain as an HTML table string. Scores at
 * or above their thresholds are bolded, so the annotator can see at a
 * glance where the direct score fell short and the ensemble caught it. */
export function renderPathTable(path: PathResponse, thresholds: PathThresholds): string {
  const rows = [...path.nodes].sort((a, b) => a.depth - b.depth);
  const parts: string[] = [];
  parts.push('<table class="path-table">');
  parts.push(
    "<thead><tr><th>depth</th><th>track</th><th>direct</th><th>ensemble</th></tr></thead>",
  );
  parts.push("<tbody>");
  for (const node of rows) {
    const refClass = node.depth === 0 ? ' class="reference-row"' : "";
    parts.push(
      `<tr${refClass} data-track="${escapeHtml(node.track_id)}">` +
        `<td class="depth">${node.depth}</td>` +
        `<td class="track">${escapeHtml(node.track_id)}</td>` +
        cell(node.direct_score, thresholds.direct) +
        cell(node.ensemble_score, thresholds.ensemble) +
        "</tr>",
    );
  }
  parts.push("</tbody></table>");
  return parts.join("");
}

/** Shown when the engine recorded no bridge for the pair. */
export function renderNoPath(trackId: string): string {
  return (
    `<p class="no-path" data-track="${escapeHtml(trackId)}">` +
    `${escapeHtml(trackId)}: no path recorded (direct match or isolated)</p>`
  );
}
