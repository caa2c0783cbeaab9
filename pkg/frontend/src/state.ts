import type { ScoreRow } from "./types.js";

// The slider lives on the final-score scale (0..100, higher = closer to
// the reference); the dendrogram cut lives on the height scale (0..1).
// score = 100 * (1 - height) ties the two together.

export function sliderToHeight(threshold: number): number {
  return 1 - clampThreshold(threshold) / 100;
}

export function heightToSlider(height: number): number {
  return 100 * (1 - height);
}

export function clampThreshold(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(100, Math.max(0, value));
}

/** Track ids whose ensemble score clears the threshold (the would-be
 * positive set of a commit at this slider position). */
export function positiveSet(rows: ScoreRow[], threshold: number): string[] {
  return rows.filter((r) => r.ensemble_score >= threshold).map((r) => r.track_id);
}

export class ViewState {
  workId: string | null = null;
  hoveredTrack: string | null = null;
  pathTrack: string | null = null;
  private displayed = 50;
  private committed: number | null = null;

  get threshold(): number {
    return this.displayed;
  }

  setThreshold(value: number): void {
    this.displayed = clampThreshold(value);
  }

  /** Dirty means the slider position is not what the server last stored. */
  get dirty(): boolean {
    return this.committed === null || this.displayed !== this.committed;
  }

  markCommitted(threshold: number): void {
    this.committed = clampThreshold(threshold);
    this.displayed = this.committed;
  }

  /** Reset for a newly selected work; the annotation (if any) seeds the
   * committed value so the view starts clean. */
  selectWork(workId: string, committedThreshold: number | null): void {
    this.workId = workId;
    this.hoveredTrack = null;
    this.pathTrack = null;
    this.committed = committedThreshold;
    this.displayed = committedThreshold ?? 50;
  }
}
