import type { SweepRow } from "./types.js";

/** Error counts at an arbitrary threshold, read off a cached sweep curve.
 *
 * The curve is a step function sampled once per achievable classification,
 * with rows sorted by threshold; the counts at `threshold` are those of
 * the last row at or below it. Anything below the first row classifies
 * everything positive, exactly like the first row itself.
 */
export function readoutAt(rows: SweepRow[], threshold: number): SweepRow {
  if (rows.length === 0) throw new RangeError("empty sweep curve");
  let lo = 0;
  let hi = rows.length - 1;
  if (threshold < rows[0]!.threshold) return rows[0]!;
  while (lo < hi) {
    const mid = (lo + hi + 1) >> 1;
    if (rows[mid]!.threshold <= threshold) lo = mid;
    else hi = mid - 1;
  }
  return rows[lo]!;
}

/** The sweep row minimizing total errors, ties toward the highest
 * threshold (same rule the engine uses for its optimum). */
export function bestRow(rows: SweepRow[]): SweepRow {
  if (rows.length === 0) throw new RangeError("empty sweep curve");
  let best = rows[0]!;
  for (const row of rows) {
    if (row.errors <= best.errors) best = row;
  }
  return best;
}
