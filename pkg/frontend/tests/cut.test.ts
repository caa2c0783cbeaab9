import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { countClusters, cutClusters } from "../src/cut.js";
import type { DendrogramPayload, MergeRow } from "../src/types.js";

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf8")) as T;
}

const payload = fixture<DendrogramPayload>("dendrogram.json");
const clusters = fixture<{ thresholds: number[]; assignments: number[][] }>("clusters.json");

describe("cutClusters against engine assignments", () => {
  it("matches the engine cut at every fixture threshold", () => {
    expect(clusters.thresholds.length).toBe(50);
    clusters.thresholds.forEach((threshold, i) => {
      const ours = cutClusters(payload.merges, payload.n_leaves, threshold);
      expect(ours).toEqual(clusters.assignments[i]);
    });
  });

  it("leaves singletons at threshold 0", () => {
    const ours = cutClusters(payload.merges, payload.n_leaves, 0);
    expect(ours).toEqual([...Array(payload.n_leaves).keys()]);
  });

  it("collapses to one cluster above the root height", () => {
    const ours = cutClusters(payload.merges, payload.n_leaves, 1e9);
    expect(new Set(ours)).toEqual(new Set([0]));
  });

  it("keeps a merge exactly at the threshold unapplied", () => {
    // Strict below: cutting at a merge's own height must not join it.
    const [a, b, height] = payload.merges[0]!;
    const at = cutClusters(payload.merges, payload.n_leaves, height);
    const above = cutClusters(payload.merges, payload.n_leaves, height + 1e-9);
    expect(at[a]).not.toBe(at[b]);
    expect(above[a]).toBe(above[b]);
  });

  it("labels each cluster by its lowest member", () => {
    for (const threshold of clusters.thresholds) {
      const ours = cutClusters(payload.merges, payload.n_leaves, threshold);
      ours.forEach((cluster, leaf) => {
        expect(cluster).toBeLessThanOrEqual(leaf);
        expect(ours[cluster]).toBe(cluster);
      });
    }
  });
});

describe("cutClusters on tiny trees", () => {
  const merges: MergeRow[] = [
    [0, 1, 0.2, 2],
    [2, 3, 0.5, 3],
  ];

  it("applies merges in order through internal ids", () => {
    expect(cutClusters(merges, 3, 0.3)).toEqual([0, 0, 2]);
    expect(cutClusters(merges, 3, 0.6)).toEqual([0, 0, 0]);
  });

  it("handles a single leaf with no merges", () => {
    expect(cutClusters([], 1, 0.5)).toEqual([0]);
  });

  it("rejects non-finite and negative thresholds", () => {
    expect(() => cutClusters(merges, 3, Number.NaN)).toThrow(RangeError);
    expect(() => cutClusters(merges, 3, Number.POSITIVE_INFINITY)).toThrow(RangeError);
    expect(() => cutClusters(merges, 3, -0.1)).toThrow(RangeError);
  });

  it("rejects merges pointing at clusters that never existed", () => {
    const bad: MergeRow[] = [[0, 9, 0.2, 2]];
    expect(() => cutClusters(bad, 2, 1.0)).toThrow(/unknown cluster/);
  });

  it("counts distinct clusters", () => {
    expect(countClusters([0, 0, 2, 2, 4])).toBe(3);
  });
});
