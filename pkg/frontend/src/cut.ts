import type { MergeRow } from "./types.js";

/** Flat clusters at a cut height, matching the engine's semantics:
 * merges with height strictly below the threshold are applied, and each
 * cluster is identified by its lowest member leaf index.
 */
export function cutClusters(
  merges: MergeRow[],
  nLeaves: number,
  threshold: number,
): number[] {
  if (!Number.isFinite(threshold) || threshold < 0) {
    throw new RangeError(`threshold must be finite and >= 0, got ${threshold}`);
  }
  const parent = new Array<number>(nLeaves);
  const size = new Array<number>(nLeaves).fill(1);
  const lowest = new Array<number>(nLeaves);
  for (let i = 0; i < nLeaves; i++) {
    parent[i] = i;
    lowest[i] = i;
  }

  function find(x: number): number {
    let r = x;
    while (parent[r] !== r) r = parent[r]!;
    while (parent[x] !== r) {
      const next = parent[x]!;
      parent[x] = r;
      x = next;
    }
    return r;
  }

  function union(a: number, b: number): number {
    let ra = find(a);
    let rb = find(b);
    if (ra === rb) return ra;
    if (size[ra]! < size[rb]!) [ra, rb] = [rb, ra];
    parent[rb] = ra;
    size[ra]! += size[rb]!;
    lowest[ra] = Math.min(lowest[ra]!, lowest[rb]!);
    return ra;
  }

  // anyLeaf[id] = some leaf inside the cluster the merge id denotes, so
  // later merges can address earlier ones without materializing members.
  const anyLeaf = new Array<number>(nLeaves + merges.length);
  for (let i = 0; i < nLeaves; i++) anyLeaf[i] = i;
  merges.forEach((m, t) => {
    const [a, b, height] = m;
    const la = anyLeaf[a];
    const lb = anyLeaf[b];
    if (la === undefined || lb === undefined) {
      throw new RangeError(`merge ${t} references unknown cluster id`);
    }
    if (height < threshold) union(la, lb);
    anyLeaf[nLeaves + t] = la;
  });

  const assignment = new Array<number>(nLeaves);
  for (let i = 0; i < nLeaves; i++) assignment[i] = lowest[find(i)]!;
  return assignment;
}

/** Number of distinct clusters in an assignment. */
export function countClusters(assignment: number[]): number {
  return new Set(assignment).size;
}
