import { cutClusters } from "./cut.js";
import type { DendrogramPayload, TreeInternal, TreeLeaf, TreeNode } from "./types.js";

export interface RenderOptions {
  /** Total SVG width in px. */
  width?: number;
  /** Total SVG height in px. */
  height?: number;
  /** Subtrees narrower than this many px collapse to a counted triangle.
   * 0 disables virtualization. */
  minSubtreePx?: number;
  /** Leaf labels are drawn only when leaves are at least this far apart. */
  labelMinPx?: number;
}

const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
];
const ABOVE_CUT = "#999999";
const MIXED_FILL = "#cccccc";

function isLeaf(node: TreeNode): node is TreeLeaf {
  return (node as TreeLeaf).track_id !== undefined;
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fail(reason: string): never {
  throw new Error(`malformed dendrogram payload: ${reason}`);
}

/** Structural checks on a payload of unknown provenance. Throws with a
 * human-readable reason; the caller routes that to the error panel. */
export function validatePayload(payload: unknown): DendrogramPayload {
  if (payload === null || typeof payload !== "object") fail("not an object");
  const p = payload as Partial<DendrogramPayload>;
  const n = p.n_leaves;
  if (typeof n !== "number" || !Number.isInteger(n) || n < 1) fail("bad n_leaves");
  if (!Array.isArray(p.track_ids) || p.track_ids.length !== n) fail("bad track_ids");
  if (!Array.isArray(p.merges) || p.merges.length !== n - 1) {
    fail(`expected ${n - 1} merges`);
  }
  for (const row of p.merges) {
    if (!Array.isArray(row) || row.length !== 4 || row.some((v) => typeof v !== "number")) {
      fail("bad merge row");
    }
  }
  if (p.root === null || p.root === undefined) fail("missing root");

  // Iterative walk: trees for large works are too deep to recurse.
  const seen = new Set<number>();
  const stack: TreeNode[] = [p.root as TreeNode];
  while (stack.length > 0) {
    const node = stack.pop()!;
    if (node === null || typeof node !== "object") fail("node is not an object");
    if (isLeaf(node)) {
      if (typeof node.track_id !== "string") fail("leaf without track_id");
      if (!Number.isInteger(node.index) || node.index < 0 || node.index >= n) {
        fail(`leaf index ${node.index} out of range`);
      }
      if (seen.has(node.index)) fail(`duplicate leaf index ${node.index}`);
      if (p.track_ids[node.index] !== node.track_id) {
        fail(`leaf ${node.index} disagrees with track_ids`);
      }
      seen.add(node.index);
    } else {
      const inner = node as TreeInternal;
      if (typeof inner.height !== "number" || !Number.isFinite(inner.height) || inner.height < 0) {
        fail("bad internal height");
      }
      if (!Array.isArray(inner.children) || inner.children.length !== 2) {
        fail("internal node must have exactly 2 children");
      }
      stack.push(inner.children[0], inner.children[1]);
    }
  }
  if (seen.size !== n) fail(`root covers ${seen.size} of ${n} leaves`);
  return p as DendrogramPayload;
}

interface NodeGeom {
  x: number; // leaf-order units
  y: number; // height units, 0 for leaves
  leafCount: number;
  firstLeaf: number; // leftmost position in traversal order
}

/** Post-order layout over the tree, explicit stack. Leaves take
 * consecutive x slots in traversal order; parents sit at the midpoint
 * of their children, at their own merge height. */
function computeGeometry(root: TreeNode): Map<TreeNode, NodeGeom> {
  const geom = new Map<TreeNode, NodeGeom>();
  let nextLeaf = 0;
  const stack: Array<{ node: TreeNode; childIdx: number }> = [{ node: root, childIdx: 0 }];
  while (stack.length > 0) {
    const top = stack[stack.length - 1]!;
    if (isLeaf(top.node)) {
      geom.set(top.node, { x: nextLeaf, y: 0, leafCount: 1, firstLeaf: nextLeaf });
      nextLeaf += 1;
      stack.pop();
    } else if (top.childIdx < 2) {
      const child = (top.node as TreeInternal).children[top.childIdx]!;
      top.childIdx += 1;
      stack.push({ node: child, childIdx: 0 });
    } else {
      const inner = top.node as TreeInternal;
      const a = geom.get(inner.children[0])!;
      const b = geom.get(inner.children[1])!;
      geom.set(inner, {
        x: (a.x + b.x) / 2,
        y: inner.height,
        leafCount: a.leafCount + b.leafCount,
        firstLeaf: Math.min(a.firstLeaf, b.firstLeaf),
      });
      stack.pop();
    }
  }
  return geom;
}

/** Render a dendrogram to an SVG string.
 *
 * `cutHeight` is in tree-height units, the same scale the cluster
 * endpoint takes: 0 leaves every track its own color, anything above
 * the root height paints one color. Callers holding a score-scale
 * slider convert first (height = 1 - score/100).
 *
 * Every visible leaf carries data-track / data-cluster attributes so
 * the page can wire click handlers and tests can read the coloring
 * back out.
 */
export function renderDendrogram(
  payload: unknown,
  cutHeight: number,
  options: RenderOptions = {},
): string {
  if (!Number.isFinite(cutHeight) || cutHeight < 0) {
    throw new RangeError("cut height must be finite and >= 0");
  }
  const p = validatePayload(payload);
  const width = options.width ?? 900;
  const height = options.height ?? 480;
  const minSubtreePx = options.minSubtreePx ?? 8;
  const labelMinPx = options.labelMinPx ?? 9;

  const n = p.n_leaves;
  const assignment = cutClusters(p.merges, n, cutHeight);

  const margin = { top: 12, right: 12, bottom: 64, left: 44 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const leafSpacing = plotW / n;
  const geom = computeGeometry(p.root);
  const rootGeom = geom.get(p.root)!;
  const yMax = Math.max(rootGeom.y, 1e-9);
  const xPx = (u: number): number => margin.left + (u + 0.5) * leafSpacing;
  const yPx = (h: number): number => margin.top + (1 - h / yMax) * plotH;
  const baseline = yPx(0);
  const fmt = (v: number): string => (Math.round(v * 100) / 100).toString();

  // Colors keyed by cluster id (lowest member leaf), in left-to-right
  // order of first appearance so adjacent clusters contrast.
  const colorOf = new Map<number, string>();
  const leafOrder: TreeLeaf[] = [];
  {
    const walk: TreeNode[] = [p.root];
    while (walk.length > 0) {
      const node = walk.pop()!;
      if (isLeaf(node)) leafOrder.push(node);
      else {
        const inner = node as TreeInternal;
        walk.push(inner.children[1], inner.children[0]);
      }
    }
    for (const leaf of leafOrder) {
      const cluster = assignment[leaf.index]!;
      if (!colorOf.has(cluster)) {
        colorOf.set(cluster, PALETTE[colorOf.size % PALETTE.length]!);
      }
    }
  }

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `class="dendrogram" data-n-leaves="${n}" role="img">`,
  );

  // Height axis on the left.
  for (let i = 0; i <= 4; i++) {
    const h = (yMax * i) / 4;
    const y = fmt(yPx(h));
    parts.push(
      `<line class="axis-tick" x1="${fmt(margin.left - 4)}" x2="${fmt(margin.left)}" ` +
        `y1="${y}" y2="${y}" stroke="#666"/>`,
      `<text class="axis-label" x="${fmt(margin.left - 7)}" y="${y}" ` +
        `text-anchor="end" dominant-baseline="middle" font-size="10">${fmt(h)}</text>`,
    );
  }
  parts.push(
    `<line class="axis" x1="${fmt(margin.left)}" x2="${fmt(margin.left)}" ` +
      `y1="${fmt(margin.top)}" y2="${fmt(baseline)}" stroke="#666"/>`,
  );

  // Top-down walk; collapsed subtrees stop the descent.
  const showLabels = leafSpacing >= labelMinPx;
  const visit: TreeNode[] = [p.root];
  while (visit.length > 0) {
    const node = visit.pop()!;
    const g = geom.get(node)!;
    const widthPx = g.leafCount * leafSpacing;
    if (!isLeaf(node) && minSubtreePx > 0 && widthPx < minSubtreePx && g.leafCount > 1) {
      // One cluster iff the whole subtree merged below the cut.
      const uniform = g.y < cutHeight;
      const cluster = uniform ? assignment[leafOrder[g.firstLeaf]!.index]! : null;
      const fill = cluster !== null ? colorOf.get(cluster)! : MIXED_FILL;
      const apexX = fmt(xPx(g.x));
      const apexY = fmt(yPx(g.y));
      const leftX = fmt(xPx(g.firstLeaf));
      const rightX = fmt(xPx(g.firstLeaf + g.leafCount - 1));
      const clusterAttr = cluster !== null ? ` data-cluster="${cluster}"` : "";
      parts.push(
        `<polygon class="triangle" data-count="${g.leafCount}"${clusterAttr} ` +
          `points="${apexX},${apexY} ${leftX},${fmt(baseline)} ${rightX},${fmt(baseline)}" ` +
          `fill="${fill}" fill-opacity="0.55" stroke="#777" stroke-width="0.75">` +
          `<title>${g.leafCount} tracks</title></polygon>`,
      );
      if (widthPx >= 18) {
        parts.push(
          `<text class="triangle-count" x="${apexX}" y="${fmt(baseline + 12)}" ` +
            `text-anchor="middle" font-size="9">${g.leafCount}</text>`,
        );
      }
      continue;
    }
    if (isLeaf(node)) {
      const cluster = assignment[node.index]!;
      const color = colorOf.get(cluster)!;
      const isRef = node.track_id === p.reference_id;
      const cx = fmt(xPx(g.x));
      const title = escapeXml(node.track_id) + (isRef ? " (reference)" : "");
      parts.push(
        `<circle class="leaf${isRef ? " reference" : ""}" data-track="${escapeXml(node.track_id)}" ` +
          `data-cluster="${cluster}" cx="${cx}" cy="${fmt(baseline)}" r="${isRef ? 5 : 3}" ` +
          `fill="${color}"${isRef ? ' stroke="#000" stroke-width="1.5"' : ""}>` +
          `<title>${title}</title></circle>`,
      );
      if (showLabels) {
        parts.push(
          `<text class="leaf-label${isRef ? " reference" : ""}" data-track="${escapeXml(node.track_id)}" ` +
            `x="${cx}" y="${fmt(baseline + 8)}" font-size="9" text-anchor="end" ` +
            `transform="rotate(-60 ${cx} ${fmt(baseline + 8)})"` +
            `${isRef ? ' font-weight="bold"' : ""}>${escapeXml(node.track_id)}</text>`,
        );
      }
      continue;
    }
    const inner = node as TreeInternal;
    const a = geom.get(inner.children[0])!;
    const b = geom.get(inner.children[1])!;
    const color = g.y < cutHeight ? colorOf.get(assignment[leafOrder[g.firstLeaf]!.index]!)! : ABOVE_CUT;
    const my = fmt(yPx(g.y));
    parts.push(
      `<path class="merge" fill="none" stroke="${color}" stroke-width="1.25" ` +
        `d="M ${fmt(xPx(a.x))} ${fmt(yPx(a.y))} V ${my} H ${fmt(xPx(b.x))} V ${fmt(yPx(b.y))}"/>`,
    );
    visit.push(inner.children[1], inner.children[0]);
  }

  if (cutHeight <= yMax) {
    const y = fmt(yPx(cutHeight));
    parts.push(
      `<line class="cut-line" x1="${fmt(margin.left)}" x2="${fmt(width - margin.right)}" ` +
        `y1="${y}" y2="${y}" stroke="#d62728" stroke-width="1.25" stroke-dasharray="5 3"/>`,
    );
  }

  parts.push("</svg>");
  return parts.join("");
}
