// Payload shapes of the engine's HTTP API, as consumed by this client.

export interface WorkSummary {
  work_id: string;
  n_candidates: number;
  reference_id: string;
  labeled: boolean;
  has_final_scores: boolean;
  params_hash: string | null;
}

export interface Candidate {
  id: string;
  title: string;
  artist: string;
  uri: string | null;
  label: string | null;
}

export interface WorkDetail {
  work_id: string;
  reference_id: string;
  n_candidates: number;
  candidates: Candidate[];
  params_hash: string | null;
}

export interface ScoreRow {
  track_id: string;
  title: string;
  artist: string;
  label: string | null;
  direct_score: number;
  ensemble_score: number;
  cophenetic: number;
}

export interface ScoresResponse {
  work_id: string;
  reference_id: string;
  rows: ScoreRow[];
  params_hash: string | null;
}

/** One merge: [child_a, child_b, height, size]. Leaves are 0..n-1,
 * internal nodes n+t for merge index t, children sorted a < b. */
export type MergeRow = [number, number, number, number];

export interface TreeLeaf {
  track_id: string;
  index: number;
}

export interface TreeInternal {
  height: number;
  size: number;
  children: [TreeNode, TreeNode];
}

export type TreeNode = TreeLeaf | TreeInternal;

export interface DendrogramPayload {
  work_id: string;
  linkage: string;
  n_leaves: number;
  track_ids: string[];
  reference_id: string;
  params_hash: string;
  merges: MergeRow[];
  root: TreeNode;
}

export interface ClusterRow {
  track_id: string;
  cluster_index: number;
  cluster_track_id: string;
}

export interface ClustersResponse {
  work_id: string;
  threshold: number;
  clusters: ClusterRow[];
}

export interface SweepRow {
  threshold: number;
  false_negatives: number;
  false_positives: number;
  errors: number;
}

export interface SweepResponse {
  work_id: string;
  direct: SweepRow[];
  ensemble: SweepRow[];
  optimal: { direct: number; ensemble: number };
}

export interface PathNode {
  depth: number;
  track_id: string;
  direct_score: number;
  ensemble_score: number;
}

export interface PathResponse {
  work_id: string;
  track_id: string;
  nodes: PathNode[];
}

export interface Annotation {
  work_id: string;
  revision: number;
  threshold: number;
  annotator: string;
  timestamp: string;
  params_hash: string | null;
  positives: string[];
}
