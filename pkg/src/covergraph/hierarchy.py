"""Agglomerative clustering over a distance matrix and the scores it yields.

Cluster count is never known up front, so candidates are organized into a
full merge tree instead of a flat partition.  The tree supplies three
views used downstream:

* cophenetic distances (the height at which two leaves first share a
  cluster), which are an ultrametric;
* final per-track scores, ``100 * (1 - cophenetic distance to the
  reference)``, so exact matches score 100;
* flat cuts at a threshold height, for cluster inspection and the
  annotation workflow.

Merging is implemented here rather than delegated so that tie-breaking is
pinned: among equally close cluster pairs, the pair whose smallest leaf
indices are lexicographically lowest merges first.  Results are therefore
bit-reproducible across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np

from covergraph.model import DistanceMatrix, ScoreMatrix

SINGLE = "single"
COMPLETE = "complete"
AVERAGE = "average"
LINKAGES = (SINGLE, COMPLETE, AVERAGE)

#: Cap applied to the direct display column; raw alignment scores above
#: this are clipped so both columns share the 0-100 scale.
DISPLAY_CAP = 100.0


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree of an agglomerative clustering.

    ``merges[t] = (cluster_a, cluster_b, height, size)`` creates cluster
    ``n_leaves + t`` from two earlier clusters (leaves are clusters
    ``0..n_leaves-1``, ``cluster_a < cluster_b``).  Heights never decrease
    along the list for the supported linkages.
    """

    track_ids: tuple[str, ...]
    linkage: str
    merges: tuple[tuple[int, int, float, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "track_ids", tuple(self.track_ids))
        object.__setattr__(
            self, "merges", tuple((int(a), int(b), float(h), int(s)) for a, b, h, s in self.merges)
        )
        n = self.n_leaves
        if self.linkage not in LINKAGES:
            raise ValueError(f"unknown linkage {self.linkage!r}")
        if len(self.merges) != n - 1:
            raise ValueError(f"expected {n - 1} merges, got {len(self.merges)}")
        used: set[int] = set()
        prev_h = 0.0
        for t, (a, b, h, size) in enumerate(self.merges):
            limit = n + t
            if not (0 <= a < b < limit):
                raise ValueError(f"merge {t}: bad child ids ({a}, {b})")
            if a in used or b in used:
                raise ValueError(f"merge {t}: cluster merged twice")
            used.update((a, b))
            if h < prev_h:
                raise ValueError(f"merge {t}: height inversion ({h} < {prev_h})")
            prev_h = h
        if self.merges and self.merges[-1][3] != n:
            raise ValueError("final merge must contain all leaves")

    @property
    def n_leaves(self) -> int:
        return len(self.track_ids)

    @property
    def root(self) -> int:
        return self.n_leaves + len(self.merges) - 1

    @cached_property
    def _parents(self) -> np.ndarray:
        n = self.n_leaves
        parents = np.full(n + len(self.merges), -1, dtype=np.int64)
        for t, (a, b, _h, _s) in enumerate(self.merges):
            parents[a] = n + t
            parents[b] = n + t
        return parents

    @cached_property
    def heights(self) -> np.ndarray:
        """Height of each internal cluster, indexed by t (cluster n+t)."""
        return np.asarray([m[2] for m in self.merges])

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        """Display order: depth-first, lower-id child first."""
        if self.n_leaves == 0:
            return ()
        order: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node < self.n_leaves:
                order.append(node)
            else:
                a, b, _h, _s = self.merges[node - self.n_leaves]
                stack.append(b)
                stack.append(a)
        return tuple(order)

    def _members(self) -> Iterator[tuple[int, list[int], list[int], float]]:
        """Yield (merge index, members of a, members of b, height) in order."""
        groups: dict[int, list[int]] = {i: [i] for i in range(self.n_leaves)}
        for t, (a, b, h, _s) in enumerate(self.merges):
            la = groups.pop(a)
            lb = groups.pop(b)
            yield t, la, lb, h
            if len(la) >= len(lb):
                la.extend(lb)
                groups[self.n_leaves + t] = la
            else:
                lb.extend(la)
                groups[self.n_leaves + t] = lb


def build_dendrogram(d: DistanceMatrix, linkage: str = AVERAGE) -> Dendrogram:
    """Merge the two closest clusters until one remains.

    Cluster distances follow the linkage rule (``single`` min, ``complete``
    max, ``average`` size-weighted mean).  Equal-distance pairs merge in
    lexicographic order of their smallest member leaf indices.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    n = d.n
    if n < 2:
        raise ValueError("need at least 2 leaves")
    # Working matrix indexed by slot; a merged cluster lives in the lower
    # slot of the pair, so the smallest leaf of the cluster in slot s is
    # exactly s and row-major argmin realizes the documented tie-break.
    work = d.values.astype(np.float64, copy=True)
    np.fill_diagonal(work, np.inf)
    size = np.ones(n, dtype=np.int64)
    cluster_id = np.arange(n, dtype=np.int64)
    merges: list[tuple[int, int, float, int]] = []
    for t in range(n - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        if i > j:  # unreachable for a symmetric matrix; keep i < j anyway
            i, j = j, i
        height = float(work[i, j])
        if linkage == SINGLE:
            merged = np.minimum(work[i], work[j])
        elif linkage == COMPLETE:
            merged = np.maximum(work[i], work[j])
        else:
            merged = (size[i] * work[i] + size[j] * work[j]) / (size[i] + size[j])
        work[i, :] = merged
        work[:, i] = merged
        work[i, i] = np.inf
        work[j, :] = np.inf
        work[:, j] = np.inf
        a, b = sorted((int(cluster_id[i]), int(cluster_id[j])))
        size[i] += size[j]
        merges.append((a, b, height, int(size[i])))
        cluster_id[i] = n + t
    return Dendrogram(track_ids=d.track_ids, linkage=linkage, merges=tuple(merges))


def cophenetic_distance(dend: Dendrogram, i: int, j: int) -> float:
    """Height of the lowest merge containing both leaves; 0 when i == j."""
    n = dend.n_leaves
    for idx in (i, j):
        if not 0 <= idx < n:
            raise IndexError(f"leaf index {idx} out of range for {n} leaves")
    if i == j:
        return 0.0
    parents = dend._parents
    ancestors: set[int] = set()
    node = i
    while node != -1:
        ancestors.add(node)
        node = parents[node]
    node = j
    while node not in ancestors:
        node = parents[node]
    return float(dend.heights[node - n])


def cophenetic_to_all(dend: Dendrogram, leaf: int) -> np.ndarray:
    """Cophenetic distances from one leaf to every leaf (0 at ``leaf``)."""
    n = dend.n_leaves
    if not 0 <= leaf < n:
        raise IndexError(f"leaf index {leaf} out of range for {n} leaves")
    out = np.zeros(n)
    holder = leaf  # cluster id currently containing the query leaf
    for t, la, lb, h in dend._members():
        a, b, _h, _s = dend.merges[t]
        if holder == a:
            out[lb] = h
            holder = n + t
        elif holder == b:
            out[la] = h
            holder = n + t
    return out


def cophenetic_matrix(dend: Dendrogram) -> np.ndarray:
    """Full cophenetic matrix; quadratic, intended for analysis and tests."""
    n = dend.n_leaves
    out = np.zeros((n, n))
    for _t, la, lb, h in dend._members():
        out[np.ix_(la, lb)] = h
        out[np.ix_(lb, la)] = h
    return out


def cut_clusters(dend: Dendrogram, threshold: float) -> np.ndarray:
    """Flat partition: merges with height < threshold are kept.

    Returns an array mapping leaf index -> cluster id, where the id of a
    cluster is its lowest member leaf index.  Threshold 0 yields all
    singletons; anything above the root height yields one cluster.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    n = dend.n_leaves
    parent = np.arange(n + len(dend.merges), dtype=np.int64)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    lowest = np.arange(n + len(dend.merges), dtype=np.int64)
    for t, (a, b, h, _s) in enumerate(dend.merges):
        if h >= threshold:
            break
        ra, rb = find(a), find(b)
        nid = n + t
        parent[ra] = nid
        parent[rb] = nid
        lowest[nid] = min(lowest[ra], lowest[rb])
    return np.asarray([lowest[find(i)] for i in range(n)], dtype=np.int64)


@dataclass(frozen=True)
class FinalScoreTable:
    """Per-track display scores against the reference, both on 0-100."""

    track_ids: tuple[str, ...]
    reference_index: int
    direct_score: np.ndarray
    ensemble_score: np.ndarray
    cophenetic_to_reference: np.ndarray

    def __post_init__(self) -> None:
        for name in ("direct_score", "ensemble_score", "cophenetic_to_reference"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def final_scores(
    dend: Dendrogram, reference: int, direct: ScoreMatrix
) -> FinalScoreTable:
    """Ensemble score ``100 * (1 - cophenetic)`` next to the direct column.

    The direct column is the raw score against the reference capped at
    100; the reference itself is pinned to 100 in both columns.
    """
    if tuple(direct.track_ids) != tuple(dend.track_ids):
        raise ValueError("score matrix and dendrogram track ids disagree")
    coph = cophenetic_to_all(dend, reference)
    ensemble = np.clip(100.0 * (1.0 - coph), 0.0, 100.0)
    direct_col = np.minimum(direct.values[reference].astype(np.float64), DISPLAY_CAP)
    ensemble[reference] = 100.0
    direct_col[reference] = 100.0
    return FinalScoreTable(
        track_ids=dend.track_ids,
        reference_index=reference,
        direct_score=direct_col,
        ensemble_score=ensemble,
        cophenetic_to_reference=coph,
    )


# ---------------------------------------------------------------------------
# UI payload
# ---------------------------------------------------------------------------

def payload_json(
    dend: Dendrogram,
    work_id: str | None = None,
    reference_id: str | None = None,
    params_hash: str | None = None,
) -> str:
    """Serialize the tree for the annotator UI.

    The ``root`` field nests one node per cluster ({height, size,
    children}; leaves carry track ids), and ``merges`` repeats the flat
    list for consumers that prefer iteration.  Emitted with an explicit
    stack: deep chain-shaped trees overflow recursive encoders.
    """
    n = dend.n_leaves
    parts: list[str] = []
    stack: list[object] = [dend.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        node = int(item)
        if node < n:
            parts.append(
                '{"track_id":%s,"index":%d}' % (json.dumps(dend.track_ids[node]), node)
            )
        else:
            a, b, h, s = dend.merges[node - n]
            parts.append('{"height":%s,"size":%d,"children":[' % (json.dumps(h), s))
            stack.append("]}")
            stack.append(b)
            stack.append(",")
            stack.append(a)
    root_json = "".join(parts)
    fields = [
        '"linkage":%s' % json.dumps(dend.linkage),
        '"n_leaves":%d' % n,
        '"track_ids":%s' % json.dumps(list(dend.track_ids)),
    ]
    if work_id is not None:
        fields.insert(0, '"work_id":%s' % json.dumps(work_id))
    if reference_id is not None:
        fields.append('"reference_id":%s' % json.dumps(reference_id))
    if params_hash is not None:
        fields.append('"params_hash":%s' % json.dumps(params_hash))
    fields.append('"merges":%s' % json.dumps([list(m) for m in dend.merges]))
    fields.append('"root":%s' % root_json)
    return "{" + ",".join(fields) + "}"
