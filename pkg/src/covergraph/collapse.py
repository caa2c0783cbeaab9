"""Collapse a distance graph through corroborated two-hop shortcuts.

Classic all-pairs shortest paths would rewrite ``d(i, j)`` whenever any
single intermediate offers a shorter route, which makes the result
hypersensitive to one spurious low distance.  The collapse used here is
deliberately looser: a pair is only shortened to the *second*-smallest
two-hop sum over intermediates, plus a fixed penalty ``eta`` per accepted
shortcut, so two independent corroborating routes are required before an
edge contracts.  Sweeps repeat until no entry decreases by more than
``update_tolerance``.

Two sweep disciplines are provided.  ``in_place`` applies each accepted
update immediately (row-major pair order, i < j), which is the reference
semantics and is bit-deterministic.  ``synchronous`` computes every
candidate from an immutable snapshot of the previous sweep and applies
them in one step; its fixed points satisfy the same certificate and the
per-sweep work is embarrassingly parallel.

Every accepted update records the intermediate that supplied the
second-smallest sum, so the chain of shortcuts that connected any two
tracks can be replayed afterwards (:func:`trace_path`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numba import njit

from covergraph.model import DistanceMatrix, DistanceMatrixError

IN_PLACE = "in_place"
SYNCHRONOUS = "synchronous"


class ProvenanceError(RuntimeError):
    """Bridge records contradict themselves (cycle during path expansion)."""


@dataclass(frozen=True)
class CollapseParams:
    """Knobs of the collapsing sweep.

    eta: penalty added to every accepted shortcut, in distance units.
    update_tolerance: smallest decrease that counts as an update; smaller
        improvements are discarded, which is what lets the sweep terminate
        in floating point.
    max_sweeps: hard stop; hitting it is reported, not raised.
    mode: ``in_place`` (reference, sequential) or ``synchronous``.
    """

    eta: float = 0.01
    update_tolerance: float = 1e-9
    max_sweeps: int = 100
    mode: str = IN_PLACE

    def __post_init__(self) -> None:
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError("eta must be >= 0")
        if not (np.isfinite(self.update_tolerance) and self.update_tolerance > 0):
            raise ValueError("update_tolerance must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.mode not in (IN_PLACE, SYNCHRONOUS):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class CollapseResult:
    """Collapsed distances plus the provenance needed to replay shortcuts.

    ``bridges`` maps each updated unordered pair ``(i, j)`` (i < j) to the
    intermediate recorded at the last accepted update of that pair.
    """

    distances: DistanceMatrix
    sweeps_run: int
    converged: bool
    bridges: Mapping[tuple[int, int], int]

    def bridge_of(self, i: int, j: int) -> int | None:
        return self.bridges.get((i, j) if i < j else (j, i))


@dataclass(frozen=True)
class PathTrace:
    """Track indices from source to target; position in the chain is the
    depth column of rescue reports (source at depth 0)."""

    nodes: tuple[int, ...]

    @property
    def depths(self) -> tuple[int, ...]:
        return tuple(range(len(self.nodes)))

    @property
    def n_hops(self) -> int:
        return len(self.nodes) - 1


@njit(cache=True)
def _second_smallest_sum(d, i, j):
    """(second-smallest d[i,k]+d[k,j] over k not in {i, j}, its k).

    Ties resolve to the earliest k, i.e. lexicographic (value, index)
    order; fewer than two admissible intermediates yields k = -1.
    """
    n = d.shape[0]
    v1 = np.inf
    v2 = np.inf
    k1 = -1
    k2 = -1
    for k in range(n):
        if k == i or k == j:
            continue
        s = d[i, k] + d[k, j]
        if s < v1:
            v2 = v1
            k2 = k1
            v1 = s
            k1 = k
        elif s < v2:
            v2 = s
            k2 = k
    return v2, k2


@njit(cache=True)
def _sweep_in_place(d, bridge, eta, tol):
    """One Gauss-Seidel-style sweep; updates land immediately.

    Returns the number of accepted updates.
    """
    n = d.shape[0]
    updates = 0
    for i in range(n):
        for j in range(i + 1, n):
            v2, k2 = _second_smallest_sum(d, i, j)
            if k2 < 0:
                continue
            cand = v2 + eta
            if d[i, j] - cand > tol:
                d[i, j] = cand
                d[j, i] = cand
                bridge[i, j] = k2
                bridge[j, i] = k2
                updates += 1
    return updates


@njit(cache=True)
def _sweep_synchronous(src, dst, bridge, eta, tol):
    """One Jacobi-style sweep; candidates read from the src snapshot only."""
    n = src.shape[0]
    updates = 0
    for i in range(n):
        for j in range(i + 1, n):
            v2, k2 = _second_smallest_sum(src, i, j)
            if k2 < 0:
                continue
            cand = v2 + eta
            if src[i, j] - cand > tol:
                dst[i, j] = cand
                dst[j, i] = cand
                bridge[i, j] = k2
                bridge[j, i] = k2
                updates += 1
    return updates


def collapse(d: DistanceMatrix, params: CollapseParams = CollapseParams()) -> CollapseResult:
    """Run collapsing sweeps to a fixed point (or ``max_sweeps``).

    Output distances are elementwise <= the input; reapplying collapse to
    a converged result makes no further update.  Non-convergence within
    ``max_sweeps`` is reported via ``converged=False``, not raised.
    """
    if d.n < 2:
        raise DistanceMatrixError("collapse needs at least 2 tracks")
    values = np.ascontiguousarray(d.values, dtype=np.float64).copy()
    n = d.n
    bridge = np.full((n, n), -1, dtype=np.int64)
    converged = False
    sweeps_run = 0
    while sweeps_run < params.max_sweeps:
        sweeps_run += 1
        if params.mode == IN_PLACE:
            updates = _sweep_in_place(values, bridge, params.eta, params.update_tolerance)
        else:
            nxt = values.copy()
            updates = _sweep_synchronous(values, nxt, bridge, params.eta, params.update_tolerance)
            values = nxt
        if updates == 0:
            converged = True
            break
    bridges = {
        (i, j): int(bridge[i, j])
        for i in range(n)
        for j in range(i + 1, n)
        if bridge[i, j] >= 0
    }
    result = DistanceMatrix(track_ids=d.track_ids, values=values, collapsed=True)
    return CollapseResult(
        distances=result, sweeps_run=sweeps_run, converged=converged, bridges=bridges
    )


def expand_path(
    bridges: Mapping[tuple[int, int], int], n: int, source: int, target: int
) -> PathTrace:
    """Replay recorded bridges into the chain joining source and target.

    A pair with a bridge k expands to path(source, k) ++ [k] ++
    path(k, target); pairs without a bridge are direct edges.  The chain
    visits each track at most once; a repeat means the provenance is
    corrupted and raises :class:`ProvenanceError`.
    """
    for idx in (source, target):
        if not 0 <= idx < n:
            raise IndexError(f"track index {idx} out of range for {n} tracks")
    if source == target:
        raise ValueError("source and target must differ")

    nodes: list[int] = [source]
    seen = {source, target}
    expanded: set[tuple[int, int]] = set()
    # Explicit work stack, left-to-right emission; recursion would hit the
    # interpreter limit on deep chains.
    work: list[tuple[str, int, int]] = [("pair", source, target)]
    while work:
        kind, a, b = work.pop()
        if kind == "emit":
            if a in seen:
                raise ProvenanceError(
                    f"cycle detected while expanding path: track {a} repeats"
                )
            seen.add(a)
            nodes.append(a)
            continue
        key = (a, b) if a < b else (b, a)
        k = bridges.get(key)
        if k is None:
            continue
        if key in expanded:
            # Well-formed provenance never needs one pair twice; this is a
            # mutually recursive record that would loop forever.
            raise ProvenanceError(
                f"cycle detected while expanding path: pair {key} repeats"
            )
        expanded.add(key)
        work.append(("pair", k, b))
        work.append(("emit", k, -1))
        work.append(("pair", a, k))
    nodes.append(target)
    return PathTrace(nodes=tuple(nodes))


def trace_path(result: CollapseResult, source: int, target: int) -> PathTrace:
    """Expand the provenance chain of one collapsed pair; see expand_path."""
    return expand_path(result.bridges, result.distances.n, source, target)
