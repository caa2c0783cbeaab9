"""Domain types and file ingestion shared by the whole pipeline.

A *work* is an abstract composition; its manifest lists the candidate
tracks (one of which is the designated reference) and, when ground truth
is known, a positive/negative label per candidate.  Raw pairwise scores
and derived distances are stored as dense symmetric matrices whose row
and column order is the manifest candidate order everywhere.

All types are immutable values after construction; matrix buffers are
marked read-only so they can be shared across workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

POSITIVE = "positive"
NEGATIVE = "negative"

#: Conventional raw score of a track against itself.  Never defined by the
#: similarity scorers, so the diagonal holds an infinity sentinel in memory
#: and the literal token below in dense CSV files.
SELF_SCORE = math.inf
SELF_SCORE_TOKEN = "self"

#: Maximum tolerated |s_ij - s_ji| before an input matrix is rejected.
#: Below this, the two entries are averaged.
SYMMETRY_TOL = 1e-9

TRIPLET_HEADER = ["id_a", "id_b", "score"]


class ManifestError(ValueError):
    """Manifest file is missing, malformed or violates an invariant."""


class ScoreMatrixError(ValueError):
    """Score matrix file is malformed or inconsistent with its manifest."""


class DistanceMatrixError(ValueError):
    """Distance matrix violates symmetry, range or diagonal invariants."""


@dataclass(frozen=True)
class TrackRef:
    """One candidate recording of a work."""

    id: str
    title: str = ""
    artist: str = ""
    uri: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("track id must be a non-empty string")


@dataclass(frozen=True)
class WorkManifest:
    """A work's candidate pool, reference track and optional labels.

    ``candidates`` order is canonical: every matrix produced for this work
    indexes rows and columns in this order.
    """

    work_id: str
    reference: TrackRef
    candidates: tuple[TrackRef, ...]
    labels: Mapping[str, str] | None = None
    #: Latent style coordinates, present on synthetic works for audit.
    latent_x: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if not self.work_id:
            raise ManifestError("work_id must be a non-empty string")
        object.__setattr__(self, "candidates", tuple(self.candidates))
        ids = [c.id for c in self.candidates]
        seen: set[str] = set()
        for track_id in ids:
            if track_id in seen:
                raise ManifestError(f"duplicate candidate id: {track_id!r}")
            seen.add(track_id)
        if len(ids) < 2:
            raise ManifestError(f"candidates: need at least 2 tracks, got {len(ids)}")
        matches = [c for c in self.candidates if c.id == self.reference.id]
        if not matches:
            raise ManifestError(
                f"reference not in candidates: {self.reference.id!r}"
            )
        if matches[0] != self.reference:
            raise ManifestError(
                f"reference entry disagrees with candidate {self.reference.id!r}"
            )
        if self.labels is not None:
            object.__setattr__(self, "labels", dict(self.labels))
            for track_id, label in self.labels.items():
                if track_id not in seen:
                    raise ManifestError(f"labels: unknown track id {track_id!r}")
                if label not in (POSITIVE, NEGATIVE):
                    raise ManifestError(
                        f"labels[{track_id!r}]: expected "
                        f"'{POSITIVE}' or '{NEGATIVE}', got {label!r}"
                    )
            if self.labels and self.labels.get(self.reference.id) != POSITIVE:
                raise ManifestError(
                    f"labels: reference {self.reference.id!r} must be labeled positive"
                )
        if self.latent_x is not None:
            object.__setattr__(self, "latent_x", dict(self.latent_x))
            for track_id in self.latent_x:
                if track_id not in seen:
                    raise ManifestError(f"latent_x: unknown track id {track_id!r}")

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def track_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.candidates)

    @property
    def reference_index(self) -> int:
        return self.track_ids.index(self.reference.id)

    def index_of(self, track_id: str) -> int:
        try:
            return self.track_ids.index(track_id)
        except ValueError:
            raise KeyError(track_id) from None


@dataclass(frozen=True)
class LabelSummary:
    n_pos: int
    n_neg: int
    coverage: float


def validate_labels(manifest: WorkManifest) -> LabelSummary:
    """Count stored labels; coverage is the labeled fraction of candidates."""
    labels = manifest.labels or {}
    n_pos = sum(1 for v in labels.values() if v == POSITIVE)
    n_neg = len(labels) - n_pos
    return LabelSummary(n_pos=n_pos, n_neg=n_neg, coverage=len(labels) / manifest.n)


def _validated_square(values: np.ndarray, track_ids: tuple[str, ...], err: type[ValueError]) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    n = len(track_ids)
    if values.shape != (n, n):
        raise err(f"matrix shape {values.shape} does not match {n} track ids")
    if not np.array_equal(values, values.T):
        raise err("matrix is not exactly symmetric")
    return values


@dataclass(frozen=True)
class ScoreMatrix:
    """Symmetric raw pairwise similarity scores, manifest index order.

    Off-diagonal entries are finite non-negative alignment scores; the
    diagonal holds ``self_score`` (infinity by convention, see
    :data:`SELF_SCORE`).
    """

    track_ids: tuple[str, ...]
    values: np.ndarray
    self_score: float = SELF_SCORE

    def __post_init__(self) -> None:
        object.__setattr__(self, "track_ids", tuple(self.track_ids))
        values = _validated_square(self.values, self.track_ids, ScoreMatrixError)
        off = ~np.eye(len(self.track_ids), dtype=bool)
        if not np.all(np.isfinite(values[off])):
            raise ScoreMatrixError("off-diagonal scores must be finite")
        if np.any(values[off] < 0):
            raise ScoreMatrixError("scores must be >= 0")
        if not np.all(values[~off] == self.self_score):
            raise ScoreMatrixError("diagonal entries must equal self_score")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.track_ids)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric distances in [0, 1] with an exactly-zero diagonal."""

    track_ids: tuple[str, ...]
    values: np.ndarray
    collapsed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "track_ids", tuple(self.track_ids))
        values = _validated_square(self.values, self.track_ids, DistanceMatrixError)
        if np.any(np.diagonal(values) != 0.0):
            raise DistanceMatrixError("diagonal entries must be exactly 0")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise DistanceMatrixError("distances must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.track_ids)


# ---------------------------------------------------------------------------
# Manifest files
# ---------------------------------------------------------------------------

def load_manifest(path: str | Path) -> WorkManifest:
    """Load and validate a manifest JSON file.

    Format: ``{work_id, reference_id, candidates: [{id, title, artist,
    uri?, label?, latent_x?}]}``.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ManifestError(f"manifest {path}: expected a JSON object")
    for key in ("work_id", "reference_id", "candidates"):
        if key not in raw:
            raise ManifestError(f"manifest {path}: missing field {key!r}")
    candidates: list[TrackRef] = []
    labels: dict[str, str] = {}
    latent: dict[str, float] = {}
    for i, entry in enumerate(raw["candidates"]):
        if not isinstance(entry, dict) or "id" not in entry:
            raise ManifestError(f"candidates[{i}]: expected an object with an 'id'")
        candidates.append(
            TrackRef(
                id=str(entry["id"]),
                title=str(entry.get("title", "")),
                artist=str(entry.get("artist", "")),
                uri=entry.get("uri"),
            )
        )
        if "label" in entry:
            labels[str(entry["id"])] = entry["label"]
        if "latent_x" in entry:
            latent[str(entry["id"])] = float(entry["latent_x"])
    reference = next(
        (c for c in candidates if c.id == raw["reference_id"]), None
    )
    if reference is None:
        raise ManifestError(
            f"reference not in candidates: {raw['reference_id']!r}"
        )
    return WorkManifest(
        work_id=str(raw["work_id"]),
        reference=reference,
        candidates=tuple(candidates),
        labels=labels or None,
        latent_x=latent or None,
    )


def save_manifest(manifest: WorkManifest, path: str | Path) -> None:
    entries = []
    for c in manifest.candidates:
        entry: dict = {"id": c.id, "title": c.title, "artist": c.artist}
        if c.uri is not None:
            entry["uri"] = c.uri
        if manifest.labels and c.id in manifest.labels:
            entry["label"] = manifest.labels[c.id]
        if manifest.latent_x and c.id in manifest.latent_x:
            entry["latent_x"] = manifest.latent_x[c.id]
        entries.append(entry)
    payload = {
        "work_id": manifest.work_id,
        "reference_id": manifest.reference.id,
        "candidates": entries,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Score matrix files
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    """Return (comment_lines, data_rows); '#'-prefixed lines are comments."""
    comments: list[str] = []
    rows: list[list[str]] = []
    with path.open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
                continue
            if not line.strip():
                continue
            rows.extend(csv.reader([line]))
    return comments, rows


def load_score_matrix(path: str | Path, manifest: WorkManifest) -> ScoreMatrix:
    """Load raw scores in triplet or dense CSV form, resolved against a manifest.

    Triplet form has header ``id_a,id_b,score`` and one row per unordered
    pair.  Dense form has ids in the first row and column, with the literal
    ``self`` on the diagonal.  Asymmetric inputs are rejected unless the
    largest |s_ij - s_ji| is at most :data:`SYMMETRY_TOL`, in which case the
    entries are averaged.
    """
    path = Path(path)
    if not path.exists():
        raise ScoreMatrixError(f"score file not found: {path}")
    _, rows = _read_csv_rows(path)
    if not rows:
        raise ScoreMatrixError(f"score file {path} is empty")
    header = rows[0]
    if [h.strip() for h in header] == TRIPLET_HEADER:
        values = _scores_from_triplets(rows[1:], manifest, path)
    else:
        values = _scores_from_dense(rows, manifest, path)
    np.fill_diagonal(values, SELF_SCORE)
    return ScoreMatrix(track_ids=manifest.track_ids, values=values)


def _scores_from_triplets(
    rows: Iterable[list[str]], manifest: WorkManifest, path: Path
) -> np.ndarray:
    n = manifest.n
    index = {tid: i for i, tid in enumerate(manifest.track_ids)}
    values = np.full((n, n), np.nan)
    for row in rows:
        if len(row) != 3:
            raise ScoreMatrixError(f"{path}: malformed row {row!r}")
        id_a, id_b, score_text = row
        for tid in (id_a, id_b):
            if tid not in index:
                raise ScoreMatrixError(f"{path}: unknown track id {tid!r}")
        if id_a == id_b:
            raise ScoreMatrixError(f"{path}: self-pair listed for {id_a!r}")
        try:
            score = float(score_text)
        except ValueError:
            raise ScoreMatrixError(
                f"{path}: bad score {score_text!r} for pair ({id_a}, {id_b})"
            ) from None
        if not math.isfinite(score):
            raise ScoreMatrixError(f"{path}: non-finite score for ({id_a}, {id_b})")
        if score < 0:
            raise ScoreMatrixError(f"{path}: negative score for ({id_a}, {id_b})")
        i, j = index[id_a], index[id_b]
        prior = values[i, j]
        if not math.isnan(prior):
            if abs(prior - score) > SYMMETRY_TOL:
                raise ScoreMatrixError(
                    f"{path}: asymmetric pair ({id_a}, {id_b}): "
                    f"{prior!r} vs {score!r}"
                )
            score = 0.5 * (prior + score)
        values[i, j] = score
        values[j, i] = score
    missing = [
        (manifest.track_ids[i], manifest.track_ids[j])
        for i in range(n)
        for j in range(i + 1, n)
        if math.isnan(values[i, j])
    ]
    if missing:
        listed = ", ".join(f"({a}, {b})" for a, b in missing[:5])
        more = "" if len(missing) <= 5 else f" and {len(missing) - 5} more"
        raise ScoreMatrixError(f"{path}: missing pairs: {listed}{more}")
    return values


def _scores_from_dense(
    rows: list[list[str]], manifest: WorkManifest, path: Path
) -> np.ndarray:
    header = rows[0]
    file_ids = [h.strip() for h in header[1:]]
    for tid in file_ids:
        if tid not in manifest.track_ids:
            raise ScoreMatrixError(f"{path}: unknown track id {tid!r}")
    if set(file_ids) != set(manifest.track_ids) or len(rows) - 1 != len(file_ids):
        missing = sorted(set(manifest.track_ids) - set(file_ids))
        raise ScoreMatrixError(
            f"{path}: dense matrix does not cover all candidates"
            + (f" (missing {missing[:5]})" if missing else "")
        )
    order = [file_ids.index(tid) for tid in manifest.track_ids]
    n = manifest.n
    raw = np.full((n, n), np.nan)
    for r, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise ScoreMatrixError(f"{path}: row {row[0]!r} has {len(row) - 1} cells, expected {n}")
        row_id = row[0].strip()
        if row_id != file_ids[r]:
            raise ScoreMatrixError(
                f"{path}: row order {row_id!r} disagrees with header {file_ids[r]!r}"
            )
        for c, cell in enumerate(row[1:]):
            if r == c:
                if cell.strip() != SELF_SCORE_TOKEN:
                    raise ScoreMatrixError(
                        f"{path}: diagonal cell for {row_id!r} must be "
                        f"{SELF_SCORE_TOKEN!r}, got {cell!r}"
                    )
                raw[r, c] = math.inf
                continue
            try:
                raw[r, c] = float(cell)
            except ValueError:
                raise ScoreMatrixError(
                    f"{path}: bad score {cell!r} at ({file_ids[r]}, {file_ids[c]})"
                ) from None
    off = ~np.eye(n, dtype=bool)
    gaps = np.abs(raw[off] - raw.T[off])
    # A nan gap means an off-diagonal inf; the finiteness check below
    # produces the clearer error for that case.
    asym = float(np.max(gaps[~np.isnan(gaps)])) if np.any(~np.isnan(gaps)) else 0.0
    if asym > SYMMETRY_TOL:
        raise ScoreMatrixError(f"{path}: asymmetry {asym:g} exceeds {SYMMETRY_TOL:g}")
    sym = 0.5 * (raw + raw.T)
    if np.any(sym[off] < 0):
        raise ScoreMatrixError(f"{path}: negative score present")
    if not np.all(np.isfinite(sym[off])):
        raise ScoreMatrixError(f"{path}: non-finite score present")
    # Reindex from file order to manifest order.
    perm = np.asarray(order)
    return sym[np.ix_(perm, perm)]


def save_score_matrix(
    matrix: ScoreMatrix,
    path: str | Path,
    dense: bool = False,
    comments: Iterable[str] = (),
) -> None:
    """Write scores as CSV; triplet form is the canonical output."""
    path = Path(path)
    lines = [f"# {c}" if not c.startswith("#") else c for c in comments]
    if dense:
        lines.append(",".join(["id", *matrix.track_ids]))
        for i, tid in enumerate(matrix.track_ids):
            cells = [
                SELF_SCORE_TOKEN if i == j else repr(float(matrix.values[i, j]))
                for j in range(matrix.n)
            ]
            lines.append(",".join([tid, *cells]))
    else:
        lines.append(",".join(TRIPLET_HEADER))
        for i in range(matrix.n):
            for j in range(i + 1, matrix.n):
                lines.append(
                    f"{matrix.track_ids[i]},{matrix.track_ids[j]},"
                    f"{float(matrix.values[i, j])!r}"
                )
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Distance matrix files (dense CSV, metadata in the comment line)
# ---------------------------------------------------------------------------

def save_distance_matrix(
    matrix: DistanceMatrix, path: str | Path, comments: Iterable[str] = ()
) -> None:
    path = Path(path)
    lines = [f"# collapsed={str(matrix.collapsed).lower()}"]
    lines += [f"# {c}" if not c.startswith("#") else c for c in comments]
    lines.append(",".join(["id", *matrix.track_ids]))
    for i, tid in enumerate(matrix.track_ids):
        cells = [repr(float(v)) for v in matrix.values[i]]
        lines.append(",".join([tid, *cells]))
    path.write_text("\n".join(lines) + "\n")


def load_distance_matrix(path: str | Path, manifest: WorkManifest) -> DistanceMatrix:
    path = Path(path)
    if not path.exists():
        raise DistanceMatrixError(f"distance file not found: {path}")
    comments, rows = _read_csv_rows(path)
    collapsed = any("collapsed=true" in c for c in comments)
    if not rows:
        raise DistanceMatrixError(f"distance file {path} is empty")
    file_ids = [h.strip() for h in rows[0][1:]]
    if tuple(file_ids) != manifest.track_ids:
        raise DistanceMatrixError(f"{path}: track ids disagree with manifest order")
    n = manifest.n
    values = np.zeros((n, n))
    for r, row in enumerate(rows[1:]):
        values[r] = [float(c) for c in row[1:]]
    return DistanceMatrix(track_ids=manifest.track_ids, values=values, collapsed=collapsed)
