"""Cover-version identification by ensembling pairwise scores over a graph.

Pipeline: raw pairwise similarity scores -> logistic score-to-distance
transform -> loose transitive collapse of the distance graph ->
agglomerative merge tree -> cophenetic scores against the reference on a
0-100 scale, with ranking/classification evaluation protocols on top.
"""

from covergraph.model import (
    DistanceMatrix,
    LabelSummary,
    ManifestError,
    ScoreMatrix,
    TrackRef,
    WorkManifest,
    load_manifest,
    load_score_matrix,
    save_manifest,
    save_score_matrix,
)
from covergraph.distance import LogisticParams, matrix_to_distances, score_to_distance
from covergraph.collapse import (
    CollapseParams,
    CollapseResult,
    PathTrace,
    collapse,
    trace_path,
)
from covergraph.hierarchy import (
    Dendrogram,
    FinalScoreTable,
    build_dendrogram,
    cophenetic_distance,
    cophenetic_to_all,
    cut_clusters,
    final_scores,
)
from covergraph.alignment import (
    AlignmentParams,
    FeatureSequence,
    score_all_pairs,
    score_pair_alignment,
)
from covergraph.synth import SyntheticSpec, generate_synthetic_work
from covergraph.evaluation import (
    PairedReport,
    RetrievalStats,
    ThresholdReport,
    classify_at,
    compare_direct_vs_ensemble,
    optimal_threshold,
    retrieval_stats,
    universal_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentParams",
    "CollapseParams",
    "CollapseResult",
    "Dendrogram",
    "DistanceMatrix",
    "FeatureSequence",
    "FinalScoreTable",
    "LabelSummary",
    "LogisticParams",
    "ManifestError",
    "PairedReport",
    "PathTrace",
    "RetrievalStats",
    "ScoreMatrix",
    "SyntheticSpec",
    "ThresholdReport",
    "TrackRef",
    "WorkManifest",
    "build_dendrogram",
    "classify_at",
    "collapse",
    "compare_direct_vs_ensemble",
    "cophenetic_distance",
    "cophenetic_to_all",
    "cut_clusters",
    "final_scores",
    "generate_synthetic_work",
    "load_manifest",
    "load_score_matrix",
    "matrix_to_distances",
    "optimal_threshold",
    "retrieval_stats",
    "save_manifest",
    "save_score_matrix",
    "score_all_pairs",
    "score_pair_alignment",
    "score_to_distance",
    "trace_path",
    "universal_threshold",
    "__version__",
]
