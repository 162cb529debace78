"""Voice separation for quantized symbolic music.

Casts voice separation as link prediction between consecutive same-voice
notes: a typed note graph feeds a gated graph-convolutional encoder whose
embeddings score candidate links; a degree-matching regularizer and an
optional maximum-weight matching keep the output monophonic.
"""

from .assignment import (
    AssignmentMask,
    VoiceAssignment,
    apply_mask_and_threshold,
    extract_voices,
    linear_assignment,
    resolve_greedy,
)
from .config import ExperimentConfig, load_config
from .features import assemble_features, intrinsic_features, laplacian_pe
from .graph import (
    RelationType,
    ScoreGraph,
    build_candidate_links,
    build_graph,
    build_typed_edges,
    coverage_report,
)
from .losses import alpha_schedule, bce_loss, reg_loss, subsample_negatives, total_loss
from .metrics import MetricsReport, link_metrics
from .model import LinkScores, ModelConfig, VoiceLinkModel, threshold_links
from .score import (
    GroundTruthLinks,
    Measure,
    Note,
    Score,
    derive_ground_truth_links,
    load_score,
    parse_score,
    preprocess_monophonic,
    serialize_score,
)
from .synthesis import SyntheticConfig, generate_synthetic_score
from .training import evaluate, predict_piece, prepare_piece, train

__version__ = "0.1.0"

__all__ = [
    "AssignmentMask",
    "ExperimentConfig",
    "GroundTruthLinks",
    "LinkScores",
    "Measure",
    "MetricsReport",
    "ModelConfig",
    "Note",
    "RelationType",
    "Score",
    "ScoreGraph",
    "SyntheticConfig",
    "VoiceAssignment",
    "VoiceLinkModel",
    "alpha_schedule",
    "apply_mask_and_threshold",
    "assemble_features",
    "bce_loss",
    "build_candidate_links",
    "build_graph",
    "build_typed_edges",
    "coverage_report",
    "derive_ground_truth_links",
    "evaluate",
    "extract_voices",
    "generate_synthetic_score",
    "intrinsic_features",
    "laplacian_pe",
    "linear_assignment",
    "link_metrics",
    "load_config",
    "load_score",
    "parse_score",
    "predict_piece",
    "prepare_piece",
    "preprocess_monophonic",
    "reg_loss",
    "resolve_greedy",
    "serialize_score",
    "subsample_negatives",
    "threshold_links",
    "total_loss",
    "train",
]
