"""Demographic-bias auditing for 1:1 verification systems."""

__version__ = "0.1.0"

from .exceptions import VerigaugeError
from .ingest import EmbeddingSet, ImageRecord, ScoreTable, load_embeddings, load_metadata, load_scores, validate_dataset
from .metrics import (
    auc,
    auc_gap,
    bias_stats,
    far_at_threshold,
    fixed_threshold_disparity,
    frr_at_threshold,
    roc_auc,
    roc_curve,
    threshold_for_far,
    threshold_function,
    threshold_shift,
    vr_at_far,
)
from .pairing import PairSet, YokingPolicy, build_pair_set, stratify_pairs
from .partition import TierSpec, assign_difficulty_tiers, tier_summary
from .scoring import ScoredPairSet, attach_scores, score_pairs, similarity
from .synthetic import ScenarioSpec, analytic_auc, generate_embeddings, generate_scores

__all__ = [
    "__version__",
    "VerigaugeError",
    "EmbeddingSet",
    "ImageRecord",
    "ScoreTable",
    "load_embeddings",
    "load_metadata",
    "load_scores",
    "validate_dataset",
    "auc",
    "auc_gap",
    "bias_stats",
    "far_at_threshold",
    "fixed_threshold_disparity",
    "frr_at_threshold",
    "roc_auc",
    "roc_curve",
    "threshold_for_far",
    "threshold_function",
    "threshold_shift",
    "vr_at_far",
    "PairSet",
    "YokingPolicy",
    "build_pair_set",
    "stratify_pairs",
    "TierSpec",
    "assign_difficulty_tiers",
    "tier_summary",
    "ScoredPairSet",
    "attach_scores",
    "score_pairs",
    "similarity",
    "ScenarioSpec",
    "analytic_auc",
    "generate_embeddings",
    "generate_scores",
]
