"""Explicit-knowledge in-context learning for picture-description screening.

The package turns CHAT transcripts into token embeddings, trains a small
assessor for token contributions and transcript confidence, decomposes
transcripts into parsing-category profiles, retrieves structurally similar
demonstrations, and drives an ensemble of one-demo prompt learners through
a chat-completion gateway, with evaluation, ablation, label-sweep, and
baseline reporting on top.
"""

__version__ = "0.1.0"

from .categories import CATEGORIES, Category, categorize, category_frequencies
from .embeddings import (
    EmbeddedTranscript,
    make_synthetic_corpus,
    read_ingest,
    synth_embed,
    write_ingest,
)
from .errors import DataError, GatewayTimeout, TransportError
from .gateway import Completion, GatewayConfig, complete, complete_batch
from .pipeline import (
    Components,
    MetricsReport,
    ModeFlags,
    PredictionRecord,
    compute_metrics,
    majority_vote,
    predict,
    predict_one,
    prepare,
    run_ablation,
    run_baseline,
    run_label_sweep,
)
from .profiles import ContributionProfile, StandardProfile, feature_score, rank_profile
from .prompts import LabelPair, PromptSpec, build_prompt, label_sweep_pairs, parse_completion
from .retrieval import ND_MAX, parsing_similarity, position_distance, top_k

__all__ = [
    "CATEGORIES",
    "Category",
    "Completion",
    "Components",
    "ContributionProfile",
    "DataError",
    "EmbeddedTranscript",
    "GatewayConfig",
    "GatewayTimeout",
    "LabelPair",
    "MetricsReport",
    "ModeFlags",
    "ND_MAX",
    "PredictionRecord",
    "PromptSpec",
    "StandardProfile",
    "TransportError",
    "__version__",
    "build_prompt",
    "categorize",
    "category_frequencies",
    "complete",
    "complete_batch",
    "compute_metrics",
    "feature_score",
    "label_sweep_pairs",
    "majority_vote",
    "make_synthetic_corpus",
    "parse_completion",
    "parsing_similarity",
    "position_distance",
    "predict",
    "predict_one",
    "prepare",
    "rank_profile",
    "read_ingest",
    "run_ablation",
    "run_baseline",
    "run_label_sweep",
    "synth_embed",
    "top_k",
    "write_ingest",
]
