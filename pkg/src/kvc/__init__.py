"""k-nearest-neighbor voice conversion core.

Converts speech by replacing each source feature frame with the mean of
its nearest neighbors in a target speaker's feature pool. This package
holds everything around the pretrained models: the feature-file format,
the kNN converter, prematched dataset construction for vocoder training,
objective evaluation (EER, W/CER), and a synthetic testbed.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInputError,
    EmptySetError,
    FormatError,
    InsufficientDataError,
    KvcError,
    TruncationError,
    ValidationError,
)
from .features import (
    FeatureFileHeader,
    FeatureSequence,
    MatchingSet,
    build_matching_set,
    load_features,
    read_features,
    save_features,
    subsample_matching_set,
    write_features,
)
from .knn import (
    KnnConfig,
    NeighborResult,
    convert_sequence,
    cosine_distance,
    knn_regress_frame,
    top_k_neighbors,
)
from .prematch import JobReport, PrematchJob, prematch_utterance, run_prematch_job
from .evalkit import (
    EerResult,
    TranscriptPair,
    TrialSet,
    compute_cer,
    compute_eer,
    compute_wer,
    cosine_similarity_scores,
)
from .synthbench import (
    LabeledSequence,
    SynthConfig,
    generate_corpus,
    measure_label_preservation,
    preservation_curve,
)

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "EmptySetError",
    "FormatError",
    "InsufficientDataError",
    "KvcError",
    "TruncationError",
    "ValidationError",
    "FeatureFileHeader",
    "FeatureSequence",
    "MatchingSet",
    "build_matching_set",
    "load_features",
    "read_features",
    "save_features",
    "subsample_matching_set",
    "write_features",
    "KnnConfig",
    "NeighborResult",
    "convert_sequence",
    "cosine_distance",
    "knn_regress_frame",
    "top_k_neighbors",
    "JobReport",
    "PrematchJob",
    "prematch_utterance",
    "run_prematch_job",
    "EerResult",
    "TranscriptPair",
    "TrialSet",
    "compute_cer",
    "compute_eer",
    "compute_wer",
    "cosine_similarity_scores",
    "LabeledSequence",
    "SynthConfig",
    "generate_corpus",
    "measure_label_preservation",
    "preservation_curve",
    "__version__",
]
