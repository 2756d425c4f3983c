"""Adapters between the feature-file contract and pretrained speech models.

The bridge only moves data across the model boundary: audio -> feature
files (encoder), feature files -> audio (vocoder), audio -> transcripts
(ASR), audio -> speaker-embedding files. All matching, regression, and
metric math lives on the converter side of the file contract.
"""

__version__ = "0.1.0"

from .audio import read_wav, write_wav
from .batch import BatchResult
from .config import BridgeConfig
from .encoder import SpectralEncoder, extract_features, make_encoder
from .errors import (
    AudioError,
    BridgeConfigError,
    BridgeError,
    DependencyError,
    EmptyInputError,
    FeatureFormatError,
)
from .featfile import read_feature_file, write_feature_file
from .speaker import embed_speaker, ltas_embedder
from .asr import transcribe, whisper_recognizer, write_transcript_tsv
from .vocoder import OverlapAddVocoder, make_vocoder, vocode, vocode_batch

__all__ = [
    "AudioError",
    "BatchResult",
    "BridgeConfig",
    "BridgeConfigError",
    "BridgeError",
    "DependencyError",
    "EmptyInputError",
    "FeatureFormatError",
    "OverlapAddVocoder",
    "SpectralEncoder",
    "embed_speaker",
    "extract_features",
    "ltas_embedder",
    "make_encoder",
    "make_vocoder",
    "read_feature_file",
    "read_wav",
    "transcribe",
    "vocode",
    "vocode_batch",
    "whisper_recognizer",
    "write_feature_file",
    "write_transcript_tsv",
    "write_wav",
    "__version__",
]
