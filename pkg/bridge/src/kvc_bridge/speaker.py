"""Speaker embeddings: one fixed-size vector per utterance.

Embeddings reuse the feature-file contract with a single frame whose
``hop_ms`` spans the whole utterance and metadata marking the one-vector
scope, so the converter-side tooling can score them without any model
dependency. The default embedder is a long-term-average-spectrum
statistic; a neural speaker model can be dropped in as a callable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import dsp
from .audio import read_wav
from .batch import BatchResult
from .config import BridgeConfig
from .errors import BridgeError, EmptyInputError
from .featfile import write_feature_file

#: (samples,) float audio -> (dim,) embedding
Embedder = Callable[[np.ndarray], np.ndarray]


def ltas_embedder(samples: np.ndarray) -> np.ndarray:
    """Mean and spread of log mel-band energies over the utterance."""
    logmel = dsp.log_mel_frames(samples)
    if logmel.shape[0] == 0:
        raise EmptyInputError("utterance shorter than one analysis window")
    return np.concatenate([logmel.mean(axis=0), logmel.std(axis=0)])


def embed_speaker(
    wav_paths: Iterable[str | Path],
    out_dir: str | Path,
    config: BridgeConfig | None = None,
    embedder: Embedder | None = None,
    model_name: str = "ltas-v1",
) -> BatchResult:
    """Write one single-frame embedding file per input wav."""
    config = config or BridgeConfig()
    embedder = embedder or ltas_embedder
    out_dir = Path(out_dir)
    result = BatchResult()

    for wav_path in wav_paths:
        wav_path = Path(wav_path)
        try:
            samples, rate = read_wav(wav_path, expected_rate=config.sample_rate_hz)
            vector = np.asarray(embedder(samples), dtype=np.float32).reshape(1, -1)
            duration_ms = max(1, round(1000.0 * samples.size / rate))
            out_path = write_feature_file(
                out_dir / (wav_path.stem + ".spkemb.kvcf"),
                vector,
                hop_ms=duration_ms,
                sample_rate_hz=config.sample_rate_hz,
                metadata={
                    "utterance_id": wav_path.stem,
                    "embedding": "speaker",
                    "scope": "one vector per utterance",
                    "model": model_name,
                },
            )
            result.outputs.append(out_path)
        except (BridgeError, OSError) as exc:
            result.record_error(wav_path, exc)
    return result
