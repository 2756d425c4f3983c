"""Feature extraction: audio in, feature files out.

Two backends:

- ``spectral``: deterministic log-mel energies linearly projected to the
  contract dimensionality. Needs nothing beyond numpy; used for tests,
  plumbing validation, and environments without model weights.
- ``wavlm``: hidden states of a pretrained self-supervised encoder
  (layer 6 by default, one 1024-dim vector per 20 ms of 16 kHz audio).
  Requires torch + transformers and locally available weights.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from . import dsp
from .audio import read_wav
from .batch import BatchResult
from .config import BridgeConfig
from .errors import BridgeError, DependencyError, EmptyInputError
from .featfile import write_feature_file

_PROJECTION_SEED = 0x5EED


class Encoder(Protocol):
    name: str
    layer: int | None

    def encode(self, samples: np.ndarray) -> np.ndarray:
        """(n_samples,) float audio -> (n_frames, dim) float32 features."""
        ...


@lru_cache(maxsize=4)
def _projection(dim: int) -> np.ndarray:
    rng = np.random.default_rng(_PROJECTION_SEED)
    return rng.standard_normal((dsp.N_MELS, dim)) / np.sqrt(dsp.N_MELS)


class SpectralEncoder:
    """Log-mel energies projected to ``dim`` with a fixed random matrix.

    The projection has full row rank, so the vocoder side can recover the
    40 mel bands exactly with a pseudoinverse.
    """

    def __init__(self, dim: int = 1024):
        self.name = f"spectral-logmel-v1-d{dim}"
        self.layer = None
        self.dim = dim

    def encode(self, samples: np.ndarray) -> np.ndarray:
        logmel = dsp.log_mel_frames(samples)
        return (logmel @ _projection(self.dim)).astype(np.float32)


class WavlmEncoder:
    """Hidden states of a pretrained self-supervised encoder layer."""

    def __init__(self, model_id: str, layer: int, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel
        except ImportError as exc:
            raise DependencyError(
                "the wavlm backend needs torch and transformers installed"
            ) from exc
        try:
            self._model = AutoModel.from_pretrained(model_id).to(device).eval()
        except Exception as exc:
            raise DependencyError(
                f"cannot load encoder weights for {model_id!r}; they must be "
                f"available locally: {exc}"
            ) from exc
        self._torch = torch
        self.name = model_id
        self.layer = layer
        self.device = device

    def encode(self, samples: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            wave = torch.as_tensor(samples, dtype=torch.float32, device=self.device)
            out = self._model(wave[None], output_hidden_states=True)
        hidden = out.hidden_states[self.layer][0]
        return hidden.cpu().numpy().astype(np.float32)


def make_encoder(config: BridgeConfig) -> Encoder:
    if config.encoder_backend == "spectral":
        return SpectralEncoder(dim=config.feature_dim)
    return WavlmEncoder(
        config.encoder_model_id, config.encoder_layer, config.device
    )


def extract_features(
    wav_paths: Iterable[str | Path],
    out_dir: str | Path,
    config: BridgeConfig | None = None,
    encoder: Encoder | None = None,
) -> BatchResult:
    """Extract one feature file per input wav.

    Unreadable or wrong-rate audio becomes a per-file error and the batch
    continues. Output files mirror the input stems with a ``.kvcf``
    suffix and record the encoder name and layer in metadata.
    """
    config = config or BridgeConfig()
    encoder = encoder or make_encoder(config)
    out_dir = Path(out_dir)
    result = BatchResult()

    for wav_path in wav_paths:
        wav_path = Path(wav_path)
        try:
            samples, _ = read_wav(wav_path, expected_rate=config.sample_rate_hz)
            if samples.size == 0:
                raise EmptyInputError(f"{wav_path}: no samples")
            frames = encoder.encode(samples)
            out_path = write_feature_file(
                out_dir / (wav_path.stem + ".kvcf"),
                frames,
                hop_ms=20,
                sample_rate_hz=config.sample_rate_hz,
                metadata={
                    "utterance_id": wav_path.stem,
                    "encoder": encoder.name,
                    "layer": encoder.layer,
                    "source_wav": wav_path.name,
                },
            )
            result.outputs.append(out_path)
        except (BridgeError, OSError) as exc:
            result.record_error(wav_path, exc)
    return result
