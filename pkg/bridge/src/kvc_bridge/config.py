"""Bridge configuration."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BridgeConfigError

ENCODER_BACKENDS = ("spectral", "wavlm")
VOCODER_BACKENDS = ("overlap-add", "torchscript")


@dataclass(frozen=True)
class BridgeConfig:
    """Model selection for the adapter layer.

    The default encoder layer is 6 and every emitted feature file declares
    dim=1024 at a 20 ms hop over 16 kHz audio, matching what the converter
    side expects. ``spectral`` / ``overlap-add`` are the deterministic
    DSP backends that need no pretrained weights; ``wavlm`` /
    ``torchscript`` wrap real models when their weights are available.
    """

    encoder_backend: str = "spectral"
    encoder_model_id: str = "microsoft/wavlm-large"
    encoder_layer: int = 6
    vocoder_backend: str = "overlap-add"
    vocoder_checkpoint: str | None = None
    sample_rate_hz: int = 16000
    feature_dim: int = 1024
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.encoder_backend not in ENCODER_BACKENDS:
            raise BridgeConfigError(
                f"unknown encoder backend {self.encoder_backend!r}; "
                f"choose from {ENCODER_BACKENDS}"
            )
        if self.vocoder_backend not in VOCODER_BACKENDS:
            raise BridgeConfigError(
                f"unknown vocoder backend {self.vocoder_backend!r}; "
                f"choose from {VOCODER_BACKENDS}"
            )
        if self.encoder_layer < 0:
            raise BridgeConfigError("encoder_layer must be >= 0")
        if self.sample_rate_hz != 16000:
            raise BridgeConfigError("only 16 kHz audio is supported")
        if self.feature_dim < 1:
            raise BridgeConfigError("feature_dim must be >= 1")
