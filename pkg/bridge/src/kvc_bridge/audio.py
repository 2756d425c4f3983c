"""16 kHz mono PCM16 wav I/O via the standard library."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import AudioError


def read_wav(path: str | Path, expected_rate: int | None = None) -> tuple[np.ndarray, int]:
    """Read a mono PCM16 wav file to float samples in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: cannot read wav: {exc}") from exc

    if channels != 1:
        raise AudioError(f"{path}: expected mono audio, got {channels} channels")
    if width != 2:
        raise AudioError(f"{path}: expected 16-bit PCM, got {width * 8}-bit")
    if expected_rate is not None and rate != expected_rate:
        raise AudioError(
            f"{path}: expected {expected_rate} Hz audio, got {rate} Hz"
        )
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, rate: int = 16000) -> Path:
    """Write float samples in [-1, 1] as mono PCM16."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return path
