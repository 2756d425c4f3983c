"""Shared signal-processing pieces for the deterministic DSP backends.

The spectral encoder, overlap-add vocoder, and LTAS speaker embedder all
work on the same 20 ms-hop log-mel representation so that features,
resynthesized audio, and embeddings stay mutually consistent.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

SAMPLE_RATE = 16000
HOP = 320          # samples, 20 ms at 16 kHz
WIN = 400          # samples, 25 ms analysis window
N_FFT = 512
N_MELS = 40
LOG_FLOOR = 1e-8


def frame_count(n_samples: int) -> int:
    if n_samples < WIN:
        return 0
    return 1 + (n_samples - WIN) // HOP


def frame_signal(samples: np.ndarray) -> np.ndarray:
    """Slice a 1-D signal into (n_frames, WIN) windows at the 20 ms hop."""
    samples = np.asarray(samples, dtype=np.float64)
    n = frame_count(samples.shape[0])
    if n == 0:
        return np.empty((0, WIN))
    idx = np.arange(WIN)[None, :] + HOP * np.arange(n)[:, None]
    return samples[idx]


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=1)
def mel_filterbank() -> np.ndarray:
    """(N_MELS, N_FFT//2 + 1) triangular filters spanning 0..8 kHz."""
    n_bins = N_FFT // 2 + 1
    bin_hz = np.arange(n_bins) * SAMPLE_RATE / N_FFT
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(SAMPLE_RATE / 2), N_MELS + 2))
    bank = np.zeros((N_MELS, n_bins))
    for m in range(N_MELS):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_hz - lo) / max(center - lo, 1e-9)
        falling = (hi - bin_hz) / max(hi - center, 1e-9)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def log_mel_frames(samples: np.ndarray) -> np.ndarray:
    """(n_frames, N_MELS) log mel-band energies at the 20 ms hop."""
    frames = frame_signal(samples)
    if frames.shape[0] == 0:
        return np.empty((0, N_MELS))
    window = np.hanning(WIN)
    spectrum = np.fft.rfft(frames * window, n=N_FFT, axis=1)
    power = np.abs(spectrum) ** 2
    energies = power @ mel_filterbank().T
    return np.log(energies + LOG_FLOOR)
