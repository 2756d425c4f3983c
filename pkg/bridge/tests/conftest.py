"""Shared synthetic-voice helpers for bridge tests."""

import numpy as np
import pytest

SR = 16000


def synth_voice(f0_hz, formant_hz, duration_s, seed):
    """Harmonic 'voice' with a formant-like spectral bump and a slow
    content envelope; seed varies phases and envelope (the 'content')."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(duration_s * SR)) / SR
    n_harmonics = int((SR / 2 - 500) // f0_hz)
    signal = np.zeros_like(t)
    for h in range(1, n_harmonics + 1):
        freq = h * f0_hz
        amp = (np.exp(-0.5 * ((freq - formant_hz) / 600.0) ** 2) + 0.05) / h**0.5
        signal += amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    envelope = 0.6 + 0.4 * np.sin(
        2 * np.pi * rng.uniform(1.5, 4.0) * t + rng.uniform(0, 2 * np.pi)
    )
    signal *= envelope
    return signal / (np.abs(signal).max() * 1.1)


@pytest.fixture
def low_voice():
    return lambda duration_s, seed: synth_voice(110.0, 500.0, duration_s, seed)


@pytest.fixture
def bright_voice():
    return lambda duration_s, seed: synth_voice(235.0, 2500.0, duration_s, seed)
