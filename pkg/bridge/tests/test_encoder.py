"""Feature extraction behavior of the dependency-free backend."""

import numpy as np

from kvc_bridge import (
    BridgeConfig,
    SpectralEncoder,
    extract_features,
    read_feature_file,
    write_wav,
)

SR = 16000


def test_one_second_gives_about_50_frames(tmp_path, low_voice):
    wav = write_wav(tmp_path / "u.wav", low_voice(1.0, seed=0))
    result = extract_features([wav], tmp_path / "feat", BridgeConfig())
    assert not result.errors
    frames, header = read_feature_file(result.outputs[0])
    assert abs(header["n_frames"] - 50) <= 1
    assert header["dim"] == 1024
    assert header["hop_ms"] == 20
    assert header["sample_rate_hz"] == SR


def test_metadata_records_encoder_and_layer(tmp_path, low_voice):
    wav = write_wav(tmp_path / "u.wav", low_voice(0.5, seed=1))
    result = extract_features([wav], tmp_path / "feat", BridgeConfig())
    _, header = read_feature_file(result.outputs[0])
    assert header["metadata"]["utterance_id"] == "u"
    assert "spectral" in header["metadata"]["encoder"]
    assert "layer" in header["metadata"]


def test_silence_yields_finite_features(tmp_path):
    wav = write_wav(tmp_path / "silence.wav", np.zeros(SR))
    result = extract_features([wav], tmp_path / "feat", BridgeConfig())
    assert not result.errors
    frames, _ = read_feature_file(result.outputs[0])
    assert np.isfinite(frames).all()


def test_deterministic(tmp_path, bright_voice):
    wav = write_wav(tmp_path / "u.wav", bright_voice(1.0, seed=2))
    a = extract_features([wav], tmp_path / "a", BridgeConfig())
    b = extract_features([wav], tmp_path / "b", BridgeConfig())
    assert a.outputs[0].read_bytes() == b.outputs[0].read_bytes()


def test_wrong_sample_rate_is_per_file_error(tmp_path, low_voice):
    good = write_wav(tmp_path / "good.wav", low_voice(0.5, seed=3), rate=SR)
    bad = write_wav(tmp_path / "bad.wav", low_voice(0.5, seed=4), rate=8000)
    result = extract_features([good, bad], tmp_path / "feat", BridgeConfig())
    assert len(result.outputs) == 1
    assert len(result.errors) == 1
    assert "8000" in result.errors[0]["error"]


def test_unreadable_file_is_per_file_error(tmp_path, low_voice):
    good = write_wav(tmp_path / "good.wav", low_voice(0.5, seed=5))
    missing = tmp_path / "missing.wav"
    garbage = tmp_path / "garbage.wav"
    garbage.write_bytes(b"RIFFbroken")
    result = extract_features(
        [good, missing, garbage], tmp_path / "feat", BridgeConfig()
    )
    assert len(result.outputs) == 1
    assert len(result.errors) == 2


def test_projection_is_invertible():
    # full row rank so the vocoder can recover mel bands exactly
    from kvc_bridge.encoder import _projection

    projection = _projection(1024)
    recovered = projection @ np.linalg.pinv(projection)
    np.testing.assert_allclose(recovered, np.eye(projection.shape[0]), atol=1e-10)


def test_encode_matches_logmel_projection(low_voice):
    from kvc_bridge import dsp
    from kvc_bridge.encoder import _projection

    samples = low_voice(0.8, seed=6)
    encoder = SpectralEncoder(dim=256)
    expected = dsp.log_mel_frames(samples) @ _projection(256)
    np.testing.assert_allclose(
        encoder.encode(samples), expected.astype(np.float32), rtol=1e-6
    )
