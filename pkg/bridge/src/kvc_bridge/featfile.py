"""Reader/writer for the shared feature-file contract.

This is the bridge's own implementation of the byte layout (magic
"KVCFEAT1", little-endian header, float32 frame-major payload, UTF-8 JSON
metadata). It deliberately does not import the converter package: the
bytes on disk are the contract, and the test suite cross-checks files
written here against the converter's CLI.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FeatureFormatError

MAGIC = b"KVCFEAT1"
_HEADER = struct.Struct("<IQIII")  # dim, n_frames, hop_ms, sample_rate_hz, metadata_len


def write_feature_file(
    path: str | Path,
    frames: np.ndarray,
    hop_ms: int = 20,
    sample_rate_hz: int = 16000,
    metadata: dict[str, Any] | None = None,
) -> Path:
    """Write one feature file atomically; returns the final path."""
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise FeatureFormatError(f"frames must be 2-D, got ndim={frames.ndim}")
    if frames.size and not np.isfinite(frames).all():
        raise FeatureFormatError("refusing to write non-finite feature values")

    metadata_bytes = json.dumps(
        metadata or {}, ensure_ascii=False, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    header = _HEADER.pack(
        frames.shape[1], frames.shape[0], hop_ms, sample_rate_hz, len(metadata_bytes)
    )

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as sink:
            sink.write(MAGIC)
            sink.write(header)
            sink.write(metadata_bytes)
            sink.write(frames.tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    return path


def read_feature_file(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    """Read one feature file; returns ``(frames, header_dict)``.

    The header dict carries dim, n_frames, hop_ms, sample_rate_hz, and the
    parsed metadata object.
    """
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + _HEADER.size:
        raise FeatureFormatError(f"{path}: shorter than the fixed header")
    if data[: len(MAGIC)] != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {data[:8]!r}")
    dim, n_frames, hop_ms, sample_rate_hz, metadata_len = _HEADER.unpack_from(
        data, len(MAGIC)
    )
    offset = len(MAGIC) + _HEADER.size
    if len(data) < offset + metadata_len:
        raise FeatureFormatError(f"{path}: metadata truncated")
    try:
        metadata = (
            json.loads(data[offset : offset + metadata_len].decode("utf-8"))
            if metadata_len
            else {}
        )
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FeatureFormatError(f"{path}: metadata is not UTF-8 JSON: {exc}") from exc
    offset += metadata_len

    payload_len = n_frames * dim * 4
    if len(data) < offset + payload_len:
        raise FeatureFormatError(f"{path}: payload truncated")
    frames = (
        np.frombuffer(data, dtype="<f4", count=n_frames * dim, offset=offset)
        .reshape(n_frames, dim)
        .copy()
    )
    if frames.size and not np.isfinite(frames).all():
        raise FeatureFormatError(f"{path}: payload contains NaN or Inf")

    header = {
        "dim": dim,
        "n_frames": n_frames,
        "hop_ms": hop_ms,
        "sample_rate_hz": sample_rate_hz,
        "metadata": metadata,
    }
    return frames, header
