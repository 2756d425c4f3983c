"""Feature sequences, matching sets, and the on-disk feature-file format.

File layout (little-endian throughout)::

    bytes 0-7    magic ASCII "KVCFEAT1"
    bytes 8-11   u32 dim
    bytes 12-19  u64 n_frames
    bytes 20-23  u32 hop_ms
    bytes 24-27  u32 sample_rate_hz
    bytes 28-31  u32 metadata_len
    next metadata_len bytes   UTF-8 JSON metadata
    remainder    n_frames * dim IEEE-754 binary32 values, frame-major

This format is the sole contract between this package and any external
encoder/vocoder tooling, so reads and writes are bit-exact: for every
valid sequence ``read_features(write_features(seq)) == seq``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateInputError,
    EmptySetError,
    FormatError,
    TruncationError,
    ValidationError,
)

MAGIC = b"KVCFEAT1"

# Header after the magic: u32 dim, u64 n_frames, u32 hop_ms,
# u32 sample_rate_hz, u32 metadata_len.
_HEADER_STRUCT = struct.Struct("<IQIII")

#: Frames with Euclidean norm below this are rejected when pooling.
ZERO_NORM_EPS = 1e-8

#: Unit vectors in a matching set must have norm within this of 1.0.
UNIT_NORM_TOL = 1e-4

#: Defaults matching the supported encoders: one frame per 20 ms of 16 kHz audio.
DEFAULT_HOP_MS = 20
DEFAULT_SAMPLE_RATE_HZ = 16000


@dataclass(frozen=True)
class FeatureFileHeader:
    """Describes one feature file: geometry, timing, and free-form metadata.

    ``metadata`` is an arbitrary JSON-serializable mapping (speaker id,
    utterance id, encoder name, layer index, ...).
    """

    dim: int
    n_frames: int
    hop_ms: int = DEFAULT_HOP_MS
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if self.n_frames < 0:
            raise ValidationError(f"n_frames must be >= 0, got {self.n_frames}")
        if self.hop_ms < 1:
            raise ValidationError(f"hop_ms must be >= 1, got {self.hop_ms}")
        if self.sample_rate_hz < 1:
            raise ValidationError(
                f"sample_rate_hz must be >= 1, got {self.sample_rate_hz}"
            )
        if not isinstance(self.metadata, dict):
            raise ValidationError("metadata must be a JSON-serializable dict")

    @property
    def payload_bytes(self) -> int:
        return self.n_frames * self.dim * 4

    @property
    def duration_s(self) -> float:
        return self.n_frames * self.hop_ms / 1000.0


@dataclass(frozen=True)
class FeatureSequence:
    """Time-ordered frames of D-dimensional float32 features for one utterance.

    Immutable after construction; the frame array is marked read-only so
    instances can be shared freely between threads.
    """

    header: FeatureFileHeader
    frames: np.ndarray

    def __post_init__(self) -> None:
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise ValidationError(
                f"frames must be a 2-D (n_frames, dim) array, got ndim={frames.ndim}"
            )
        if frames.shape != (self.header.n_frames, self.header.dim):
            raise ValidationError(
                f"frames shape {frames.shape} does not match header "
                f"({self.header.n_frames}, {self.header.dim})"
            )
        if frames.size and not np.isfinite(frames).all():
            raise ValidationError("frames contain NaN or Inf values")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_frames(
        cls,
        frames: np.ndarray,
        hop_ms: int = DEFAULT_HOP_MS,
        sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
        metadata: dict[str, Any] | None = None,
    ) -> "FeatureSequence":
        """Build a sequence, deriving the header geometry from ``frames``."""
        frames = np.ascontiguousarray(frames, dtype=np.float32)
        if frames.ndim != 2:
            raise ValidationError(
                f"frames must be a 2-D (n_frames, dim) array, got ndim={frames.ndim}"
            )
        header = FeatureFileHeader(
            dim=frames.shape[1],
            n_frames=frames.shape[0],
            hop_ms=hop_ms,
            sample_rate_hz=sample_rate_hz,
            metadata=dict(metadata) if metadata else {},
        )
        return cls(header=header, frames=frames)

    @property
    def dim(self) -> int:
        return self.header.dim

    @property
    def n_frames(self) -> int:
        return self.header.n_frames

    @property
    def utterance_id(self) -> str | None:
        uid = self.header.metadata.get("utterance_id")
        return str(uid) if uid is not None else None

    def with_metadata(self, **updates: Any) -> "FeatureSequence":
        """Return a copy whose header metadata is updated with ``updates``."""
        metadata = dict(self.header.metadata)
        metadata.update(updates)
        header = FeatureFileHeader(
            dim=self.header.dim,
            n_frames=self.header.n_frames,
            hop_ms=self.header.hop_ms,
            sample_rate_hz=self.header.sample_rate_hz,
            metadata=metadata,
        )
        return FeatureSequence(header=header, frames=self.frames)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        return (
            self.header == other.header
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )


@dataclass(frozen=True)
class MatchingSet:
    """Order-free pool of feature vectors from one target speaker.

    Stores both the raw vectors (averaged by the kNN regression) and their
    unit-normalized twins (so cosine distance is a single dot product).
    ``source`` records ``(utterance_id, frame_index)`` provenance per row.
    """

    vectors: np.ndarray
    unit_vectors: np.ndarray
    source: tuple[tuple[str, int], ...]
    hop_ms: int = DEFAULT_HOP_MS
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        units = np.ascontiguousarray(self.unit_vectors, dtype=np.float32)
        if vectors.ndim != 2 or units.ndim != 2:
            raise ValidationError("matching-set matrices must be 2-D")
        if vectors.shape != units.shape:
            raise ValidationError(
                f"vectors {vectors.shape} and unit_vectors {units.shape} disagree"
            )
        if len(self.source) != vectors.shape[0]:
            raise ValidationError(
                f"{len(self.source)} provenance records for {vectors.shape[0]} vectors"
            )
        if units.size:
            norms = np.linalg.norm(units.astype(np.float64), axis=1)
            if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL):
                worst = float(np.max(np.abs(norms - 1.0)))
                raise ValidationError(
                    f"unit_vectors rows deviate from unit norm by up to {worst:.2e}"
                )
        vectors.setflags(write=False)
        units.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "unit_vectors", units)
        object.__setattr__(self, "source", tuple(self.source))

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def total_duration_s(self) -> float:
        return self.size * self.hop_ms / 1000.0

    @property
    def utterance_ids(self) -> tuple[str, ...]:
        """Distinct utterance ids in first-appearance order."""
        seen: dict[str, None] = {}
        for uid, _ in self.source:
            seen.setdefault(uid)
        return tuple(seen)

    def __len__(self) -> int:
        return self.size


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def _jsonify_scalar(value: Any):
    """Let numpy scalars/arrays pass through metadata serialization."""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_features(seq: FeatureSequence, destination: BinaryIO) -> int:
    """Serialize ``seq`` to ``destination`` and return the byte count written.

    Raises:
        ValidationError: non-finite frames or unserializable metadata.
        OSError: propagated from the sink.
    """
    frames = seq.frames
    if frames.size and not np.isfinite(frames).all():
        raise ValidationError("refusing to write non-finite frame values")

    try:
        metadata_bytes = json.dumps(
            seq.header.metadata,
            ensure_ascii=False,
            sort_keys=True,
            separators=(",", ":"),
            default=_jsonify_scalar,
        ).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"metadata is not JSON serializable: {exc}") from exc
    header = _HEADER_STRUCT.pack(
        seq.header.dim,
        seq.header.n_frames,
        seq.header.hop_ms,
        seq.header.sample_rate_hz,
        len(metadata_bytes),
    )
    payload = np.ascontiguousarray(frames, dtype="<f4").tobytes()

    written = 0
    for chunk in (MAGIC, header, metadata_bytes, payload):
        destination.write(chunk)
        written += len(chunk)
    return written


def read_features(source: BinaryIO) -> FeatureSequence:
    """Parse one feature file from ``source``.

    Reads exactly the declared number of bytes, leaving the stream positioned
    after the payload (trailing bytes are untouched).

    Raises:
        FormatError: wrong magic, malformed header fields, or bad metadata.
        TruncationError: the stream ends before the declared payload does.
        ValidationError: the payload contains NaN or Inf values.
    """
    magic = source.read(len(MAGIC))
    if len(magic) < len(MAGIC):
        raise TruncationError("stream shorter than the 8-byte magic tag")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")

    raw_header = source.read(_HEADER_STRUCT.size)
    if len(raw_header) < _HEADER_STRUCT.size:
        raise TruncationError("stream ends inside the fixed header")
    dim, n_frames, hop_ms, sample_rate_hz, metadata_len = _HEADER_STRUCT.unpack(
        raw_header
    )
    if dim < 1 or hop_ms < 1 or sample_rate_hz < 1:
        raise FormatError(
            f"invalid header fields: dim={dim} hop_ms={hop_ms} "
            f"sample_rate_hz={sample_rate_hz}"
        )

    metadata_bytes = source.read(metadata_len)
    if len(metadata_bytes) < metadata_len:
        raise TruncationError(
            f"metadata truncated: declared {metadata_len} bytes, "
            f"got {len(metadata_bytes)}"
        )
    try:
        metadata = json.loads(metadata_bytes.decode("utf-8")) if metadata_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"metadata is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(metadata, dict):
        raise FormatError("metadata JSON must be an object")

    payload_len = n_frames * dim * 4
    payload = source.read(payload_len)
    if len(payload) < payload_len:
        raise TruncationError(
            f"payload truncated: declared {payload_len} bytes, got {len(payload)}"
        )
    frames = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dim)
    if frames.size and not np.isfinite(frames).all():
        raise ValidationError("payload contains NaN or Inf values")

    header = FeatureFileHeader(
        dim=dim,
        n_frames=n_frames,
        hop_ms=hop_ms,
        sample_rate_hz=sample_rate_hz,
        metadata=metadata,
    )
    return FeatureSequence(header=header, frames=frames)


def save_features(seq: FeatureSequence, path: str | Path) -> int:
    """Write ``seq`` to ``path`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        prefix=path.name + ".", suffix=".tmp", dir=path.parent
    )
    try:
        with os.fdopen(fd, "wb") as sink:
            written = write_features(seq, sink)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    return written


def load_features(path: str | Path) -> FeatureSequence:
    """Read one feature file from ``path``."""
    with open(path, "rb") as source:
        return read_features(source)


# ---------------------------------------------------------------------------
# matching-set construction
# ---------------------------------------------------------------------------


def build_matching_set(utterances: Sequence[FeatureSequence]) -> MatchingSet:
    """Pool the frames of ``utterances`` into one matching set.

    All utterances must agree on dim, hop_ms, and sample_rate_hz, and must
    contribute at least one frame in total. Rows keep the concatenation
    order of the inputs; provenance records the originating utterance id
    (``metadata["utterance_id"]`` when present, else a positional id) and
    frame index.

    Raises:
        EmptySetError: no utterances, or zero frames in total.
        ConfigError: dim / hop / sample-rate mismatch between utterances.
        DegenerateInputError: any frame with Euclidean norm < 1e-8.
    """
    utterances = list(utterances)
    if not utterances:
        raise EmptySetError("cannot build a matching set from zero utterances")

    first = utterances[0].header
    for seq in utterances[1:]:
        h = seq.header
        if h.dim != first.dim:
            raise ConfigError(f"dim mismatch: {h.dim} != {first.dim}")
        if h.hop_ms != first.hop_ms or h.sample_rate_hz != first.sample_rate_hz:
            raise ConfigError(
                f"timing mismatch: hop {h.hop_ms} ms / {h.sample_rate_hz} Hz vs "
                f"{first.hop_ms} ms / {first.sample_rate_hz} Hz"
            )

    total = sum(seq.n_frames for seq in utterances)
    if total == 0:
        raise EmptySetError("utterances contribute zero frames in total")

    source: list[tuple[str, int]] = []
    for position, seq in enumerate(utterances):
        uid = seq.utterance_id or f"utt{position:04d}"
        source.extend((uid, t) for t in range(seq.n_frames))

    vectors = np.concatenate(
        [seq.frames for seq in utterances if seq.n_frames], axis=0
    )
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    bad = np.nonzero(norms < ZERO_NORM_EPS)[0]
    if bad.size:
        uid, t = source[int(bad[0])]
        raise DegenerateInputError(
            f"{bad.size} frame(s) with near-zero norm; first at "
            f"utterance {uid!r} frame {t}"
        )
    unit_vectors = (vectors.astype(np.float64) / norms[:, None]).astype(np.float32)

    return MatchingSet(
        vectors=vectors,
        unit_vectors=unit_vectors,
        source=tuple(source),
        hop_ms=first.hop_ms,
        sample_rate_hz=first.sample_rate_hz,
    )


def subsample_matching_set(
    matching_set: MatchingSet, target_duration_s: float, seed: int
) -> MatchingSet:
    """Reduce a matching set to roughly ``target_duration_s`` of audio.

    Whole utterances (identified via provenance) are drawn uniformly at
    random without replacement under ``seed`` until the accumulated duration
    first reaches or exceeds the target. If the full set is already smaller
    than the target, it is returned unchanged. Deterministic for a fixed
    seed.
    """
    if not target_duration_s > 0:
        raise ValidationError(
            f"target_duration_s must be > 0, got {target_duration_s}"
        )
    if matching_set.total_duration_s <= target_duration_s:
        return matching_set

    # Row indices per utterance, keyed in first-appearance order.
    groups: dict[str, list[int]] = {}
    for row, (uid, _) in enumerate(matching_set.source):
        groups.setdefault(uid, []).append(row)

    uids = list(groups)
    order = np.random.default_rng(seed).permutation(len(uids))

    frame_duration_s = matching_set.hop_ms / 1000.0
    chosen_rows: list[int] = []
    accumulated = 0.0
    for idx in order:
        rows = groups[uids[int(idx)]]
        chosen_rows.extend(rows)
        accumulated += len(rows) * frame_duration_s
        if accumulated >= target_duration_s:
            break

    row_index = np.asarray(chosen_rows, dtype=np.intp)
    return MatchingSet(
        vectors=matching_set.vectors[row_index],
        unit_vectors=matching_set.unit_vectors[row_index],
        source=tuple(matching_set.source[i] for i in chosen_rows),
        hop_ms=matching_set.hop_ms,
        sample_rate_hz=matching_set.sample_rate_hz,
    )


def pool_utterances(
    sequences: Iterable[FeatureSequence],
) -> list[FeatureSequence]:
    """Materialize an iterable of sequences, assigning positional utterance
    ids to any that lack one (keeps provenance unambiguous downstream)."""
    pooled = []
    for position, seq in enumerate(sequences):
        if seq.utterance_id is None:
            seq = seq.with_metadata(utterance_id=f"utt{position:04d}")
        pooled.append(seq)
    return pooled
