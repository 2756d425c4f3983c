"""Cosine-distance k-nearest-neighbor selection and regression.

Conversion replaces every query frame with the uniform mean of its k
nearest matching-set vectors. Distances compare unit-normalized vectors
(cosine); the mean averages the raw, un-normalized vectors so outputs stay
in the encoder's native feature scale.

Distance ties break by ascending matching-set row index. That gives every
query a total neighbor order, which keeps results identical across runs,
row permutations (up to the same permutation of indices), and thread
counts. Scores are accumulated in double precision so near-ties resolve
the same way a brute-force oracle does.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, EmptySetError, InsufficientDataError
from .features import FeatureSequence, MatchingSet, ZERO_NORM_EPS

#: Query-frame blocks of this many rows bound the transient score matrix.
_SCORE_BLOCK = 256

SUPPORTED_METRICS = ("cosine",)
SUPPORTED_WEIGHTINGS = ("uniform",)
K_OVERFLOW_MODES = ("error", "clamp")


@dataclass(frozen=True)
class KnnConfig:
    """Neighbor-selection parameters.

    ``k=4`` with uniform weighting over cosine distance is the default
    operating point; larger k (around 20) can help when ten or more
    minutes of reference audio are available.
    """

    k: int = 4
    metric: str = "cosine"
    weighting: str = "uniform"
    k_overflow: str = "clamp"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.metric not in SUPPORTED_METRICS:
            raise ConfigError(
                f"unsupported metric {self.metric!r}; choose from {SUPPORTED_METRICS}"
            )
        if self.weighting not in SUPPORTED_WEIGHTINGS:
            raise ConfigError(
                f"unsupported weighting {self.weighting!r}; "
                f"choose from {SUPPORTED_WEIGHTINGS}"
            )
        if self.k_overflow not in K_OVERFLOW_MODES:
            raise ConfigError(
                f"unsupported k_overflow {self.k_overflow!r}; "
                f"choose from {K_OVERFLOW_MODES}"
            )


@dataclass(frozen=True)
class NeighborResult:
    """Selected neighbors for one query frame.

    ``indices`` are matching-set row indices, ascending by distance and by
    index within equal distances; ``distances`` are the matching cosine
    distances in [0, 2], non-decreasing.
    """

    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self) -> None:
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        distances = np.ascontiguousarray(self.distances, dtype=np.float64)
        if indices.shape != distances.shape or indices.ndim != 1:
            raise ConfigError("indices and distances must be matching 1-D arrays")
        if np.unique(indices).size != indices.size:
            raise ConfigError("neighbor indices must be distinct")
        if indices.size > 1 and np.any(np.diff(distances) < 0):
            raise ConfigError("neighbor distances must be non-decreasing")
        indices.setflags(write=False)
        distances.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "distances", distances)

    @property
    def k(self) -> int:
        return int(self.indices.shape[0])


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine distance ``1 - dot(a, b)`` between two unit vectors.

    Both inputs must already be unit-normalized; the result is clipped to
    the valid [0, 2] range to absorb float rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(1.0 - np.dot(a, b), 0.0, 2.0))


def _resolve_k(config: KnnConfig, set_size: int) -> int:
    if set_size < 1:
        raise EmptySetError("matching set is empty")
    if config.k <= set_size:
        return config.k
    if config.k_overflow == "error":
        raise InsufficientDataError(
            f"k={config.k} exceeds matching-set size N={set_size}"
        )
    warnings.warn(
        f"k={config.k} exceeds matching-set size N={set_size}; clamping to {set_size}",
        stacklevel=3,
    )
    return set_size


def _unit_rows(frames: np.ndarray) -> np.ndarray:
    """Unit-normalize rows in double precision; reject near-zero rows."""
    frames = np.asarray(frames, dtype=np.float64)
    norms = np.linalg.norm(frames, axis=1)
    bad = np.nonzero(norms < ZERO_NORM_EPS)[0]
    if bad.size:
        raise DegenerateInputError(
            f"query frame {int(bad[0])} has near-zero norm; cosine distance undefined"
        )
    return frames / norms[:, None]


def _select_top_k(distances: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, ties broken by ascending index.

    Uses a bounded partial selection, then widens to every row tied with
    the provisional k-th distance so boundary ties resolve by index rather
    than by partition order.
    """
    n = distances.shape[0]
    if k >= n:
        return np.argsort(distances, kind="stable")[:k]
    working = np.argpartition(distances, k - 1)[:k]
    boundary = distances[working].max()
    candidates = np.nonzero(distances <= boundary)[0]
    order = np.argsort(distances[candidates], kind="stable")
    return candidates[order[:k]]


def _batch_top_k(
    query_frames: np.ndarray, matching_set: MatchingSet, config: KnnConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor indices and distances for a (Q, D) block of query frames.

    Returns ``(indices, distances)`` of shape (Q, k'), where k' is k after
    overflow handling. Scores are computed blockwise in float64 via one
    matrix product per block.
    """
    if query_frames.ndim != 2:
        raise ConfigError("query frames must form a 2-D (n_frames, dim) array")
    if query_frames.shape[1] != matching_set.dim:
        raise ConfigError(
            f"query dim {query_frames.shape[1]} != matching-set dim {matching_set.dim}"
        )
    k = _resolve_k(config, matching_set.size)

    n_queries = query_frames.shape[0]
    indices = np.empty((n_queries, k), dtype=np.int64)
    distances = np.empty((n_queries, k), dtype=np.float64)
    if n_queries == 0:
        return indices, distances

    set_units = matching_set.unit_vectors.astype(np.float64).T  # (D, N)
    for start in range(0, n_queries, _SCORE_BLOCK):
        stop = min(start + _SCORE_BLOCK, n_queries)
        block = _unit_rows(query_frames[start:stop])
        block_distances = 1.0 - block @ set_units
        np.clip(block_distances, 0.0, 2.0, out=block_distances)
        for row in range(block_distances.shape[0]):
            chosen = _select_top_k(block_distances[row], k)
            indices[start + row] = chosen
            distances[start + row] = block_distances[row, chosen]
    return indices, distances


def top_k_neighbors(
    query_frame: np.ndarray, matching_set: MatchingSet, config: KnnConfig
) -> NeighborResult:
    """Select the k nearest matching-set rows for one query frame.

    Returns min(k, N) neighbors when ``config.k_overflow == "clamp"``;
    raises :class:`InsufficientDataError` when k > N in ``"error"`` mode.
    """
    query = np.asarray(query_frame, dtype=np.float64).reshape(1, -1)
    indices, distances = _batch_top_k(query, matching_set, config)
    return NeighborResult(indices=indices[0], distances=distances[0])


def knn_regress_frame(
    query_frame: np.ndarray, matching_set: MatchingSet, config: KnnConfig
) -> np.ndarray:
    """Uniform mean of the raw matching-set vectors nearest to ``query_frame``."""
    result = top_k_neighbors(query_frame, matching_set, config)
    selected = matching_set.vectors[result.indices]
    return selected.mean(axis=0, dtype=np.float64).astype(np.float32)


def convert_sequence(
    query: FeatureSequence, matching_set: MatchingSet, config: KnnConfig | None = None
) -> FeatureSequence:
    """Replace every query frame with its k-nearest-neighbor regression.

    The output has exactly ``query.n_frames`` frames. Header metadata
    carries the conversion parameters and a summary of the matching set so
    downstream tooling can reproduce the run.
    """
    config = config or KnnConfig()
    if query.dim != matching_set.dim:
        raise ConfigError(
            f"query dim {query.dim} != matching-set dim {matching_set.dim}"
        )

    if query.n_frames == 0:
        converted = np.empty((0, query.dim), dtype=np.float32)
    else:
        indices, _ = _batch_top_k(query.frames, matching_set, config)
        raw = matching_set.vectors
        converted = np.empty((query.n_frames, query.dim), dtype=np.float32)
        for start in range(0, query.n_frames, _SCORE_BLOCK):
            stop = min(start + _SCORE_BLOCK, query.n_frames)
            gathered = raw[indices[start:stop]]  # (block, k, dim)
            converted[start:stop] = gathered.mean(axis=1, dtype=np.float64)

    metadata = dict(query.header.metadata)
    metadata["conversion"] = {
        "k": config.k,
        "metric": config.metric,
        "weighting": config.weighting,
        "matching_set": {
            "size": matching_set.size,
            "duration_s": matching_set.total_duration_s,
            "n_utterances": len(matching_set.utterance_ids),
        },
    }
    return FeatureSequence.from_frames(
        converted,
        hop_ms=query.header.hop_ms,
        sample_rate_hz=query.header.sample_rate_hz,
        metadata=metadata,
    )
