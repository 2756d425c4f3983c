"""Synthetic clustered-feature testbed for desk-scale trend checks.

Generates "phone-like" feature streams for artificial speakers: each phone
has a global centroid, each speaker adds a fixed offset, and every frame
adds Gaussian noise. Conversion quality is then measured as label
preservation: the fraction of query frames whose selected neighbors'
majority phone label matches the query frame's label. This stands in for
intelligibility metrics that would otherwise need a speech recognizer,
and lets the duration/quality trend be checked end to end in seconds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError
from .features import (
    FeatureSequence,
    MatchingSet,
    build_matching_set,
    subsample_matching_set,
)
from .knn import KnnConfig, _batch_top_k


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic corpus shape and noise model.

    Defaults give each speaker 480 s of frames (60 utterances of 8 s at a
    20 ms hop), matching the full-duration point of the ablation grid.
    The noise defaults are tuned so that tiny matching sets visibly hurt
    label preservation while the full-duration set stays above 95%.
    """

    n_phones: int = 40
    dim: int = 64
    n_speakers: int = 3
    frames_per_utterance: int = 400
    utterances_per_speaker: int = 60
    phone_spread: float = 1.5
    speaker_shift: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        counts = {
            "n_phones": self.n_phones,
            "dim": self.dim,
            "n_speakers": self.n_speakers,
            "frames_per_utterance": self.frames_per_utterance,
            "utterances_per_speaker": self.utterances_per_speaker,
        }
        for name, value in counts.items():
            if value < 1:
                raise ValidationError(f"{name} must be >= 1, got {value}")
        if self.phone_spread < 0 or self.speaker_shift < 0:
            raise ValidationError("spreads must be >= 0")

    @property
    def duration_per_speaker_s(self) -> float:
        return self.utterances_per_speaker * self.frames_per_utterance * 0.02


@dataclass(frozen=True)
class LabeledSequence:
    """A feature sequence plus its per-frame phone labels."""

    sequence: FeatureSequence
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != self.sequence.n_frames:
            raise ValidationError(
                f"{labels.shape[0]} labels for {self.sequence.n_frames} frames"
            )
        if labels.size and labels.min() < 0:
            raise ValidationError("phone labels must be non-negative")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)


def _speaker_id(index: int) -> str:
    return f"s{index:02d}"


def generate_corpus(config: SynthConfig) -> dict[str, list[LabeledSequence]]:
    """Generate per-speaker labeled utterances, deterministic per seed.

    Frame = phone centroid + speaker offset + Gaussian noise. Every
    utterance draws from its own seed stream derived from
    ``(seed, speaker, utterance)``, so generation order (or parallel
    generation) cannot change the corpus.
    """
    global_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    centroids = global_rng.standard_normal((config.n_phones, config.dim))

    offsets = np.zeros((config.n_speakers, config.dim))
    if config.speaker_shift > 0:
        directions = global_rng.standard_normal((config.n_speakers, config.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        offsets = directions * config.speaker_shift

    corpus: dict[str, list[LabeledSequence]] = {}
    for s in range(config.n_speakers):
        speaker = _speaker_id(s)
        utterances = []
        for u in range(config.utterances_per_speaker):
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, s, u]))
            labels = rng.integers(0, config.n_phones, size=config.frames_per_utterance)
            frames = centroids[labels] + offsets[s]
            if config.phone_spread > 0:
                frames = frames + config.phone_spread * rng.standard_normal(
                    frames.shape
                )
            sequence = FeatureSequence.from_frames(
                frames.astype(np.float32),
                metadata={"speaker_id": speaker, "utterance_id": f"{speaker}_u{u:03d}"},
            )
            utterances.append(LabeledSequence(sequence=sequence, labels=labels))
        corpus[speaker] = utterances
    return corpus


def _labels_for_set(
    matching_set: MatchingSet, labeled: Sequence[LabeledSequence]
) -> np.ndarray:
    """Per-row phone labels of a matching set, aligned via provenance."""
    by_utterance = {ls.sequence.utterance_id: ls.labels for ls in labeled}
    return np.asarray(
        [by_utterance[uid][frame] for uid, frame in matching_set.source],
        dtype=np.int64,
    )


def _preservation(
    query: LabeledSequence,
    matching_set: MatchingSet,
    set_labels: np.ndarray,
    config: KnnConfig,
) -> float:
    indices, _ = _batch_top_k(query.sequence.frames, matching_set, config)
    neighbor_labels = set_labels[indices]
    predicted = np.empty(neighbor_labels.shape[0], dtype=np.int64)
    for t in range(neighbor_labels.shape[0]):
        # bincount argmax resolves majority ties toward the lowest label
        predicted[t] = np.bincount(neighbor_labels[t]).argmax()
    return float(np.mean(predicted == query.labels))


def measure_label_preservation(
    query: LabeledSequence,
    set_source: Sequence[LabeledSequence],
    config: KnnConfig | None = None,
) -> float:
    """Fraction of query frames whose neighbors' majority label matches.

    The matching set pools every sequence in ``set_source``; neighbor
    majority votes break ties toward the lowest label.
    """
    config = config or KnnConfig()
    matching_set = build_matching_set([ls.sequence for ls in set_source])
    set_labels = _labels_for_set(matching_set, set_source)
    return _preservation(query, matching_set, set_labels, config)


def preservation_curve(
    corpus: dict[str, list[LabeledSequence]],
    query_speaker: str,
    target_speaker: str,
    durations_s: Sequence[float],
    config: KnnConfig | None = None,
    seeds: Sequence[int] = (0,),
    max_query_utterances: int = 5,
) -> list[dict[str, Any]]:
    """Label preservation versus matching-set duration.

    For each (duration, seed) cell, subsamples the target speaker's pooled
    matching set to the duration and averages preservation over the first
    ``max_query_utterances`` utterances of the query speaker. Returns one
    row dict per cell, sorted by (duration, k, seed).
    """
    config = config or KnnConfig()
    queries = corpus[query_speaker][:max_query_utterances]
    target = corpus[target_speaker]
    pooled = build_matching_set([ls.sequence for ls in target])

    rows = []
    for duration in sorted(durations_s):
        for seed in seeds:
            subset = subsample_matching_set(pooled, duration, seed)
            subset_labels = _labels_for_set(subset, target)
            values = [
                _preservation(query, subset, subset_labels, config)
                for query in queries
            ]
            rows.append(
                {
                    "duration_s": float(duration),
                    "preservation": float(np.mean(values)),
                    "k": config.k,
                    "seed": int(seed),
                    "set_size": subset.size,
                }
            )
    rows.sort(key=lambda r: (r["duration_s"], r["k"], r["seed"]))
    return rows


def write_curve_csv(rows: Sequence[dict[str, Any]], path: str | Path) -> None:
    """Emit sweep rows as ``duration_s,preservation,k,seed`` CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["duration_s", "preservation", "k", "seed"])
        for row in rows:
            writer.writerow(
                [row["duration_s"], row["preservation"], row["k"], row["seed"]]
            )
