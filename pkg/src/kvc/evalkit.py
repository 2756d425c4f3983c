"""Objective evaluation: equal error rate and word/character error rates.

EER convention: thresholds sweep the distinct observed scores with the
decision rule "accept as genuine when score >= threshold". FAR is the
fraction of label-0 (converted) trials accepted, FRR the fraction of
label-1 (ground-truth) trials rejected. The reported operating point
minimizes |FAR - FRR|, choosing the lowest threshold on ties, and the EER
is the average of the two rates there. The sweep depends only on score
order, so any strictly increasing rescaling of the scores leaves the EER
unchanged.

W/CER convention: minimum-edit-distance alignment with unit costs,
divided by the reference length. Text is normalized identically on both
sides: lowercase, leading/trailing punctuation stripped per token,
whitespace collapsed. CER runs the same alignment over the characters of
the space-joined normalized tokens.
"""

from __future__ import annotations

import csv
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateInputError, ValidationError

_STRIP_CHARS = string.punctuation + "‘’“”"


# ---------------------------------------------------------------------------
# speaker-similarity trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialSet:
    """Labeled similarity scores: label 1 = genuine pair, 0 = converted pair."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if scores.ndim != 1 or labels.shape != scores.shape:
            raise ValidationError("scores and labels must be matching 1-D arrays")
        if scores.size and not np.isfinite(scores).all():
            raise ValidationError("trial scores must be finite")
        if not np.isin(labels, (0, 1)).all():
            raise ValidationError("trial labels must be 0 or 1")
        if not ((labels == 0).any() and (labels == 1).any()):
            raise ValidationError("need at least one trial of each label")
        scores.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pairs(cls, trials: Iterable[tuple[float, int]]) -> "TrialSet":
        pairs = list(trials)
        scores = np.asarray([s for s, _ in pairs], dtype=np.float64)
        labels = np.asarray([l for _, l in pairs], dtype=np.int64)
        return cls(scores=scores, labels=labels)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrialSet":
        """Load the ``score,label`` CSV contract (header required)."""
        scores: list[float] = []
        labels: list[int] = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"score", "label"} <= set(
                reader.fieldnames
            ):
                raise ValidationError(
                    f"trial CSV {path} must have a 'score,label' header"
                )
            for line_no, row in enumerate(reader, start=2):
                try:
                    scores.append(float(row["score"]))
                    labels.append(int(row["label"]))
                except (TypeError, ValueError) as exc:
                    raise ValidationError(
                        f"trial CSV {path} line {line_no}: {exc}"
                    ) from exc
        return cls(
            scores=np.asarray(scores, dtype=np.float64),
            labels=np.asarray(labels, dtype=np.int64),
        )

    def __len__(self) -> int:
        return int(self.scores.shape[0])


@dataclass(frozen=True)
class EerResult:
    """Equal-error-rate operating point."""

    eer: float
    threshold: float
    far_at_threshold: float
    frr_at_threshold: float

    def to_dict(self) -> dict[str, float]:
        return {
            "eer": self.eer,
            "threshold": self.threshold,
            "far_at_threshold": self.far_at_threshold,
            "frr_at_threshold": self.frr_at_threshold,
        }


def cosine_similarity_scores(
    embeddings_a: Sequence[np.ndarray], embeddings_b: Sequence[np.ndarray]
) -> list[float]:
    """Element-wise cosine similarity between paired embedding lists."""
    if len(embeddings_a) != len(embeddings_b):
        raise ValidationError(
            f"paired lists differ in length: {len(embeddings_a)} vs {len(embeddings_b)}"
        )
    scores: list[float] = []
    for i, (a, b) in enumerate(zip(embeddings_a, embeddings_b)):
        a = np.asarray(a, dtype=np.float64).ravel()
        b = np.asarray(b, dtype=np.float64).ravel()
        if a.shape != b.shape:
            raise ConfigError(
                f"pair {i}: dimension mismatch {a.shape} vs {b.shape}"
            )
        norm_a = np.linalg.norm(a)
        norm_b = np.linalg.norm(b)
        if norm_a == 0.0 or norm_b == 0.0:
            raise DegenerateInputError(f"pair {i}: zero-norm embedding")
        scores.append(float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0)))
    return scores


def compute_eer(trials: TrialSet) -> EerResult:
    """Equal error rate over a labeled trial set.

    Sweeps every distinct score as a threshold and returns the point where
    false-acceptance and false-rejection rates are closest (lowest
    threshold on ties), with ``eer = (FAR + FRR) / 2`` there.
    """
    positives = np.sort(trials.scores[trials.labels == 1])
    negatives = np.sort(trials.scores[trials.labels == 0])
    thresholds = np.unique(trials.scores)

    # Accept when score >= threshold: FAR counts negatives at/above it,
    # FRR counts positives strictly below it.
    far = (
        negatives.size - np.searchsorted(negatives, thresholds, side="left")
    ) / negatives.size
    frr = np.searchsorted(positives, thresholds, side="left") / positives.size

    best = int(np.argmin(np.abs(far - frr)))  # argmin takes the lowest threshold
    return EerResult(
        eer=float((far[best] + frr[best]) / 2.0),
        threshold=float(thresholds[best]),
        far_at_threshold=float(far[best]),
        frr_at_threshold=float(frr[best]),
    )


# ---------------------------------------------------------------------------
# transcript error rates
# ---------------------------------------------------------------------------


def normalize_tokens(text: str) -> tuple[str, ...]:
    """Normalize raw text to comparable tokens.

    Lowercases, collapses whitespace, strips leading/trailing punctuation
    per token, and drops tokens that become empty.
    """
    tokens = []
    for token in text.lower().split():
        token = token.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tuple(tokens)


@dataclass(frozen=True)
class TranscriptPair:
    """Reference/hypothesis token sequences for one utterance."""

    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]

    def __post_init__(self) -> None:
        reference = tuple(self.reference)
        hypothesis = tuple(self.hypothesis)
        for side, tokens in (("reference", reference), ("hypothesis", hypothesis)):
            if any(not isinstance(t, str) or not t for t in tokens):
                raise ValidationError(f"{side} tokens must be non-empty strings")
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "hypothesis", hypothesis)

    @classmethod
    def from_text(cls, reference: str, hypothesis: str) -> "TranscriptPair":
        """Build a pair from raw strings, normalizing both sides identically."""
        return cls(
            reference=normalize_tokens(reference),
            hypothesis=normalize_tokens(hypothesis),
        )


def _edit_distance(reference: Sequence[str], hypothesis: Sequence[str]) -> int:
    """Levenshtein distance with unit substitution/deletion/insertion costs."""
    previous = list(range(len(hypothesis) + 1))
    for i, ref_token in enumerate(reference, start=1):
        current = [i] + [0] * len(hypothesis)
        for j, hyp_token in enumerate(hypothesis, start=1):
            if ref_token == hyp_token:
                current[j] = previous[j - 1]
            else:
                current[j] = 1 + min(previous[j - 1], previous[j], current[j - 1])
        previous = current
    return previous[-1]


def compute_wer(pair: TranscriptPair) -> float:
    """Word error rate: edits divided by reference token count."""
    if not pair.reference:
        raise ValidationError("reference transcript is empty after normalization")
    return _edit_distance(pair.reference, pair.hypothesis) / len(pair.reference)


def compute_cer(pair: TranscriptPair) -> float:
    """Character error rate over the space-joined normalized tokens."""
    if not pair.reference:
        raise ValidationError("reference transcript is empty after normalization")
    ref_chars = list(" ".join(pair.reference))
    hyp_chars = list(" ".join(pair.hypothesis))
    return _edit_distance(ref_chars, hyp_chars) / len(ref_chars)


# ---------------------------------------------------------------------------
# corpus-level aggregation and file contracts
# ---------------------------------------------------------------------------


def load_transcripts(path: str | Path) -> list[tuple[str, TranscriptPair]]:
    """Load the ``utterance_id<TAB>reference<TAB>hypothesis`` TSV contract."""
    pairs: list[tuple[str, TranscriptPair]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(
                    f"transcript TSV {path} line {line_no}: expected 3 "
                    f"tab-separated fields, got {len(parts)}"
                )
            utt_id, reference, hypothesis = parts
            pairs.append((utt_id, TranscriptPair.from_text(reference, hypothesis)))
    return pairs


def evaluate_transcripts(
    pairs: Sequence[tuple[str, TranscriptPair]],
) -> dict[str, Any]:
    """Per-utterance W/CER plus corpus aggregates (total edits / total length)."""
    if not pairs:
        raise ValidationError("no transcript pairs to evaluate")
    per_utterance = {}
    word_edits = word_total = char_edits = char_total = 0
    for utt_id, pair in pairs:
        if not pair.reference:
            raise ValidationError(
                f"utterance {utt_id!r}: reference empty after normalization"
            )
        w_edits = _edit_distance(pair.reference, pair.hypothesis)
        ref_chars = list(" ".join(pair.reference))
        c_edits = _edit_distance(ref_chars, list(" ".join(pair.hypothesis)))
        per_utterance[utt_id] = {
            "wer": w_edits / len(pair.reference),
            "cer": c_edits / len(ref_chars),
        }
        word_edits += w_edits
        word_total += len(pair.reference)
        char_edits += c_edits
        char_total += len(ref_chars)
    return {
        "per_utterance": per_utterance,
        "aggregate": {
            "wer": word_edits / word_total,
            "cer": char_edits / char_total,
            "word_edits": word_edits,
            "word_count": word_total,
            "char_edits": char_edits,
            "char_count": char_total,
            "n_utterances": len(pairs),
        },
    }
