"""Rebuild a vocoder training set through kNN regression.

Each training utterance is regressed against a matching set pooled from
the *other* utterances of the same speaker, so a vocoder trained on the
outputs sees inputs that look like conversion-time inputs. Frame counts
are preserved exactly, keeping feature/waveform alignment undisturbed;
pairing with the original waveforms travels in the metadata utterance id.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .errors import InsufficientDataError, KvcError, ValidationError
from .features import (
    FeatureSequence,
    build_matching_set,
    load_features,
    save_features,
)
from .knn import KnnConfig, convert_sequence

#: Worker-count environment variable shared with the CLI.
WORKERS_ENV_VAR = "KVC_WORKERS"


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV_VAR, "1")))
    except ValueError:
        return 1


@dataclass
class PrematchJob:
    """One prematching run: speaker id -> utterance feature-file paths."""

    speakers: dict[str, list[Path]]
    output_dir: Path
    config: KnnConfig = field(default_factory=KnnConfig)
    min_utterances_per_speaker: int = 2

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)
        self.speakers = {
            str(speaker): [Path(p) for p in paths]
            for speaker, paths in self.speakers.items()
        }
        if self.min_utterances_per_speaker < 2:
            raise ValidationError(
                "min_utterances_per_speaker must be >= 2; an utterance cannot "
                "be prematched without at least one companion utterance"
            )

    @classmethod
    def from_manifest(
        cls,
        manifest_path: str | Path,
        output_dir: str | Path,
        config: KnnConfig | None = None,
        min_utterances_per_speaker: int = 2,
    ) -> "PrematchJob":
        """Load a JSON manifest mapping speaker ids to feature-file lists.

        Relative paths are resolved against the manifest's directory.
        """
        manifest_path = Path(manifest_path)
        with open(manifest_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict) or not all(
            isinstance(v, list) for v in raw.values()
        ):
            raise ValidationError(
                "job manifest must be a JSON object mapping speaker ids to "
                "lists of feature-file paths"
            )
        base = manifest_path.parent
        speakers: dict[str, list[Path]] = {}
        for speaker, paths in raw.items():
            resolved = [Path(entry) for entry in paths]
            speakers[str(speaker)] = [
                p if p.is_absolute() else base / p for p in resolved
            ]
        return cls(
            speakers=speakers,
            output_dir=Path(output_dir),
            config=config or KnnConfig(),
            min_utterances_per_speaker=min_utterances_per_speaker,
        )


@dataclass
class JobReport:
    """Outcome of one prematching job."""

    processed: int = 0
    skipped: int = 0
    failed: int = 0
    speakers_processed: int = 0
    speakers_skipped: int = 0
    per_speaker_seconds: dict[str, float] = field(default_factory=dict)
    errors: list[dict[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    output_files: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "processed": self.processed,
            "skipped": self.skipped,
            "failed": self.failed,
            "speakers_processed": self.speakers_processed,
            "speakers_skipped": self.speakers_skipped,
            "per_speaker_seconds": self.per_speaker_seconds,
            "errors": self.errors,
            "notes": self.notes,
            "output_files": self.output_files,
        }


def prematch_utterance(
    query: FeatureSequence,
    other_utterances: Sequence[FeatureSequence],
    config: KnnConfig | None = None,
) -> FeatureSequence:
    """Regress ``query`` against a pool built from its companion utterances.

    ``other_utterances`` must exclude the query itself; passing an empty
    list raises :class:`InsufficientDataError`.
    """
    others = list(other_utterances)
    if not others:
        raise InsufficientDataError(
            "prematching needs at least one other utterance from the speaker"
        )
    matching_set = build_matching_set(others)
    return convert_sequence(query, matching_set, config or KnnConfig())


def _prematch_speaker(
    speaker: str,
    utterances: list[tuple[Path, FeatureSequence]],
    output_dir: Path,
    config: KnnConfig,
    report: JobReport,
) -> int:
    """Prematch one speaker's utterances; returns how many were written."""

    def one(index: int) -> tuple[Path | None, tuple[Path, Exception] | None]:
        path, query = utterances[index]
        try:
            others = [seq for j, (_, seq) in enumerate(utterances) if j != index]
            result = prematch_utterance(query, others, config)
            result = result.with_metadata(prematched=True, speaker_id=speaker)
            destination = output_dir / speaker / path.name
            save_features(result, destination)
            return destination, None
        except (KvcError, OSError) as exc:
            return None, (path, exc)

    workers = min(_worker_count(), len(utterances))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(len(utterances))))
    else:
        outcomes = [one(i) for i in range(len(utterances))]

    written = 0
    for destination, failure in outcomes:
        if destination is not None:
            report.output_files.append(str(destination))
            written += 1
        else:
            path, exc = failure
            report.failed += 1
            report.errors.append(
                {"speaker": speaker, "path": str(path), "error": str(exc)}
            )
    report.processed += written
    return written


def run_prematch_job(job: PrematchJob) -> JobReport:
    """Prematch every utterance of every processable speaker in ``job``.

    Speakers with fewer than ``min_utterances_per_speaker`` readable
    utterances are skipped and noted. Unreadable files are recorded as
    per-file errors and the job continues; a job where no speaker can be
    processed raises :class:`InsufficientDataError`.
    """
    report = JobReport()

    for speaker in sorted(job.speakers):
        started = time.perf_counter()
        loaded: list[tuple[Path, FeatureSequence]] = []
        for path in job.speakers[speaker]:
            try:
                loaded.append((path, load_features(path)))
            except (KvcError, OSError) as exc:
                report.failed += 1
                report.errors.append(
                    {"speaker": speaker, "path": str(path), "error": str(exc)}
                )

        if len(loaded) < job.min_utterances_per_speaker:
            report.speakers_skipped += 1
            report.skipped += len(loaded)
            report.notes.append(
                f"speaker {speaker!r}: {len(loaded)} readable utterance(s), "
                f"fewer than the minimum {job.min_utterances_per_speaker}; skipped"
            )
            continue

        written = _prematch_speaker(
            speaker, loaded, job.output_dir, job.config, report
        )
        if written == 0:
            report.speakers_skipped += 1
            report.notes.append(
                f"speaker {speaker!r}: every utterance failed; see errors"
            )
            continue
        report.speakers_processed += 1
        report.per_speaker_seconds[speaker] = time.perf_counter() - started

    if report.speakers_processed == 0:
        raise InsufficientDataError(
            "no processable speakers; "
            + (report.notes[-1] if report.notes else "empty job")
        )
    return report
