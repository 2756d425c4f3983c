"""Command-line interface.

Subcommands::

    kvc convert       source features -> converted features via kNN regression
    kvc prematch      rebuild a corpus speaker-by-speaker for vocoder training
    kvc ablate        duration/k/seed sweep, one CSV row per cell
    kvc info          dump a feature-file header and metadata
    kvc score-trials  cosine-score embedding-file pairs into a trial CSV
    kvc eval-eer      equal error rate from a trial CSV
    kvc eval-wer      word/character error rates from a transcript TSV

Every run can emit a JSON manifest (resolved parameters, tool version,
timings, stage counts) sufficient to reproduce it; commands that write an
output file place the manifest next to it by default. Outputs are written
to a temp file and renamed into place, so a failed run leaves nothing
partial behind.

Exit codes: 0 success, 2 usage, 3 validation/format/config error,
4 I/O error, 5 insufficient data or empty matching set, 1 unexpected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    EmptySetError,
    FormatError,
    InsufficientDataError,
    KvcError,
    ValidationError,
)
from .evalkit import (
    TrialSet,
    compute_eer,
    cosine_similarity_scores,
    evaluate_transcripts,
    load_transcripts,
)
from .features import (
    build_matching_set,
    load_features,
    pool_utterances,
    save_features,
    subsample_matching_set,
)
from .knn import KnnConfig, convert_sequence
from .prematch import WORKERS_ENV_VAR, PrematchJob, run_prematch_job
from .synthbench import SynthConfig, generate_corpus, preservation_curve

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_INSUFFICIENT_DATA = 5

DEFAULT_ABLATE_DURATIONS = (5.0, 10.0, 30.0, 60.0, 300.0, 480.0)


@dataclass
class RunManifest:
    """Reproducibility record for one CLI run."""

    command: str
    parameters: dict[str, Any]
    version: str = __version__
    started_at_unix: float = field(default_factory=time.time)
    wall_seconds: float = 0.0
    counts: dict[str, Any] = field(default_factory=dict)

    def finish(self, started: float) -> None:
        self.wall_seconds = time.perf_counter() - started

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "parameters": self.parameters,
                "version": self.version,
                "started_at_unix": self.started_at_unix,
                "wall_seconds": self.wall_seconds,
                "counts": self.counts,
            },
            indent=2,
            sort_keys=True,
        )


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(
    manifest: RunManifest, out: Path | None, explicit: str | None
) -> None:
    if explicit:
        _atomic_write_text(Path(explicit), manifest.to_json() + "\n")
    elif out is not None:
        _atomic_write_text(
            out.with_name(out.name + ".manifest.json"), manifest.to_json() + "\n"
        )


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_convert(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = KnnConfig(k=args.k)
    manifest = RunManifest(
        command="convert",
        parameters={
            "source": str(args.source),
            "references": [str(p) for p in args.references],
            "out": str(args.out),
            "k": args.k,
            "metric": config.metric,
        },
    )

    query = load_features(args.source)
    references = pool_utterances(load_features(p) for p in args.references)
    matching_set = build_matching_set(references)

    convert_started = time.perf_counter()
    converted = convert_sequence(query, matching_set, config)
    convert_seconds = time.perf_counter() - convert_started

    out = Path(args.out)
    save_features(converted, out)

    throughput = query.n_frames / convert_seconds if convert_seconds > 0 else 0.0
    manifest.counts = {
        "matching_set_size": matching_set.size,
        "matching_set_duration_s": matching_set.total_duration_s,
        "query_frames": query.n_frames,
        "throughput_frames_per_s": throughput,
    }
    manifest.finish(started)
    _write_manifest(manifest, out, args.manifest)

    print(
        f"N={matching_set.size} duration_s={matching_set.total_duration_s:.2f} "
        f"frames={query.n_frames} throughput={throughput:.1f} frames/s"
    )
    return EXIT_OK


def cmd_prematch(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    job = PrematchJob.from_manifest(
        args.manifest_path,
        args.out_dir,
        config=KnnConfig(k=args.k),
        min_utterances_per_speaker=args.min_utterances,
    )
    manifest = RunManifest(
        command="prematch",
        parameters={
            "manifest": str(args.manifest_path),
            "out_dir": str(args.out_dir),
            "k": args.k,
            "min_utterances": args.min_utterances,
            "workers": os.environ.get(WORKERS_ENV_VAR, "1"),
        },
    )
    report = run_prematch_job(job)
    manifest.counts = report.to_dict()
    manifest.finish(started)
    _write_manifest(manifest, Path(args.out_dir) / "prematch", args.manifest)

    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _ablate_synthetic(args: argparse.Namespace) -> list[dict[str, Any]]:
    synth = SynthConfig(seed=args.synth_seed)
    corpus = generate_corpus(synth)
    speakers = sorted(corpus)
    if len(speakers) < 2:
        raise InsufficientDataError("synthetic corpus needs at least two speakers")
    rows: list[dict[str, Any]] = []
    for k in args.k_values:
        rows.extend(
            preservation_curve(
                corpus,
                query_speaker=speakers[0],
                target_speaker=speakers[1],
                durations_s=args.durations,
                config=KnnConfig(k=k),
                seeds=args.seeds,
            )
        )
    for row in rows:
        row["status"] = "ok"
    return rows


def _ablate_real(args: argparse.Namespace) -> list[dict[str, Any]]:
    with open(args.corpus_manifest, "r", encoding="utf-8") as fh:
        corpus_spec = json.load(fh)
    if not isinstance(corpus_spec, dict) or not {"query", "reference"} <= set(
        corpus_spec
    ):
        raise ValidationError(
            "corpus manifest must be a JSON object with 'query' and "
            "'reference' feature-file lists"
        )
    base = Path(args.corpus_manifest).parent

    def resolve(entry: str) -> Path:
        p = Path(entry)
        return p if p.is_absolute() else base / p

    queries = [load_features(resolve(p)) for p in corpus_spec["query"]]
    references = pool_utterances(
        load_features(resolve(p)) for p in corpus_spec["reference"]
    )
    pooled = build_matching_set(references)
    out_dir = Path(args.out_dir) if args.out_dir else None

    rows: list[dict[str, Any]] = []
    for duration in sorted(args.durations):
        for k in args.k_values:
            for seed in args.seeds:
                row: dict[str, Any] = {
                    "duration_s": float(duration),
                    "k": k,
                    "seed": seed,
                }
                try:
                    subset = subsample_matching_set(pooled, duration, seed)
                    row["set_size"] = subset.size
                    config = KnnConfig(k=k)
                    for q_index, query in enumerate(queries):
                        converted = convert_sequence(query, subset, config)
                        if out_dir is not None:
                            cell = f"d{duration:g}_k{k}_s{seed}"
                            save_features(
                                converted, out_dir / cell / f"q{q_index:03d}.kvcf"
                            )
                    row.update(_cell_metrics(args, duration, k, seed))
                    row["status"] = "ok"
                except (KvcError, OSError) as exc:
                    row["status"] = f"error: {exc}"
                rows.append(row)
    rows.sort(key=lambda r: (r["duration_s"], r["k"], r["seed"]))
    return rows


def _cell_metrics(
    args: argparse.Namespace, duration: float, k: int, seed: int
) -> dict[str, Any]:
    """Attach EER/WER for a sweep cell when score/transcript files exist."""
    metrics: dict[str, Any] = {}
    values = {"duration": f"{duration:g}", "k": str(k), "seed": str(seed)}
    if args.trial_csv:
        trial_path = args.trial_csv.format(**values)
        metrics["eer"] = compute_eer(TrialSet.from_csv(trial_path)).eer
    if args.transcript_tsv:
        tsv_path = args.transcript_tsv.format(**values)
        aggregate = evaluate_transcripts(load_transcripts(tsv_path))["aggregate"]
        metrics["wer"] = aggregate["wer"]
        metrics["cer"] = aggregate["cer"]
    return metrics


def cmd_ablate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    manifest = RunManifest(
        command="ablate",
        parameters={
            "synthetic": args.corpus_manifest is None,
            "corpus_manifest": args.corpus_manifest,
            "durations": args.durations,
            "k_values": args.k_values,
            "seeds": args.seeds,
            "synth_seed": args.synth_seed,
            "out": str(args.out),
        },
    )
    if args.corpus_manifest is None:
        rows = _ablate_synthetic(args)
    else:
        rows = _ablate_real(args)

    columns = ["duration_s", "k", "seed", "set_size", "preservation", "eer", "wer",
               "cer", "status"]
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row.get(col, "") for col in columns])
    out = Path(args.out)
    _atomic_write_text(out, buffer.getvalue())

    failures = sum(1 for row in rows if row.get("status") != "ok")
    manifest.counts = {"cells": len(rows), "failed_cells": failures}
    manifest.finish(started)
    _write_manifest(manifest, out, args.manifest)
    print(f"wrote {len(rows)} cells to {out} ({failures} failed)")
    return EXIT_OK


def cmd_info(args: argparse.Namespace) -> int:
    seq = load_features(args.path)
    header = seq.header
    print(f"path:           {args.path}")
    print(f"dim:            {header.dim}")
    print(f"n_frames:       {header.n_frames}")
    print(f"hop_ms:         {header.hop_ms}")
    print(f"sample_rate_hz: {header.sample_rate_hz}")
    print(f"duration_s:     {header.duration_s:.3f}")
    print(f"metadata:       {json.dumps(header.metadata, sort_keys=True)}")
    return EXIT_OK


def cmd_score_trials(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    manifest = RunManifest(
        command="score-trials",
        parameters={"pairs": str(args.pairs), "out": str(args.out)},
    )

    def embedding(path: str) -> np.ndarray:
        seq = load_features(path)
        if seq.n_frames != 1:
            raise ValidationError(
                f"{path}: embedding files hold exactly one vector per "
                f"utterance, found {seq.n_frames} frames"
            )
        return seq.frames[0]

    rows: list[tuple[float, int]] = []
    with open(args.pairs, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"file_a", "file_b", "label"} <= set(
            reader.fieldnames
        ):
            raise ValidationError(
                "pairs CSV must have a 'file_a,file_b,label' header"
            )
        base = Path(args.pairs).parent
        for line_no, record in enumerate(reader, start=2):
            try:
                label = int(record["label"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(
                    f"pairs CSV line {line_no}: bad label: {exc}"
                ) from exc
            path_a, path_b = Path(record["file_a"]), Path(record["file_b"])
            vec_a = embedding(path_a if path_a.is_absolute() else base / path_a)
            vec_b = embedding(path_b if path_b.is_absolute() else base / path_b)
            score = cosine_similarity_scores([vec_a], [vec_b])[0]
            rows.append((score, label))

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["score", "label"])
    writer.writerows(rows)
    out = Path(args.out)
    _atomic_write_text(out, buffer.getvalue())

    manifest.counts = {"trials": len(rows)}
    manifest.finish(started)
    _write_manifest(manifest, out, args.manifest)
    print(f"wrote {len(rows)} trials to {out}")
    return EXIT_OK


def cmd_eval_eer(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    trials = TrialSet.from_csv(args.trials)
    result = compute_eer(trials)
    payload = dict(result.to_dict(), n_trials=len(trials))
    text = json.dumps(payload, indent=2, sort_keys=True)
    out = Path(args.out) if args.out else None
    if out is not None:
        _atomic_write_text(out, text + "\n")
    manifest = RunManifest(
        command="eval-eer",
        parameters={"trials": str(args.trials), "out": args.out},
    )
    manifest.counts = {"n_trials": len(trials)}
    manifest.finish(started)
    _write_manifest(manifest, out, args.manifest)
    print(text)
    return EXIT_OK


def cmd_eval_wer(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    pairs = load_transcripts(args.transcripts)
    result = evaluate_transcripts(pairs)
    text = json.dumps(result, indent=2, sort_keys=True)
    out = Path(args.out) if args.out else None
    if out is not None:
        _atomic_write_text(out, text + "\n")
    manifest = RunManifest(
        command="eval-wer",
        parameters={"transcripts": str(args.transcripts), "out": args.out},
    )
    manifest.counts = {"n_utterances": len(pairs)}
    manifest.finish(started)
    _write_manifest(manifest, out, args.manifest)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvc",
        description="k-nearest-neighbor voice conversion over feature files",
    )
    parser.add_argument("--version", action="version", version=f"kvc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert source features to a target voice")
    p.add_argument("source", help="source (query) feature file")
    p.add_argument("references", nargs="+", help="target-speaker feature files")
    p.add_argument("--out", required=True, help="output feature file")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("prematch", help="prematch a corpus for vocoder training")
    p.add_argument("manifest_path", help="JSON mapping speaker ids to file lists")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--min-utterances", type=int, default=2)
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_prematch)

    p = sub.add_parser("ablate", help="duration/k/seed sweep to CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument(
        "--durations",
        type=_parse_float_list,
        default=list(DEFAULT_ABLATE_DURATIONS),
        help="comma-separated matching-set durations in seconds",
    )
    p.add_argument("--k-values", type=_parse_int_list, default=[4])
    p.add_argument("--seeds", type=_parse_int_list, default=[0, 1, 2])
    p.add_argument(
        "--corpus-manifest",
        default=None,
        help="JSON with 'query' and 'reference' feature-file lists; "
        "omit to sweep the synthetic corpus",
    )
    p.add_argument("--out-dir", default=None, help="directory for per-cell outputs")
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument(
        "--trial-csv",
        default=None,
        help="per-cell trial CSV template, e.g. scores_d{duration}_k{k}_s{seed}.csv",
    )
    p.add_argument(
        "--transcript-tsv",
        default=None,
        help="per-cell transcript TSV template with {duration},{k},{seed} fields",
    )
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("info", help="print a feature-file header")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser(
        "score-trials", help="cosine-score embedding-file pairs into a trial CSV"
    )
    p.add_argument("pairs", help="CSV with file_a,file_b,label columns")
    p.add_argument("--out", required=True, help="output trial CSV (score,label)")
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_score_trials)

    p = sub.add_parser("eval-eer", help="equal error rate from a trial CSV")
    p.add_argument("trials", help="CSV with score,label columns")
    p.add_argument("--out", default=None, help="write result JSON here")
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_eval_eer)

    p = sub.add_parser(
        "eval-wer", help="word/character error rates from a transcript TSV"
    )
    p.add_argument("transcripts", help="TSV: utterance_id, reference, hypothesis")
    p.add_argument("--out", default=None, help="write result JSON here")
    p.add_argument("--manifest", default=None, help="manifest JSON path override")
    p.set_defaults(func=cmd_eval_wer)

    return parser


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (EmptySetError, InsufficientDataError)):
        return EXIT_INSUFFICIENT_DATA
    if isinstance(exc, (ValidationError, FormatError, ConfigError)):
        return EXIT_VALIDATION
    if isinstance(exc, json.JSONDecodeError):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_UNEXPECTED


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KvcError, OSError, json.JSONDecodeError) as exc:
        print(f"kvc {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
