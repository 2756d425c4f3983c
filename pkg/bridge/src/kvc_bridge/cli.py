"""Command-line interface for the model adapters.

Subcommands::

    kvc-bridge extract     wav files -> feature files
    kvc-bridge vocode      feature files -> wav files
    kvc-bridge embed       wav files -> speaker-embedding feature files
    kvc-bridge transcribe  wav files + references JSON -> transcript TSV

Exit codes: 0 success (possibly with per-file errors reported on stderr),
2 usage, 3 configuration/format error, 4 I/O error, 5 missing model
dependency or empty input.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import __version__
from .asr import transcribe, write_transcript_tsv
from .batch import BatchResult
from .config import BridgeConfig
from .encoder import extract_features
from .errors import (
    BridgeConfigError,
    BridgeError,
    DependencyError,
    EmptyInputError,
    FeatureFormatError,
)
from .speaker import embed_speaker
from .vocoder import vocode_batch

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_DEPENDENCY = 5


def _report(result: BatchResult) -> int:
    for error in result.errors:
        print(f"kvc-bridge: {error['path']}: {error['error']}", file=sys.stderr)
    print(
        json.dumps(
            {"written": len(result.outputs), "failed": len(result.errors)},
            sort_keys=True,
        )
    )
    return EXIT_OK if result.outputs or not result.errors else EXIT_IO


def cmd_extract(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        encoder_backend=args.backend,
        encoder_model_id=args.model,
        encoder_layer=args.layer,
        feature_dim=args.dim,
        device=args.device,
    )
    return _report(extract_features(args.wavs, args.out_dir, config))


def cmd_vocode(args: argparse.Namespace) -> int:
    config = BridgeConfig(
        vocoder_backend=args.backend,
        vocoder_checkpoint=args.checkpoint,
        feature_dim=args.dim,
        device=args.device,
    )
    return _report(vocode_batch(args.features, args.out_dir, config))


def cmd_embed(args: argparse.Namespace) -> int:
    return _report(embed_speaker(args.wavs, args.out_dir, BridgeConfig()))


def cmd_transcribe(args: argparse.Namespace) -> int:
    with open(args.references, "r", encoding="utf-8") as fh:
        references = json.load(fh)
    hypotheses, result = transcribe(args.wavs, config=BridgeConfig(device=args.device))
    write_transcript_tsv(hypotheses, references, args.out)
    print(f"wrote {len(hypotheses)} transcripts to {args.out}")
    for error in result.errors:
        print(f"kvc-bridge: {error['path']}: {error['error']}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvc-bridge",
        description="adapters between audio, pretrained models, and feature files",
    )
    parser.add_argument(
        "--version", action="version", version=f"kvc-bridge {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="wav files -> feature files")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backend", default="spectral", choices=["spectral", "wavlm"])
    p.add_argument("--model", default="microsoft/wavlm-large")
    p.add_argument("--layer", type=int, default=6)
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("vocode", help="feature files -> wav files")
    p.add_argument("features", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--backend", default="overlap-add", choices=["overlap-add", "torchscript"]
    )
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_vocode)

    p = sub.add_parser("embed", help="wav files -> speaker-embedding files")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("transcribe", help="wav files -> transcript TSV")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--references", required=True, help="JSON: utterance id -> text")
    p.add_argument("--out", required=True)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_transcribe)

    return parser


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (DependencyError, EmptyInputError)):
        return EXIT_DEPENDENCY
    if isinstance(exc, (BridgeConfigError, FeatureFormatError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_UNEXPECTED


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BridgeError, OSError, json.JSONDecodeError) as exc:
        print(f"kvc-bridge {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
