"""Transcription: wav files to the evaluation TSV contract.

The recognizer is a plain callable so tests can inject a fake and other
ASR systems can be wrapped without touching this module. The default
recognizer wraps a pretrained speech-recognition pipeline and needs
torch + transformers with locally available weights.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .audio import read_wav
from .batch import BatchResult
from .config import BridgeConfig
from .errors import BridgeError, DependencyError

#: (samples, sample_rate) -> hypothesis text
Recognizer = Callable[..., str]


def whisper_recognizer(model_id: str = "openai/whisper-base", device: str = "cpu"):
    """Build a recognizer backed by a pretrained ASR pipeline."""
    try:
        from transformers import pipeline
    except ImportError as exc:
        raise DependencyError(
            "the default recognizer needs transformers installed"
        ) from exc
    try:
        asr = pipeline("automatic-speech-recognition", model=model_id, device=device)
    except Exception as exc:
        raise DependencyError(
            f"cannot load ASR weights for {model_id!r}; they must be "
            f"available locally: {exc}"
        ) from exc

    def recognize(samples, sample_rate):
        result = asr({"raw": samples, "sampling_rate": sample_rate})
        return result["text"].strip()

    return recognize


def transcribe(
    wav_paths: Iterable[str | Path],
    recognizer: Recognizer | None = None,
    config: BridgeConfig | None = None,
) -> tuple[dict[str, str], BatchResult]:
    """Recognize each wav; returns ``(utterance_id -> hypothesis, batch)``."""
    config = config or BridgeConfig()
    if recognizer is None:
        recognizer = whisper_recognizer(device=config.device)
    hypotheses: dict[str, str] = {}
    result = BatchResult()
    for wav_path in wav_paths:
        wav_path = Path(wav_path)
        try:
            samples, rate = read_wav(wav_path, expected_rate=config.sample_rate_hz)
            hypotheses[wav_path.stem] = recognizer(samples, rate)
            result.outputs.append(wav_path)
        except (BridgeError, OSError) as exc:
            result.record_error(wav_path, exc)
    return hypotheses, result


def write_transcript_tsv(
    hypotheses: Mapping[str, str],
    references: Mapping[str, str],
    out_path: str | Path,
) -> Path:
    """Emit ``utterance_id<TAB>reference<TAB>hypothesis`` rows, sorted by id.

    Every hypothesis needs a reference; tabs and newlines inside texts are
    flattened to spaces to keep the TSV well-formed.
    """
    missing = sorted(set(hypotheses) - set(references))
    if missing:
        raise BridgeError(f"no reference text for utterances: {missing[:5]}")

    def clean(text: str) -> str:
        return " ".join(str(text).split())

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=out_path.name + ".", dir=out_path.parent)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        for utt_id in sorted(hypotheses):
            fh.write(
                f"{utt_id}\t{clean(references[utt_id])}\t{clean(hypotheses[utt_id])}\n"
            )
    os.replace(tmp_name, out_path)
    return out_path
