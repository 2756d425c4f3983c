"""Per-file batch results for corpus-scale adapter runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class BatchResult:
    """Outputs plus per-file errors; batch operations continue past failures."""

    outputs: list[Path] = field(default_factory=list)
    errors: list[dict[str, str]] = field(default_factory=list)

    def record_error(self, path: str | Path, exc: Exception) -> None:
        self.errors.append({"path": str(path), "error": str(exc)})

    def to_dict(self) -> dict[str, Any]:
        return {
            "outputs": [str(p) for p in self.outputs],
            "errors": self.errors,
        }
