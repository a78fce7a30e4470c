"""JSON helpers and persisted run records."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def tidy(obj):
    """Round floats to 12 significant digits and convert numpy values so the
    result serializes as plain JSON."""
    if isinstance(obj, dict):
        return {str(k): tidy(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [tidy(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return tidy(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(tidy(obj), indent=indent, allow_nan=False, ensure_ascii=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


@dataclass
class RunRecord:
    command: str
    parameters: dict
    summary: dict
    artifacts: list[str] = field(default_factory=list)
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        return cls(command=doc["command"], parameters=dict(doc["parameters"]),
                   summary=dict(doc["summary"]), artifacts=list(doc.get("artifacts", [])),
                   timestamp=doc["timestamp"])

    def save(self, path) -> None:
        # no rounding: the record must round-trip exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
