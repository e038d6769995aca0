"""CSV and JSON report emission with atomic, byte-stable writes."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

CSV_HEADER = ("condition", "rate", "trigger_len", "mode", "ba", "asr", "dacc", "dasr")


@dataclass(frozen=True)
class ReportRow:
    """One experimental condition in the fixed report schema."""

    condition: str
    rate: "float | None"
    trigger_len: int
    mode: str
    ba: float
    asr: float
    dacc: float
    dasr: float

    def csv_cells(self):
        rate = "" if self.rate is None else f"{self.rate:g}"
        return (
            self.condition,
            rate,
            str(int(self.trigger_len)),
            self.mode,
            f"{self.ba:.6f}",
            f"{self.asr:.6f}",
            f"{self.dacc:.6f}",
            f"{self.dasr:.6f}",
        )

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "rate": self.rate,
            "trigger_len": int(self.trigger_len),
            "mode": self.mode,
            "ba": self.ba,
            "asr": self.asr,
            "dacc": self.dacc,
            "dasr": self.dasr,
        }


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_report_csv(rows, path) -> None:
    if not rows:
        raise ValueError("refusing to write an empty report")
    lines = [",".join(CSV_HEADER)]
    lines.extend(",".join(row.csv_cells()) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_summary_json(payload: dict, path) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def emit_report(rows, csv_path, json_path=None, meta: dict | None = None) -> None:
    """Write the CSV table and, optionally, a JSON summary carrying metadata.

    Given identical rows and metadata the emitted bytes are identical, which
    is what the pipeline's determinism checks rely on.
    """
    write_report_csv(rows, csv_path)
    if json_path is not None:
        payload = {
            "meta": meta or {},
            "rows": [row.to_dict() for row in rows],
        }
        write_summary_json(payload, json_path)
