"""Deterministic CSV and manifest output.

Every output file starts with a `#`-prefixed metadata block embedding the
config hash; floats are serialized with 17 significant digits so that
re-running a study reproduces the file byte for byte.  Formatting is part
of the determinism contract.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return "sha256:" + hashlib.sha256(canonical_json(config).encode()).hexdigest()


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return "nan"
    return str(value)


def write_csv(path, columns, rows, metadata: dict) -> None:
    """Write one CSV with a metadata comment block and fixed float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {key}: {value}" for key, value in metadata.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class ResultManifest:
    """Execution record: config echo, per-cell status, wall clock per stage."""

    study: str
    config: dict
    version: str
    cells: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def add_cell(self, cell_id: str, status: str, note: str = "") -> None:
        entry = {"id": cell_id, "status": status}
        if note:
            entry["note"] = note
        self.cells.append(entry)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "version": self.version,
            "cells": self.cells,
            "timings": self.timings,
            "outputs": self.outputs,
            **self.extras,
        }

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


class StageTimer:
    """Collects wall-clock durations per named stage."""

    def __init__(self):
        self.timings: dict[str, float] = {}
        self._start: float | None = None
        self._stage: str | None = None

    def start(self, stage: str) -> None:
        self.stop()
        self._stage = stage
        self._start = time.perf_counter()

    def stop(self) -> None:
        if self._stage is not None and self._start is not None:
            self.timings[self._stage] = self.timings.get(self._stage, 0.0) + (
                time.perf_counter() - self._start
            )
        self._stage = None
        self._start = None
