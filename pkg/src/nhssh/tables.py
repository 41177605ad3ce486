"""Tabular sweep output with a provenance header."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

STATUS = "status"


def format_value(x) -> str:
    """17 significant digits for floats; empty cell for non-finite values."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return ""
        return f"{x:.17g}"
    if hasattr(x, "dtype"):
        return format_value(x.item())
    return str(x)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class SweepTable:
    """Named columns (with units) and rows; every row carries a status string.

    Non-finite numbers are written as empty cells, and such rows must carry
    a status other than ``ok``.
    """

    columns: list
    units: list | None = None
    rows: list = field(default_factory=list)
    statuses: list = field(default_factory=list)

    def __post_init__(self):
        if self.units is None:
            self.units = [""] * len(self.columns)
        if len(self.units) != len(self.columns):
            raise ValueError("one unit per column required")

    def add(self, values, status: str = "ok"):
        values = list(values)
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        bad = any(isinstance(v, float) and not math.isfinite(v) for v in values)
        if bad and status == "ok":
            status = "non-finite"
        self.rows.append(values)
        self.statuses.append(status)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def header_line(self) -> list:
        out = []
        for c, u in zip(self.columns, self.units):
            out.append(f"{c} [{u}]" if u else c)
        return out + [STATUS]

    def body(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header_line())
        for r, s in zip(self.rows, self.statuses):
            w.writerow([format_value(x) for x in r] + [s])
        return buf.getvalue()

    def write_csv(self, path, command: str = "", config: dict | None = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        head = [f"# command: {command}",
                f"# config_sha256: {config_hash(config or {})}",
                f"# version: nhssh {__version__}"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(head) + "\n")
            fh.write(self.body())
        return path


def read_csv_body(path) -> str:
    """CSV text with the ``#`` provenance lines removed."""
    with open(path, encoding="utf-8") as fh:
        return "".join(line for line in fh if not line.startswith("#"))
