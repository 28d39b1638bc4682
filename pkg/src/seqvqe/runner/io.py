"""CSV tables and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .. import __version__

MANIFEST_NAME = "manifest.json"


def format_value(x) -> str:
    """Stable text for one CSV cell; floats keep 17 significant digits."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(tuple(values))

    def render(self) -> bytes:
        lines = [",".join(self.columns)]
        lines += [",".join(format_value(v) for v in row) for row in self.rows]
        return ("\n".join(lines) + "\n").encode("ascii")

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def read_csv(path: str | Path) -> list[dict[str, str]]:
    import csv

    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_outputs(
    out_dir: str | Path,
    command: str,
    config_snapshot: dict,
    seed: int,
    tables: Sequence[Table],
    summary: dict | None = None,
    started: datetime | None = None,
) -> Path:
    """Write the manifest, then every table, and return the manifest path.

    The manifest carries the checksum of each data file, so it is composed
    in memory first and written exactly once, ahead of the data.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payloads = {t.name: t.render() for t in tables}
    manifest = {
        "command": command,
        "code_version": __version__,
        "python": platform.python_version(),
        "seed": seed,
        "started_utc": (started or datetime.now(timezone.utc)).isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "config": _jsonable(config_snapshot),
        "outputs": {name: {"sha256": sha256(data), "bytes": len(data)} for name, data in payloads.items()},
        "summary": _jsonable(summary or {}),
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name, data in payloads.items():
        (out / name).write_bytes(data)
    return path


def verify_outputs(out_dir: str | Path) -> dict[str, bool]:
    """Recompute data checksums against the manifest."""
    out = Path(out_dir)
    manifest = json.loads((out / MANIFEST_NAME).read_text())
    return {
        name: sha256((out / name).read_bytes()) == meta["sha256"]
        for name, meta in manifest["outputs"].items()
    }


