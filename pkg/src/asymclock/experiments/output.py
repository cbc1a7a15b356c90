"""Result rows, CSV output and run manifests."""

from __future__ import annotations

import csv
import json
import math
import subprocess
from dataclasses import dataclass, fields
from importlib import metadata
from pathlib import Path

ROW_COLUMNS = ("x_name", "x", "series", "method", "metric", "value", "stderr")


@dataclass(frozen=True)
class Row:
    x_name: str
    x: float | str
    series: str
    method: str
    metric: str
    value: float
    stderr: float = float("nan")


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return v


def write_rows(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f.name)) for f in fields(Row)])
    return path


def read_rows(path) -> list[Row]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            x = rec["x"]
            try:
                x = float(x)
            except ValueError:
                pass
            out.append(Row(rec["x_name"], x, rec["series"], rec["method"], rec["metric"],
                           float(rec["value"]), float(rec["stderr"])))
    return out


def version_string() -> str:
    """Package version, plus ``git describe`` output when run from a checkout."""
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0+unknown"
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                              text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{base}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return base


def write_manifest(path, *, command: str, seed, config: dict, wall_time: float, outputs=(),
                   error: str | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "seed": seed,
        "config": config,
        "version": version_string(),
        "wall_time_s": round(wall_time, 3),
        "outputs": [str(p) for p in outputs],
        "status": "error" if error else "ok",
    }
    if error:
        doc["error"] = error
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path
