"""CSV and JSON writers.

All floats are written with 17 significant digits so files round-trip
binary doubles and reruns are byte-identical.
"""
from __future__ import annotations

import json
from pathlib import Path as FsPath

import numpy as np

from .errors import ConfigurationError
from .paths import Path
from .utils import format_float as _f

__all__ = [
    "write_path_csv",
    "read_path_csv",
    "write_om_json",
    "write_manifest",
    "write_csv",
]


def write_path_csv(path: Path, dest) -> None:
    """Path as CSV: header ``t,u_-n,...,u_n``, one row per grid point."""
    n = (path.d - 1) // 2
    header = "t," + ",".join(f"u_{i}" for i in range(-n, n + 1))
    lines = [header]
    for t, row in zip(path.times, path.states):
        lines.append(",".join([_f(t)] + [_f(v) for v in row]))
    FsPath(dest).write_text("\n".join(lines) + "\n")


def read_path_csv(src) -> Path:
    """Read a path written by :func:`write_path_csv`."""
    p = FsPath(src)
    if not p.exists():
        raise ConfigurationError(f"no such path file: {p}")
    lines = p.read_text().strip().splitlines()
    header = lines[0].split(",")
    if header[0] != "t" or len(header) < 2:
        raise ConfigurationError(f"{p}: not a path CSV (header {lines[0]!r})")
    data = np.array([[float(tok) for tok in line.split(",")] for line in lines[1:]])
    if data.shape[0] < 2:
        raise ConfigurationError(f"{p}: need at least two grid rows")
    dt = data[1, 0] - data[0, 0]
    return Path(times=data[:, 0], states=data[:, 1:], dt=dt, meta={"source": str(p)})


def write_om_json(report, dest) -> None:
    FsPath(dest).write_text(json.dumps(report.as_dict(), indent=2) + "\n")


def write_manifest(out_dir, payload: dict) -> None:
    """Manifest written before any computation output; rewritten with the
    wall-clock once the run finishes."""
    FsPath(out_dir, "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(dest, header: str, rows) -> None:
    """Rows of floats/ints under a fixed header."""
    lines = [header]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else _f(float(v)) for v in row))
    FsPath(dest).write_text("\n".join(lines) + "\n")
