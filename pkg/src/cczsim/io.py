"""Deterministic file output: CSV at 17 significant digits, sorted JSON, provenance stamps."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__

TOOL = "cczsim"


def config_hash(config: Mapping) -> str:
    """SHA-256 of the canonical JSON form of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def provenance(cfg_hash: str) -> dict:
    return {"tool": TOOL, "version": __version__, "config_hash": cfg_hash}


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _clean(obj):
    """Numpy scalars/arrays to plain JSON types; non-finite floats to None."""
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path: str | Path, payload: Mapping, cfg_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"provenance": provenance(cfg_hash), **_clean(payload)}
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _stamp(cfg_hash: str) -> str:
    return f"# {TOOL} {__version__} config_hash={cfg_hash}\n"


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], cfg_hash: str) -> Path:
    """CSV with a provenance comment line, a header row and LF endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(_stamp(cfg_hash))
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_grid(
    path: str | Path, x_name: str, x: Sequence[float], y_name: str, y: Sequence[float],
    values: np.ndarray, cfg_hash: str,
) -> Path:
    """Matrix CSV: first row holds x values, first column holds y values."""
    values = np.asarray(values)
    header = [f"{y_name}\\{x_name}"] + [fmt(v) for v in x]
    rows = ([yv, *values[i]] for i, yv in enumerate(y))
    return write_table(path, header, rows, cfg_hash)


def write_long(
    path: str | Path, x_name: str, x: Sequence[float], y_name: str, y: Sequence[float],
    values: np.ndarray, value_name: str, cfg_hash: str,
) -> Path:
    """Plot-ready long format: one (x, y, value) row per grid point."""
    values = np.asarray(values)
    rows = ((xv, yv, values[i, j]) for i, yv in enumerate(y) for j, xv in enumerate(x))
    return write_table(path, [x_name, y_name, value_name], rows, cfg_hash)


def write_trajectory(
    path: str | Path, times: Sequence[float], populations: Mapping[str, Sequence[float]], cfg_hash: str
) -> Path:
    """Columns: time_ns, then one population column per basis-state label."""
    labels = list(populations)
    cols = [np.asarray(populations[k]) for k in labels]
    rows = ([t, *(c[i] for c in cols)] for i, t in enumerate(times))
    return write_table(path, ["time_ns", *(f"P_{k}" for k in labels)], rows, cfg_hash)


def write_matrix(path: str | Path, u: np.ndarray, labels: Sequence[str], cfg_hash: str) -> Path:
    """Long-form matrix: row, col, magnitude, real, imag."""
    u = np.asarray(u)
    rows = ((labels[i], labels[j], abs(u[i, j]), u[i, j].real, u[i, j].imag)
            for i in range(u.shape[0]) for j in range(u.shape[1]))
    return write_table(path, ["row", "col", "magnitude", "real", "imag"], rows, cfg_hash)


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]
