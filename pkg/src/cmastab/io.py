"""Persistence: CSV tables, JSON summaries, raw field snapshots, flat configs."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .grid import Grid, PotentialField

OUTPUT_ENV = "CMASTAB_OUTPUT_ROOT"
DEFAULT_ROOT = "cmastab_output"


class ConfigError(ValueError):
    pass


# --- plain values --------------------------------------------------------------


def to_plain(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to JSON types.

    Non-finite floats become the strings "inf", "-inf", "nan" so the output
    stays strict JSON.
    """
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def output_dir(explicit: str | None, command: str) -> Path:
    """Explicit directory, else $CMASTAB_OUTPUT_ROOT/<command>, else ./cmastab_output/<command>."""
    if explicit:
        path = Path(explicit)
    else:
        path = Path(os.environ.get(OUTPUT_ENV, DEFAULT_ROOT)) / command
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def _cell(v):
    v = to_plain(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, rows, columns=None) -> Path:
    """One row per dict; floats written with repr so they round-trip exactly."""
    rows = [to_plain(r) for r in rows]
    if columns is None:
        columns = list(rows[0]) if rows else []
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def summary(config: dict, payload: dict) -> dict:
    """Summary document: resolved config, artifact version, results."""
    return {"artifact_version": __version__, "config": to_plain(config), "results": to_plain(payload)}


# --- fields ----------------------------------------------------------------------


def write_field(stem, field: PotentialField, extra: dict | None = None) -> tuple[Path, Path]:
    """Little-endian float64 dump in C order plus a JSON sidecar."""
    stem = Path(stem)
    data = stem.with_suffix(".f64")
    side = stem.with_suffix(".json")
    np.ascontiguousarray(field.values, dtype="<f8").tofile(data)
    meta = {
        "dtype": "float64-le",
        "order": "C",
        "shape": list(field.values.shape),
        "axes": ["x1", "y1", "x2", "y2"],
        "N": field.grid.N,
        "n": field.grid.n,
        "tag": field.tag,
        "artifact_version": __version__,
    }
    if extra:
        meta.update(to_plain(extra))
    write_json(side, meta)
    return data, side


def read_field(stem) -> tuple[PotentialField, dict]:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    values = np.fromfile(stem.with_suffix(".f64"), dtype="<f8").reshape(meta["shape"])
    grid = Grid(meta["N"], meta["n"])
    return PotentialField(values, grid, meta.get("tag", "raw")), meta


# --- configs -----------------------------------------------------------------------


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; values parsed as JSON when possible."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = _parse_value(val)
    return out


def load_config(path) -> dict:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def parse_json_override(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad JSON override: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("JSON override must be an object")
    return {k.replace("-", "_"): v for k, v in obj.items()}
