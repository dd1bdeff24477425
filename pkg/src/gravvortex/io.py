"""Configuration schema, validation with located errors, and deterministic writers."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .geometry import ScalarField, SurfaceGrid

COMMANDS = ("vortex", "gravitate", "eb", "classify", "reduce-check", "sweep")

_number = {"type": "number"}
_point = {"oneOf": [{"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                    {"type": "string", "enum": ["inf"]}]}

DIVISOR_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "points": {"type": "array", "items": _point, "minItems": 1},
                "multiplicities": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                   "minItems": 1},
            },
            "required": ["points", "multiplicities"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "random": {
                    "type": "object",
                    "properties": {"multiplicities": {"type": "array", "minItems": 1,
                                                      "items": {"type": "integer", "minimum": 1}}},
                    "required": ["multiplicities"],
                    "additionalProperties": False,
                }
            },
            "required": ["random"],
            "additionalProperties": False,
        },
    ]
}

SURFACE_SCHEMA = {
    "type": "object",
    "properties": {
        "genus": {"type": "integer", "enum": [0, 1]},
        "resolution": {"type": "integer", "minimum": 1},
        "modulus": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "volume": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["genus", "resolution"],
    "additionalProperties": False,
}

_RUN_PROPERTIES = {
    "command": {"type": "string", "enum": list(COMMANDS)},
    "surface": SURFACE_SCHEMA,
    "divisor": DIVISOR_SCHEMA,
    "formal_density": {"type": "number", "minimum": 0},
    "tau": {"type": "number", "exclusiveMinimum": 0},
    "alpha": _number,
    "initial_step": {"type": "number", "exclusiveMinimum": 0},
    "kernel_projection": {"type": "boolean"},
    "target_volume": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "c_prime": _number,
    "c_prime_policy": {"type": "string", "enum": ["volume", "fixed"]},
    "tolerance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-4},
    "max_iterations": {"type": "integer", "minimum": 1},
    "compare_radial": {"type": "boolean"},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gravvortex run configuration",
    "type": "object",
    "properties": dict(_RUN_PROPERTIES, sweep={
        "type": "object",
        "properties": {
            "command": {"type": "string", "enum": ["vortex", "gravitate", "eb", "classify",
                                                   "reduce-check"]},
            "base": {"type": "object"},
            "tau": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            "alpha": {"type": "array", "items": _number},
            "volume": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            "divisors": {"type": "array", "items": DIVISOR_SCHEMA},
        },
        "required": ["command", "base"],
        "additionalProperties": False,
    }),
    "additionalProperties": False,
}


def _locate(text: str, path) -> int | None:
    """Best-effort line number of the JSON member addressed by ``path``."""
    pos = 0
    line = None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if not m:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def validate_config(config: dict, text: str | None = None) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            field = "/".join(str(p) for p in err.absolute_path) or "<root>"
            line = _locate(text, err.absolute_path) if text else None
            where = f"line {line}, " if line else ""
            msgs.append(f"{where}field '{field}': {err.message}")
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(msgs))
    return config


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise ConfigurationError("configuration must be a JSON object")
    return validate_config(config, text)


def fmt(x: float) -> str:
    return "%.17g" % x


def field_csv(path: Path, grid: SurfaceGrid, columns: dict) -> Path:
    """Write node coordinates and named field columns with round-trip precision."""
    nodes = grid.nodes.reshape(-1, 2)
    names = ("theta", "phi") if grid.genus == 0 else ("x1", "x2")
    cols = []
    for name, val in columns.items():
        arr = val.values if isinstance(val, ScalarField) else np.asarray(val)
        cols.append(arr.reshape(-1))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(names) + list(columns))
    for i in range(nodes.shape[0]):
        w.writerow([fmt(nodes[i, 0]), fmt(nodes[i, 1])] + [fmt(c[i]) for c in cols])
    path.write_text(buf.getvalue())
    return path


def table_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue())
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        if math.isinf(abs(obj)):
            return "inf"
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
