"""Experiment configuration: JSON documents with a versioned schema.

Every command reads one JSON object.  Missing keys take the defaults
below, unknown keys are rejected, and the fully resolved document is
emitted with the results.  Model rates that are stored divided by D carry
an ``_over_D`` suffix; the ``rate`` of the branching kernel is likewise
``Q/D``.

Model block::

    {"D": 1.0, "dim": 1,
     "annihilation": {"profile": "normal", "rate": 2.0, "lambda": 1.0},
     "branching":    {"profile": "local", "rate": 0.0, "lambda": 1.0},
     "M_over_D": 0.0, "B_over_D": 0.0, "n0": 1.0}
"""

from __future__ import annotations

import copy
import json
import math

import numpy as np

from .errors import ValidationError
from .kernels import Kernel
from .meanfield import ModelParams

SCHEMA_VERSION = 1

MODEL_DEFAULTS = {
    "D": 1.0,
    "dim": 1,
    "annihilation": {"profile": "normal", "rate": 1.0, "lambda": 1.0},
    "branching": {"profile": "local", "rate": 0.0, "lambda": 1.0},
    "M_over_D": 0.0,
    "B_over_D": 0.0,
    "n0": 1.0,
}

GRID_KEYS = {"min", "max", "n", "spacing", "values"}

DEFAULTS = {
    "kernels": {
        "mode": "table",
        "kernel": {"profile": "normal", "rate": 1.0, "lambda": 1.0, "dim": 1},
        "r": {"min": 0.01, "max": 5.0, "n": 50, "spacing": "linear"},
        "k": {"min": 0.01, "max": 10.0, "n": 50, "spacing": "linear"},
    },
    "meanfield": {
        "model": "model1",
        "params": MODEL_DEFAULTS,
        "t": {"min": 0.0, "max": 100.0, "n": 101, "spacing": "linear"},
        "flipped_annihilation_sign": False,
    },
    "propagator": {
        "kind": "bare",
        "D": 1.0,
        "M_over_D": 0.0,
        "g": 1.0,
        "X": 0.0,
        "n0": 1.0,
        "t1": 0.0,
        "annihilation": {"profile": "normal", "rate": 1.0, "lambda": 1.0},
        "branching": {"profile": "normal", "rate": 0.0, "lambda": 1.0},
        "dim": 1,
        "k": {"min": 0.0, "max": 5.0, "n": 11, "spacing": "linear"},
        "t": {"min": 0.0, "max": 2.0, "n": 5, "spacing": "linear"},
    },
    "loops": {
        "integral": "i2",
        "method": "auto",
        "kernel": {"profile": "normal", "rate": 1.0, "lambda": 1.0, "dim": 1},
        "D": 1.0,
        "n0": 1.0,
        "t": {"values": [0.1, 1.0, 10.0]},
    },
    "rg": {
        "model": "model1",
        "eps": 1.0,
        "g_r": 1.0,
        "u": 0.1,
        "tau": 1.0,
        "X": 1.0,
        "b": 1.0,
        "gamma": {"min": 1e-4, "max": 1.0, "n": 41, "spacing": "log"},
    },
    "simulate": {
        "params": MODEL_DEFAULTS,
        "box": 1000.0,
        "t_max": 100.0,
        "dt": None,
        "seed": 0,
        "replicas": 1,
        "pair_tol": 1e-6,
        "max_particles": 10_000_000,
        "local_lambda": 10.0,
        "record": {"min": 0.1, "max": 100.0, "n": 31, "spacing": "log"},
        "snapshot": None,
    },
    "verify": {"level": "fast"},
}


def _is_grid(default) -> bool:
    return isinstance(default, dict) and bool(default) and set(default) <= GRID_KEYS


def _merge(default, given, path: str):
    name = path or "config"
    if not isinstance(default, dict):
        return copy.deepcopy(given)
    if not isinstance(given, dict):
        raise ValidationError(f"{name} must be an object")
    allowed = GRID_KEYS if _is_grid(default) else set(default)
    unknown = set(given) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in {name}: {sorted(unknown)}")
    if _is_grid(default):
        return copy.deepcopy(given) if "values" in given else {**default, **given}
    return {k: _merge(default[k], given.get(k, default[k]), f"{path}.{k}".lstrip(".")) for k in default}


def resolve(command: str, given: dict | None) -> dict:
    """Merge ``given`` over the command defaults and validate the result."""
    if command not in DEFAULTS:
        raise ValidationError(f"unknown command {command!r}")
    given = dict(given or {})
    version = given.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    given.pop("command", None)
    cfg = _merge(DEFAULTS[command], given, "")
    cfg = {"schema_version": SCHEMA_VERSION, "command": command, **cfg}
    return cfg


def load(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return data


def grid(spec: dict, name: str) -> np.ndarray:
    """Materialise a grid block ``{min, max, n, spacing}`` or ``{values}``."""
    if "values" in spec:
        vals = np.asarray(spec["values"], dtype=float)
        if vals.ndim != 1 or vals.size == 0 or not np.all(np.isfinite(vals)):
            raise ValidationError(f"{name}.values must be a non-empty list of finite numbers")
        return vals
    try:
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["n"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError(f"{name} needs numeric min, max and n") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValidationError(f"{name} must satisfy n >= 1 and min <= max")
    spacing = spec.get("spacing", "linear")
    if spacing == "linear":
        return np.linspace(lo, hi, n)
    if spacing == "log":
        if lo <= 0:
            raise ValidationError(f"{name}: log spacing needs min > 0")
        return np.geomspace(lo, hi, n)
    raise ValidationError(f"{name}.spacing must be 'linear' or 'log'")


def _num(block: dict, key: str, path: str) -> float:
    try:
        v = float(block[key])
    except (TypeError, ValueError):
        raise ValidationError(f"{path}.{key} must be a number") from None
    if not math.isfinite(v):
        raise ValidationError(f"{path}.{key} must be finite")
    return v


def kernel_from(block: dict, dim: float, path: str) -> Kernel:
    b = dict(block)
    b.setdefault("dim", dim)
    if float(b["dim"]) != float(dim):
        raise ValidationError(f"{path}.dim disagrees with the model dimension")
    return Kernel.from_config(b)


def model_from(block: dict, path: str = "params") -> ModelParams:
    d = _num(block, "dim", path)
    return ModelParams(
        D=_num(block, "D", path),
        Rk=kernel_from(block["annihilation"], d, f"{path}.annihilation"),
        Qk=kernel_from(block["branching"], d, f"{path}.branching"),
        M=_num(block, "M_over_D", path),
        B=_num(block, "B_over_D", path),
        n0=_num(block, "n0", path),
        dim=d,
    )
