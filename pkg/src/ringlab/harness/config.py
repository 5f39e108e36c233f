"""Experiment configuration: one JSON document plus dotted-key overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

EXPERIMENTS = ("symmetry", "sweep-delta", "bracket", "audit", "nonuniqueness")

DEFAULTS = {
    "geometry": {"n": 2, "R": 2.0, "delta": 0.0, "mode": "auto"},
    "grid": {"kind": "auto", "m_s": 128, "m_theta": 128},
    "nonlinearity": {"family": "zero", "c": 0.0, "table_path": None},
    "solver": {"dt": "auto", "tol": 1e-8, "max_steps": 1_000_000, "scheme": "imex"},
    "barrier": {"lambda": "auto"},
    "correction": {"a0": 1.0, "K": "auto"},
    "boundary": {"g_in": 1.0, "g_out": -1.0},
    "delta_list": [0.01, 0.02, 0.04, 0.08],
    "output_dir": "ringlab-out",
    "seed": 0,
    "svg": True,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    geometry: dict
    grid: dict
    nonlinearity: dict
    solver: dict
    barrier: dict
    correction: dict
    boundary: dict
    delta_list: list
    output_dir: str
    seed: int
    svg: bool

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}


def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        name = f"{prefix}{key}"
        if key not in base and not (prefix == "" and key == "experiment"):
            raise ConfigError(f"unknown field: {name}")
        if isinstance(base.get(key), dict):
            if not isinstance(val, dict):
                raise ConfigError(f"invalid value for {name}: expected an object")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip().split("."), val


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        path, val = parse_override(item)
        node = doc
        for p in path[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"invalid override {item!r}: {p} is not an object")
        node[path[-1]] = val
    return doc


def _number(name, val, positive=False, integer=False):
    ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    if integer:
        ok = isinstance(val, int) and not isinstance(val, bool)
    if not ok:
        raise ConfigError(f"invalid value for {name}: {val!r} is not a number")
    if positive and not val > 0:
        raise ConfigError(f"invalid value for {name}: must be positive, got {val!r}")
    return val


def validate_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "experiment" not in doc:
        raise ConfigError("missing field: experiment")
    exp = doc["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"invalid value for experiment: {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    body = {k: v for k, v in doc.items() if k != "experiment"}
    merged = _merge(DEFAULTS, body)

    geo = merged["geometry"]
    n = _number("geometry.n", geo["n"], integer=True)
    if n not in (2, 3):
        raise ConfigError(f"invalid value for geometry.n: {n}; expected 2 or 3")
    R = _number("geometry.R", geo["R"])
    if not R > 1:
        raise ConfigError(f"invalid value for geometry.R: must exceed 1, got {R}")
    d = _number("geometry.delta", geo["delta"])
    if not 0 <= d < (R - 1) / 2:
        raise ConfigError(f"invalid value for geometry.delta: must lie in [0, (R-1)/2), got {d}")
    if geo["mode"] not in ("auto", "concentric", "shifted-2d", "shifted-axisym-3d"):
        raise ConfigError(f"invalid value for geometry.mode: {geo['mode']!r}")

    grid = merged["grid"]
    if grid["kind"] not in ("auto", "radial-1d", "polar-2d", "mapped-2d", "axisym-3d"):
        raise ConfigError(f"invalid value for grid.kind: {grid['kind']!r}")
    for key in ("m_s", "m_theta"):
        v = _number(f"grid.{key}", grid[key], integer=True)
        if v < 4:
            raise ConfigError(f"invalid value for grid.{key}: must be >= 4, got {v}")

    nl = merged["nonlinearity"]
    if nl["family"] not in ("zero", "quad-exp", "user-table"):
        raise ConfigError(f"invalid value for nonlinearity.family: {nl['family']!r}")
    if nl["family"] == "quad-exp":
        _number("nonlinearity.c", nl["c"], positive=True)
    if nl["family"] == "user-table" and not nl["table_path"]:
        raise ConfigError("missing field: nonlinearity.table_path")

    sol = merged["solver"]
    if sol["dt"] != "auto":
        _number("solver.dt", sol["dt"], positive=True)
    _number("solver.tol", sol["tol"], positive=True)
    _number("solver.max_steps", sol["max_steps"], positive=True, integer=True)
    if sol["scheme"] not in ("imex", "picard"):
        raise ConfigError(f"invalid value for solver.scheme: {sol['scheme']!r}")

    lam = merged["barrier"]["lambda"]
    if lam != "auto":
        _number("barrier.lambda", lam)
        if not lam < -(n - 1):
            raise ConfigError(f"invalid value for barrier.lambda: must be < -(n-1) = {-(n - 1)}")
    _number("correction.a0", merged["correction"]["a0"], positive=True)
    K = merged["correction"]["K"]
    if K != "auto":
        _number("correction.K", K, positive=True, integer=True)

    b = merged["boundary"]
    _number("boundary.g_in", b["g_in"])
    _number("boundary.g_out", b["g_out"])
    if not b["g_in"] > 0 > b["g_out"]:
        raise ConfigError("invalid value for boundary: need g_in > 0 > g_out for a free boundary")

    dl = merged["delta_list"]
    if not isinstance(dl, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in dl):
        raise ConfigError("invalid value for delta_list: expected a list of numbers")
    if any(x <= 0 for x in dl):
        raise ConfigError("invalid value for delta_list: entries must be positive (delta = 0 is the reference)")
    if any(b2 <= a for a, b2 in zip(dl, dl[1:])):
        raise ConfigError("invalid value for delta_list: must be strictly increasing")
    if any(x >= (R - 1) / 2 for x in dl):
        raise ConfigError(f"invalid value for delta_list: entries must be < (R-1)/2 = {(R - 1) / 2}")
    if exp == "sweep-delta" and len(dl) < 3:
        raise ConfigError("invalid value for delta_list: sweep needs at least 3 entries")
    if exp == "bracket" and not d > 0:
        raise ConfigError("invalid value for geometry.delta: bracket needs delta > 0")

    if not isinstance(merged["output_dir"], str) or not merged["output_dir"]:
        raise ConfigError("invalid value for output_dir: expected a non-empty path")
    _number("seed", merged["seed"], integer=True)
    if not isinstance(merged["svg"], bool):
        raise ConfigError("invalid value for svg: expected true or false")

    return ExperimentConfig(experiment=exp, **merged)


def load_config(path=None, overrides=(), experiment: str | None = None) -> ExperimentConfig:
    """Read a JSON config (an empty file counts as {}), apply overrides, validate."""
    doc = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if text.strip():
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = apply_overrides(doc, overrides)
    if experiment is not None:
        if "experiment" in doc and doc["experiment"] != experiment:
            raise ConfigError(
                f"experiment mismatch: command line says {experiment!r}, config says {doc['experiment']!r}")
        doc["experiment"] = experiment
    return validate_config(doc)
