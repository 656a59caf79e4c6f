"""Layered scenario configuration: preset, then YAML file, then dotted overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .channel import PhyParams
from .mobility import MobilityParams, Room
from .sim import ScenarioConfig, preset
from .solver.mvr import SolverConfig

PRESETS = ("room2ap", "room4ap")
OUTPUT_ENV = "VLCMVR_OUTPUT_DIR"

_NESTED = {"room": Room, "phy": PhyParams, "mobility": MobilityParams, "solver": SolverConfig}


class ConfigError(ValueError):
    """Invalid or unreadable configuration; the CLI maps it to exit code 2."""


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def parse_value(text: str) -> Any:
    """Interpret a command-line override with YAML scalar rules (ints, floats, bools, lists)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from None


def set_dotted(tree: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a scalar")
    node[parts[-1]] = value


def read_file(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return data


def _merge(base: dict, extra: Mapping) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(dict(out[k]), v)
        else:
            out[k] = v
    return out


def _build(kind, value, name: str):
    if isinstance(value, kind):
        return value
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name} must be a mapping")
    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"unknown {name} field(s): {', '.join(sorted(unknown))}")
    try:
        return kind(**value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def scenario_from_dict(data: Mapping) -> ScenarioConfig:
    """Build a ScenarioConfig from a plain mapping; ``scenario`` names the base preset."""
    data = dict(data)
    name = data.pop("scenario", "room2ap")
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; choose one of {', '.join(PRESETS)}")
    base = preset(name)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    merged = {}
    for key, value in data.items():
        if key in _NESTED and isinstance(value, Mapping):
            current = dataclasses.asdict(getattr(base, key))
            value = _build(_NESTED[key], _merge(current, value), key)
        merged[key] = value
    try:
        return base.replace(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike | None = None, scenario: str | None = None,
                overrides: Mapping[str, Any] | None = None) -> ScenarioConfig:
    """Resolve preset -> file -> overrides. Override keys are dotted field paths."""
    data: dict = {}
    if path is not None:
        data = read_file(path)
    if scenario is not None:
        data["scenario"] = scenario
    for key, value in (overrides or {}).items():
        set_dotted(data, key, value)
    return scenario_from_dict(data)


def resolved(cfg: ScenarioConfig) -> dict:
    """JSON-friendly view of every resolved field."""

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
        if hasattr(v, "value"):  # enums
            return v.value
        return v

    return clean(cfg.to_dict())


def config_digest(cfg: ScenarioConfig) -> str:
    blob = json.dumps(resolved(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
