"""Experiment configuration: YAML files, dotted overrides and validation.

A configuration is a nested mapping. Every experiment ships a complete
default tree; user files and ``--set key=value`` overrides may only touch
keys that already exist there, and each value must have the default's type
(ints are accepted where floats are expected). Errors name the offending
field by its dotted path.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

DEFAULT_SEED = 12345


class ConfigError(ValueError):
    """Invalid configuration; the message carries the field path."""


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    trials: int
    seed: int = DEFAULT_SEED
    out: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials: must be an integer >= 1, got {self.trials!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers: must be an integer >= 1, got {self.workers!r}")

    def get(self, dotted: str):
        node = self.params
        for part in dotted.split("."):
            node = node[part]
        return node

    def to_dict(self) -> dict:
        """Plain echo of the run, without the output directory or worker count."""
        return {"experiment": self.experiment, "seed": self.seed,
                "trials": self.trials, "params": copy.deepcopy(self.params)}


def _type_name(v) -> str:
    return type(v).__name__


def _check_value(path: str, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            # fractions like 1/4 arrive as strings, plain numbers do not
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return str(value)
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        if default and not isinstance(default[0], dict):
            proto = default[0]
            return [_check_value(f"{path}[{i}]", proto, v) for i, v in enumerate(value)]
        if default:
            return [merge(default[0], v, f"{path}[{i}]", partial_ok=False)
                    for i, v in enumerate(value)]
        return value
    if isinstance(default, dict):
        return merge(default, value, path)
    if default is None:
        return value
    raise ConfigError(f"{path}: unsupported default type {_type_name(default)}")


def merge(defaults: dict, overrides, path: str = "", partial_ok: bool = True) -> dict:
    """Overlay ``overrides`` on a deep copy of ``defaults`` with type checks.

    List-of-mapping entries are merged against the first default entry, so
    a user may list targets or schemes with only some keys spelled out.
    """
    if not isinstance(overrides, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping, got {overrides!r}")
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            allowed = ", ".join(sorted(defaults)) or "<none>"
            raise ConfigError(f"{where}: unknown field (allowed: {allowed})")
        out[key] = _check_value(where, defaults[key], value)
    return out


def parse_assignment(text: str) -> tuple[list[str], object]:
    """Split ``a.b.c=value``; the value is parsed as YAML (``1/4`` stays a string)."""
    if "=" not in text:
        raise ConfigError(f"--set {text!r}: expected key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not p for p in key.split(".")):
        raise ConfigError(f"--set {text!r}: empty key component")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"--set {key}: cannot parse value {raw!r}: {exc}") from None
    return key.split("."), value


def nest(parts: list[str], value) -> dict:
    node = value
    for p in reversed(parts):
        node = {p: node}
    return node


def deep_update(base: dict, extra: dict) -> dict:
    """Recursive dict union, ``extra`` winning; used to stack override sources."""
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_update(out[k], v)
        else:
            out[k] = v
    return out


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


RUN_KEYS = ("seed", "trials", "workers")


def build_config(experiment: str, defaults: dict, default_trials: int,
                 file_data: dict | None = None, assignments=(), seed=None,
                 trials=None, out=None) -> ExperimentConfig:
    """Resolve defaults < file < ``--set`` < explicit flags.

    ``seed``, ``trials`` and ``workers`` may appear at the top level of the
    file or in ``--set``; everything else lives under the experiment's
    parameter tree.
    """
    raw = dict(file_data or {})
    for text in assignments:
        parts, value = parse_assignment(text)
        raw = deep_update(raw, nest(parts, value))
    run = {k: raw.pop(k) for k in RUN_KEYS if k in raw}
    if "experiment" in raw:
        named = raw.pop("experiment")
        if named != experiment:
            raise ConfigError(f"experiment: file is for {named!r}, running {experiment!r}")
    params = merge(defaults, raw.pop("params", {}) if "params" in raw else {}, "params")
    params = merge(defaults, deep_update(params, raw), "params") if raw else params
    if seed is not None:
        run["seed"] = seed
    if trials is not None:
        run["trials"] = trials
    for k in RUN_KEYS:
        if k in run and (isinstance(run[k], bool) or not isinstance(run[k], int)):
            raise ConfigError(f"{k}: expected an integer, got {run[k]!r}")
    return ExperimentConfig(
        experiment, params,
        trials=run.get("trials", default_trials),
        seed=run.get("seed", DEFAULT_SEED),
        out=Path(out) if out is not None else None,
        workers=run.get("workers", 1),
    )
