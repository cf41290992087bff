"""Run configuration: built-in defaults, an optional TOML file, then flags."""
from __future__ import annotations

import copy
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigError

ENV_VAR = "PHOTOSTYLE_CONFIG"

DEFAULTS = {
    "fetch": {
        "source": "",
        "max_photos": 100,
        "rate": 5.0,
        "retries": 3,
        "timeout": 10.0,
    },
    "detect": {
        "cascade": "",
        "scale_factor": 1.1,
        "step_fraction": 0.05,
        "min_size": 24,
        "overlap_threshold": 0.3,
        "min_neighbors": 3,
        "sample_fraction": 0.1,
    },
    "train": {
        "input_size": 24,
        "channels": [4, 8],
        "learning_rate": 0.05,
        "momentum": 0.9,
        "batch_size": 16,
        "weight_decay": 0.0,
        "base_iterations": 500,
        "initial_iterations": 100_000,
        "bootstrap_iterations": 20_000,
        "freeze_prefix": 0,
        "confidence_threshold": 0.9,
        "train_fraction": 61 / 78,
        "folds": 5,
    },
    "analyze": {
        "exclude_self": False,
        "level": 0.95,
    },
}


def _coerce(section: str, key: str, value, default):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    if isinstance(default, int):
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(default, list):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        try:
            return [int(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a list of integers, got {value!r}") from None
    return str(value)


@dataclass
class RunConfig:
    sections: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    seed: int = 0
    jobs: int = 1
    output_dir: str = "."
    dry_run: bool = False
    source: str | None = None

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def update(self, section: str, values: dict):
        """Apply overrides, ignoring ``None`` (flag not given)."""
        if section not in self.sections:
            raise ConfigError(f"unknown config section [{section}]")
        defaults = DEFAULTS[section]
        for key, value in values.items():
            if value is None:
                continue
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            self.sections[section][key] = _coerce(section, key, value, defaults[key])

    def echo(self) -> str:
        """Effective configuration as TOML text, for run reports; loadable with ``load_config``."""
        lines = [f"# source: {self.source or 'defaults'}", f"# dry run: {json.dumps(self.dry_run)}",
                 f"seed = {self.seed}", f"jobs = {self.jobs}", f"output_dir = {json.dumps(self.output_dir)}"]
        for name, values in self.sections.items():
            lines.append(f"\n[{name}]")
            lines += [f"{k} = {json.dumps(v)}" for k, v in values.items()]
        return "\n".join(lines) + "\n"


def resolve_path(explicit: str | None) -> Path | None:
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else None


def load_config(path=None) -> RunConfig:
    """Defaults, overlaid by ``path`` (or ``$PHOTOSTYLE_CONFIG`` when ``path`` is None)."""
    cfg = RunConfig()
    p = resolve_path(path)
    if p is None:
        return cfg
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    for key in ("seed", "jobs", "output_dir"):
        if key in data:
            setattr(cfg, key, _coerce("global", key, data.pop(key), getattr(cfg, key)))
    for section, values in data.items():
        if not isinstance(values, dict):
            raise ConfigError(f"{p}: unknown top-level key {section!r}")
        cfg.update(section, values)
    cfg.source = str(p)
    return cfg
