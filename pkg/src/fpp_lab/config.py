"""Flat YAML run configs: schema, validation and override precedence (CLI beats file)."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from . import distributions as dists
from .estimators import RunConfig

RUN_KEYS = {f.name for f in fields(RunConfig)}
OPTION_KEYS = {
    "sizes": list,          # variance-scaling
    "n_range": list,        # animals
    "beta_grid": list,      # animals
    "animal_replicas": int,
    "animal_method": str,
    "checks": list,         # verify-lemmas
    "suite_seed": int,
    "entropy_lambdas": list,
}
ALIASES = {"seed": "master_seed"}


class ConfigError(ValueError):
    """Bad key, bad value or missing field; the message names the key."""


@dataclass(frozen=True)
class ResolvedConfig:
    run: RunConfig | None
    options: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = dict(self.options)
        if self.run is not None:
            out.update(self.run.echo())
        return out


def load_file(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML ({exc})") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a key-value mapping")
    return data


def _normalise(raw: dict, where: str) -> dict:
    out = {}
    for key, value in raw.items():
        key = ALIASES.get(key, key)
        if key not in RUN_KEYS and key not in OPTION_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        out[key] = value
    return out


def parse_config(path=None, overrides: dict | None = None, require_run: bool = True) -> ResolvedConfig:
    """Merge the file (if any) with ``overrides`` and validate.

    ``require_run=False`` lets suite-only subcommands run without ``d``/``x``/``dist``.
    """
    merged = _normalise(load_file(path), str(path)) if path is not None else {}
    merged.update(_normalise({k: v for k, v in (overrides or {}).items() if v is not None}, "override"))
    options = {k: merged.pop(k) for k in list(merged) if k in OPTION_KEYS}
    for key, kind in OPTION_KEYS.items():
        if key in options and not isinstance(options[key], kind):
            raise ConfigError(f"{key}: expected {kind.__name__}")
    if not merged and not require_run:
        return ResolvedConfig(None, options)
    for key in ("dist", "d", "x"):
        if key not in merged:
            if not require_run:
                return ResolvedConfig(None, options)
            raise ConfigError(f"missing required key {key!r}")
    try:
        dists.from_spec(merged["dist"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"dist: {exc}") from exc
    try:
        run = RunConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid run config: {exc}") from exc
    return ResolvedConfig(run, options)


def dump_config(resolved: ResolvedConfig | RunConfig) -> str:
    data = resolved.echo()
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=None)
