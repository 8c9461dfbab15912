"""Run configuration: flat key = value text files, CLI overrides, hashing.

The format is deliberately plain: one ``key = value`` pair per line,
repeated keys for list-valued settings, ``#`` comments.  The configuration
hash covers every semantically meaningful field (everything except the
output path), so reruns can be matched to their settings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .exceptions import ConfigError

COMMANDS = ("mvn-risk", "gp-risk", "gp-improvement", "mvn-grid", "check-invariance")


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 20240901
    n_samples: int = 1 << 20
    shards: int = 1
    n_range: tuple = ()
    predictors: tuple = ()
    design_file: str | None = None
    dataset_file: str | None = None
    dim: int = 2
    beta: tuple = ()
    sigma_y: float = 1.0
    lengthscale: float = 1.0
    grid_center: str = "mean"
    grid_halfwidth: float = 5.0
    grid_resolution: int = 201
    out: str = "results"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.grid_center not in ("mean", "origin"):
            raise ConfigError("grid_center must be 'mean' or 'origin'")
        if self.n_samples < 2:
            raise ConfigError("samples must be at least 2")
        if self.shards < 1:
            raise ConfigError("shards must be at least 1")


_SCALAR_KEYS = {
    "seed": ("seed", int),
    "samples": ("n_samples", int),
    "shards": ("shards", int),
    "design_file": ("design_file", str),
    "dataset_file": ("dataset_file", str),
    "dim": ("dim", int),
    "sigma_y": ("sigma_y", float),
    "lengthscale": ("lengthscale", float),
    "grid_center": ("grid_center", str),
    "grid_halfwidth": ("grid_halfwidth", float),
    "grid_resolution": ("grid_resolution", int),
    "out": ("out", str),
}

_LIST_KEYS = {
    "n": ("n_range", int),
    "predictor": ("predictors", str),
    "beta": ("beta", float),
}


def parse_config(text: str, command: str | None = None, source: str = "<config>") -> RunConfig:
    """Parse flat key = value text into a RunConfig.

    ``command`` may come from the command line (the subcommand name); a
    ``command`` key inside the file must agree with it if both are given.
    """
    scalars: dict = {}
    lists: dict = {}
    file_command = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for key {key!r}")
        if key == "command":
            file_command = value
            continue
        if key in _SCALAR_KEYS:
            name, conv = _SCALAR_KEYS[key]
            if name in scalars:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            try:
                scalars[name] = conv(value)
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: invalid value {value!r} for {key!r}")
        elif key in _LIST_KEYS:
            name, conv = _LIST_KEYS[key]
            try:
                lists.setdefault(name, []).append(conv(value))
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: invalid value {value!r} for {key!r}")
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    if command is None:
        command = file_command
    elif file_command is not None and file_command != command:
        raise ConfigError(
            f"{source}: config is for command {file_command!r}, invoked as {command!r}")
    if command is None:
        raise ConfigError(f"{source}: no command given")
    kwargs = dict(scalars)
    kwargs.update({k: tuple(v) for k, v in lists.items()})
    try:
        return RunConfig(command=command, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}")


def load_config(path, command: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(), command=command, source=str(path))


def apply_overrides(config: RunConfig, out=None, seed=None, samples=None, shards=None) -> RunConfig:
    updates = {}
    if out is not None:
        updates["out"] = out
    if seed is not None:
        updates["seed"] = int(seed)
    if samples is not None:
        updates["n_samples"] = int(samples)
    if shards is not None:
        updates["shards"] = int(shards)
    return replace(config, **updates) if updates else config


def config_hash(config: RunConfig) -> str:
    """Hash of the semantically meaningful fields (the output path is not one)."""
    parts = [f"{name}={getattr(config, name)!r}"
             for name in sorted(config.__dataclass_fields__) if name != "out"]
    digest = hashlib.sha256("\n".join(parts).encode()).hexdigest()
    return digest[:16]
