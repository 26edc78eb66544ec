"""Run configuration: default hyperparameters, JSON file + flag overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

from .errors import UsageError


@dataclass
class RunConfig:
    data: str | None = None
    features: str | None = None
    outdir: str = "out"
    kind: str = "k-ring"
    k: int = 3
    P: int = 100
    d: int = 32
    heads: int = 4
    layers: int = 2
    window: int = 3
    lr: float = 1e-3
    weight_decay: float = 5e-4
    dropout: float = 0.2
    epochs: int = 300
    Q: int = 1
    seed: int = 0
    n_seeds: int = 5
    mode: str = "link"
    jobs: int = 1

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.n_seeds)]

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, value):
    f = _FIELDS[key]
    if f.type in ("str | None", "str"):
        if value is not None and not isinstance(value, str):
            raise UsageError(f"config key {key!r} expects a string, got {value!r}")
        return value
    if f.type == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise UsageError(f"config key {key!r} expects an integer, got {value!r}")
        return value
    if f.type == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise UsageError(f"config key {key!r} expects a number, got {value!r}")
        return float(value)
    return value


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a flat JSON object, then apply overrides; unknown keys are rejected."""
    merged: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise UsageError("config file must contain a flat JSON object")
        merged.update(loaded)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - set(_FIELDS))
    if unknown:
        raise UsageError(
            f"unknown config key(s) {unknown}; valid keys: {sorted(_FIELDS)}"
        )
    return RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
