"""Experiment configuration: JSON round-trip and path-independent hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from ..errors import ConfigError

PHASES = ("explore", "train", "eval", "coverage", "report")


@dataclass
class ExperimentConfig:
    phase: str
    env: str | None = None
    method: str | None = None
    algo: str | None = None
    steps: int | None = None
    seed: int | None = None
    reward: str | None = None
    episodes: int | None = None
    hyperparams: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    # content hashes of input artifacts; part of the hash, unlike their paths
    input_hashes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ConfigError(f"unknown phase {self.phase!r}")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self):
        payload = {k: v for k, v in self.to_dict().items() if k not in ("inputs", "outputs")}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data
