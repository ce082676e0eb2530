"""Declarative run description loaded from JSON.

Every section is optional; missing fields take the documented defaults, so a
minimal config only names the dataset. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .agent import AgentConfig
from .baseline import BaselineConfig
from .data import DatasetSpec, SynthConfig
from .environment import EnvConfig
from .metrics import BPS_DENOMINATORS
from .rewards import RewardConfig

MODELS = ("dqn", "nn")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    model: str = "dqn"
    name: str | None = None
    fraud_bps_denominator: str = "all"
    out_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.fraud_bps_denominator not in BPS_DENOMINATORS:
            raise ConfigError(f"fraud_bps_denominator must be one of {BPS_DENOMINATORS}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    @property
    def label(self):
        """Row name used in comparison tables."""
        if self.name:
            return self.name
        if self.model == "nn":
            return "NN"
        return {"combined": "DQNR", "rprime": "DQNR'", "rdouble": "DQNR''"}[self.reward.kind]

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        if sub is not None and value is not None:
            value = _build(sub, value, f"{where}.{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_NESTED = {
    (RunConfig, "dataset"): DatasetSpec,
    (RunConfig, "env"): EnvConfig,
    (RunConfig, "agent"): AgentConfig,
    (RunConfig, "reward"): RewardConfig,
    (RunConfig, "baseline"): BaselineConfig,
    (DatasetSpec, "synth"): SynthConfig,
}


def config_from_dict(data):
    return _build(RunConfig, data, "config")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def with_overrides(config, **changes):
    """Copy of ``config`` with top-level or ``section.field`` overrides."""
    data = config.to_dict()
    for key, value in changes.items():
        target = data
        *parents, last = key.split(".")
        for p in parents:
            target = target[p]
        target[last] = value
    return config_from_dict(data)
