"""Experiment configuration: strict JSON <-> dataclass round trip."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

ALGORITHMS = ("hem", "reinforce", "hpg", "dqn_her")


@dataclass
class EnvConfig:
    name: str = "flipbit"
    K: int | None = 5
    horizon: int | None = None


@dataclass
class ExploreConfig:
    mode: str = "epsilon_uniform"
    epsilon: float = 0.3
    sigma: float = 0.5


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    algorithm: str = "hem"
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    n_trajectories: int = 64
    gradient_steps: int = 40
    batch_size: int = 64
    lr: float = 1e-3
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    eval_episodes: int = 100
    original_fraction: float = 0.0
    init_std: float = 0.2
    learn_std: bool = True
    reward_mode: str = "zero_one"
    k_her: int = 4
    gamma: float = 0.98
    sync_interval: int = 200
    baseline: str = "off"
    goals_per_episode: int = 4
    capacity: int = 1_000_000
    seed: int = 0
    workers: int = 1
    total_env_steps: int = 100_000
    output_dir: str = "runs/default"
    record_wall_clock: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.env.name not in ("flipbit", "nav", "fourroom", "onestep"):
            raise ConfigError(f"env.name: unknown environment {self.env.name!r}")
        for name in ("n_trajectories", "gradient_steps", "batch_size", "eval_episodes",
                     "workers", "total_env_steps", "capacity", "sync_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr: must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma: must lie in (0, 1)")
        if self.reward_mode not in ("zero_one", "minus_one_zero"):
            raise ConfigError(f"reward_mode: unknown mode {self.reward_mode!r}")
        if self.explore.mode not in ("sample", "epsilon_uniform", "gaussian_noise", "greedy"):
            raise ConfigError(f"explore.mode: unknown mode {self.explore.mode!r}")
        if not 0.0 <= self.explore.epsilon <= 1.0:
            raise ConfigError("explore.epsilon: must lie in [0, 1]")
        if self.explore.sigma < 0:
            raise ConfigError("explore.sigma: must be non-negative")
        if not 0.0 <= self.original_fraction <= 1.0:
            raise ConfigError("original_fraction: must lie in [0, 1]")
        if self.init_std <= 0:
            raise ConfigError("init_std: must be positive")
        if self.k_her < 0:
            raise ConfigError("k_her: must be >= 0")
        if self.baseline not in ("off", "mean"):
            raise ConfigError(f"baseline: unknown baseline {self.baseline!r}")
        if any(int(h) < 1 for h in self.hidden):
            raise ConfigError("hidden: layer sizes must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}: unknown field")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        nested = {"env": EnvConfig, "explore": ExploreConfig}.get(name) if cls is ExperimentConfig else None
        if nested is not None:
            kwargs[name] = _build(nested, value, f"{name}.")
        else:
            kwargs[name] = _coerce(f, value, prefix + name)
    return cls(**kwargs)


def _coerce(f, value, label):
    if value is None and "None" in str(f.type):
        return None
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{label}: expected a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{label}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{label}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{label}: expected a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(f"{label}: expected a list of integers")
        return list(value)
    # optional ints with a null default (env.horizon)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{label}: expected an integer or null")
    return value
