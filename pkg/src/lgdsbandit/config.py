"""Numerical tolerances and experiment configuration records."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    dare_residual: float = 1e-10
    dare_max_iter: int = 1_000_000
    relative: float = 1e-8
    symmetry: float = 1e-10
    psd: float = 1e-10
    rank: float = 1e-8
    jitter_scale: float = 1e-12
    jitter_doublings: int = 20
    normalization_floor: float = 1e-12
    max_condition: float = 1e12
    # scores this close (relative to the largest magnitude) count as tied
    tie: float = 1e-12


TOL = Tolerances()

DISTRIBUTIONS = ("gaussian", "uniform", "exponential", "cauchy", "bernoulli")

POLICY_IDS = (
    "idea",
    "kalman_ucb",
    "kode",
    "kalman_oracle",
    "ucb",
    "sw_ucb",
    "rexp3",
    "oful",
    "random",
)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one batch of episodes.

    Desk-scale defaults (100 environments x 3 runs x 1000 rounds); the
    full-scale protocol is ``envs=1000, runs=10``.
    """

    dist: str = "gaussian"
    d: int = 10
    k: int = 10
    rho: float = 0.9
    envs: int = 100
    runs: int = 3
    horizon: int = 1000
    warmup: int = 10_000
    policies: list[str] = field(default_factory=lambda: list(POLICY_IDS))
    policy_params: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int = 0
    out: str = "results"
    jobs: int = 1
    per_round: bool = False

    def validate(self) -> None:
        if self.dist not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {self.dist!r}")
        for name in ("d", "k", "envs", "runs", "horizon", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.warmup < 0:
            raise ConfigError("warmup must be >= 0")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if not self.policies:
            raise ConfigError("policy list is empty")
        unknown = [p for p in self.policies if p not in POLICY_IDS]
        if unknown:
            raise ConfigError(f"unknown policies {unknown}")
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("duplicate policies")
        for p in self.policy_params:
            if p not in POLICY_IDS:
                raise ConfigError(f"parameters given for unknown policy {p!r}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - names
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**data)
        cfg.policies = list(cfg.policies)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)
