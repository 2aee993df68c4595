"""Scenario configuration and its YAML form.

A scenario file is a flat mapping whose keys are ScenarioConfig fields.
Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from ..core.params import ProtocolParams
from ..crypto.backends import SCHEMES

PROTOCOLS = ("fin-ng", "fin-baseline", "jumbo", "jumbo-multicast-baseline")
ADVERSARIES = ("none", "crash", "bad-signature", "flooding", "fluctuation", "quality-attack")
PULL_MODES = ("random", "dispersal")
DELAY_MODELS = ("uniform", "exponential")


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str = "fin-ng"
    n: int = 4
    batch_limit: int = 16
    tx_size: int = 250
    beta: float = 0.5
    kappa: int = 2  # pull fan-out
    client_kappa: int = 2  # nodes each client transaction is sent to
    rate: float = 8.0  # client transactions per time unit
    adversary: str = "none"
    adversary_count: int | None = None  # None means f
    flood_multiplier: float = 10.0
    fluctuation_period: float = 10.0
    fluctuation_factor: float = 4.0
    after_fact_removal: bool = True
    delay_model: str = "uniform"
    delay_lo: float = 0.5
    delay_hi: float = 1.5
    reorder_window: float = 50.0
    epochs: int = 10
    load_epochs: int | None = None  # stop injecting once every honest node reaches this epoch
    seed: int = 1
    backend: str = "mock-deterministic"
    key_dir: str | None = None
    pull_mode: str = "random"
    eager_pull: bool = False
    strict_validation: bool = False
    fairness: bool = True
    honest_saturate: bool = False
    max_epochs: int | None = None  # hard stop while waiting for stragglers
    trace: bool = True

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {ADVERSARIES}, got {self.adversary!r}")
        if self.pull_mode not in PULL_MODES:
            raise ValueError(f"pull_mode must be one of {PULL_MODES}, got {self.pull_mode!r}")
        if self.delay_model not in DELAY_MODELS:
            raise ValueError(f"delay_model must be one of {DELAY_MODELS}, got {self.delay_model!r}")
        if self.backend not in SCHEMES and not self.backend.startswith("bls-real"):
            raise ValueError(f"unknown crypto backend {self.backend!r}")
        params = self.params()  # raises on bad n, beta, kappa, batch and tx sizes
        if self.adversary_count is not None and not 0 <= self.adversary_count <= params.f:
            raise ValueError(f"adversary_count must lie in [0, f={params.f}]")
        if not 1 <= self.client_kappa <= self.n:
            raise ValueError("client_kappa must lie in [1, n]")
        if self.kappa > self.n:
            raise ValueError("kappa must not exceed n")
        if self.tx_size < 8:
            raise ValueError("tx_size must fit the 8-byte transaction id")
        if self.rate < 0 or self.epochs < 1:
            raise ValueError("rate must be >= 0 and epochs >= 1")
        if not 0 < self.delay_lo <= self.delay_hi or self.reorder_window < self.delay_hi:
            raise ValueError("need 0 < delay_lo <= delay_hi <= reorder_window")
        if self.flood_multiplier < 1 or self.fluctuation_factor < 1 or self.fluctuation_period <= 0:
            raise ValueError("flooding and fluctuation parameters out of range")
        if self.load_epochs is not None and not 0 <= self.load_epochs <= self.epochs:
            raise ValueError("load_epochs must lie in [0, epochs]")

    def params(self) -> ProtocolParams:
        return ProtocolParams(self.n, self.kappa, self.beta, self.batch_limit, self.tx_size)

    @property
    def f(self) -> int:
        return (self.n - 1) // 3

    @property
    def injection_epochs(self) -> int:
        if self.load_epochs is not None:
            return self.load_epochs
        return max(1, (2 * self.epochs) // 3)

    @property
    def epoch_cap(self) -> int:
        return self.max_epochs if self.max_epochs is not None else 3 * self.epochs + 10

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ValueError("scenario must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)


def load_config(path) -> ScenarioConfig:
    data = yaml.safe_load(Path(path).read_text())
    return ScenarioConfig.from_dict(data or {})


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load_grid(path) -> list[ScenarioConfig]:
    """A sweep file: ``base`` fields plus ``grid`` lists to take the product of.

        base: {epochs: 5}
        grid: {n: [4, 7], protocol: [fin-ng, jumbo]}
        seeds: [1, 2]
    """
    data = yaml.safe_load(Path(path).read_text()) or {}
    base = data.get("base", {}) or {}
    grid = data.get("grid", {}) or {}
    seeds = data.get("seeds", [base.get("seed", 1)])
    keys = sorted(grid)
    out = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        for seed in seeds:
            out.append(ScenarioConfig.from_dict({**base, **dict(zip(keys, combo)), "seed": seed}))
    return out
