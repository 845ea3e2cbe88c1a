"""Engine configuration: salience parameters, router thresholds, the active
footprint bound, and paths to policy / dependency-rule files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

from .salience import SalienceParams


@dataclass(frozen=True)
class BetaSpec:
    """Footprint bound beta(n) = base + per_tick * n (per_tick = 0 for constant)."""

    base: int = 200
    per_tick: float = 0.0

    def bound(self, tick: int) -> int:
        return int(self.base + self.per_tick * tick)


@dataclass
class EngineConfig:
    salience: SalienceParams = field(default_factory=SalienceParams)
    tau_topic: float = 0.35
    tau_dup: float = 0.9
    k_topics: int = 3
    beta: BetaSpec = field(default_factory=BetaSpec)
    n_promote: int = 3
    m_promote: int = 5
    policy_paths: list[str] = field(default_factory=list)
    rule_path: Optional[str] = None

    def validate(self) -> None:
        self.salience.validate()
        if not (0.0 <= self.tau_topic <= 1.0 and 0.0 <= self.tau_dup <= 1.0):
            raise ValueError("router thresholds must lie in [0, 1]")
        if self.k_topics < 1:
            raise ValueError("k_topics must be at least 1")
        if self.beta.base < 0:
            raise ValueError("beta base must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "EngineConfig":
        cfg = EngineConfig(
            salience=SalienceParams(**d.get("salience", {})),
            tau_topic=d.get("tau_topic", 0.35),
            tau_dup=d.get("tau_dup", 0.9),
            k_topics=d.get("k_topics", 3),
            beta=BetaSpec(**d.get("beta", {})),
            n_promote=d.get("n_promote", 3),
            m_promote=d.get("m_promote", 5),
            policy_paths=list(d.get("policy_paths", [])),
            rule_path=d.get("rule_path"),
        )
        cfg.validate()
        return cfg

    @staticmethod
    def load(path: str | Path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return EngineConfig.from_dict(json.load(fh))
