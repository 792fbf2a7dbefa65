"""Success and verticality rewards.

Fallen parcels are not penalised here; they cost the agent future picks
through the episode clock instead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .env import StepOutcome
from .errors import ConfigError


class RewardKind(str, enum.Enum):
    BASELINE = "baseline"
    VERTICALITY = "verticality"


@dataclass(frozen=True)
class RewardConfig:
    kind: RewardKind = RewardKind.VERTICALITY
    lam: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RewardKind(self.kind))
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")


def reward(outcome: StepOutcome, config: RewardConfig) -> float:
    if not outcome.success:
        return 0.0
    if config.kind is RewardKind.BASELINE:
        return 1.0
    return 1.0 + config.lam * outcome.z_pick
