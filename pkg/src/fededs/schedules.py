"""Closed-form round schedules: local-epoch annealing and loss-mixing weights.

Rounds are 1-indexed, so the sigmoid mixing weights start at (0.5, 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class EpochScheduleConfig:
    e_max: int
    e_min: int
    t_alpha: int
    t_beta: int

    def __post_init__(self):
        if not (self.e_max >= self.e_min >= 1):
            raise ConfigurationError(f"need e_max >= e_min >= 1, got {self.e_max}, {self.e_min}")
        if not (self.t_beta > self.t_alpha >= 1):
            raise ConfigurationError(
                f"need t_beta > t_alpha >= 1, got {self.t_beta}, {self.t_alpha}"
            )


@dataclass(frozen=True)
class LambdaScheduleConfig:
    m: float
    epsilon: float

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigurationError(f"steepness m must be positive, got {self.m}")
        if not 0.0 < self.epsilon < 0.5:
            raise ConfigurationError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")


def epochs_at(cfg: EpochScheduleConfig, t: int) -> int:
    """Local epochs for round t: e_max, a floored linear ramp, then e_min.

    The ramp term is computed in exact integer arithmetic so branch edges
    never suffer float rounding.
    """
    if t < 1:
        raise ConfigurationError(f"round index must be >= 1, got {t}")
    if t <= cfg.t_alpha:
        return cfg.e_max
    if t <= cfg.t_beta:
        drop = (cfg.e_max - cfg.e_min) * (t - cfg.t_alpha) // (cfg.t_beta - cfg.t_alpha)
        return cfg.e_max - drop
    return cfg.e_min


def lambdas_at(cfg: LambdaScheduleConfig, t: int) -> tuple[float, float]:
    """(lambda_c, lambda_dis) for round t.

    lambda_c follows sigmoid(m*(t-1)), lambda_dis its complement; once the
    distillation weight falls to epsilon or below, both clamp jointly to
    (1, 0). The pair always sums to exactly 1.
    """
    if t < 1:
        raise ConfigurationError(f"round index must be >= 1, got {t}")
    lam_c = 1.0 / (1.0 + math.exp(-cfg.m * (t - 1)))
    lam_dis = 1.0 - lam_c
    if lam_dis <= cfg.epsilon or lam_c >= 1.0 - cfg.epsilon:
        return 1.0, 0.0
    return lam_c, lam_dis
