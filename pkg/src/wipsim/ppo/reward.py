"""Reward shaping for the planar balance / velocity-tracking task.

Per-step shaping rewards staying upright and tracking the commanded
velocity while penalizing torque effort and tilt rate. Termination and
joint-limit penalties are strictly negative and at least an order of
magnitude larger than the best achievable per-step reward, so falls and
limit violations dominate whatever shaping the episode collected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..dynamics import PendulumState
from ..errors import ConfigError
from ..legmodel import JointConfiguration, JointLimits, validate

PENALTY_MARGIN = 10.0


@dataclass(frozen=True)
class RewardSpec:
    upright_weight: float = 1.0
    velocity_weight: float = 0.1
    effort_weight: float = 1e-4
    tilt_rate_weight: float = 0.05
    termination_penalty: float = -10.0
    joint_limit_penalty: float = -10.0
    fall_tilt: float = 0.7  # rad; |theta| beyond this ends the episode

    def __post_init__(self):
        for name in ("upright_weight", "velocity_weight", "effort_weight", "tilt_rate_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        peak = self.upright_weight  # every other per-step term is a penalty
        for name in ("termination_penalty", "joint_limit_penalty"):
            value = getattr(self, name)
            if not value < 0:
                raise ConfigError(f"{name} must be strictly negative")
            if abs(value) < PENALTY_MARGIN * peak:
                raise ConfigError(
                    f"|{name}| must be >= {PENALTY_MARGIN} x the peak per-step "
                    f"reward ({peak})"
                )
        if not 0.0 < self.fall_tilt < math.pi:
            raise ConfigError("fall_tilt must be in (0, pi)")


def reward(
    state: PendulumState,
    torque: float,
    config: JointConfiguration | None,
    spec: RewardSpec,
    target_velocity: float = 0.0,
    limits: JointLimits | None = None,
) -> float:
    """Per-step shaping reward; termination handling is the episode's job."""
    value = (
        spec.upright_weight * math.cos(state.theta)
        - spec.velocity_weight * (state.xdot - target_velocity) ** 2
        - spec.effort_weight * torque * torque
        - spec.tilt_rate_weight * state.thetadot**2
    )
    if config is not None and validate(config, limits):
        value += spec.joint_limit_penalty
    return value
