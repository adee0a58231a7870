"""Planar balance environment on the reduced pendulum dynamics.

The policy acts at 50 Hz; each control step advances the physics through
1 ms Runge-Kutta substeps with the torque held. Observations are
[tilt, tilt rate, velocity error, previous action] - the minimal
sufficient statistics for the balance task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import DEFAULT_TIMESTEP, DEFAULT_TORQUE_LIMIT, PendulumState, _accel, _coeffs
from ..errors import ConfigError
from ..legmodel import JointConfiguration, PendulumParams
from .reward import RewardSpec, reward


@dataclass(frozen=True)
class EnvConfig:
    control_period: float = 0.02  # s, one action per period
    physics_dt: float = DEFAULT_TIMESTEP
    episode_s: float = 10.0
    torque_limit: float = DEFAULT_TORQUE_LIMIT
    action_scale: float = 2.0  # N*m of torque per unit of raw action
    init_tilt: float = 0.02  # rad, uniform reset range
    target_velocity: float = 0.0

    def __post_init__(self):
        if self.control_period < self.physics_dt:
            raise ConfigError("control_period must be >= physics_dt")
        substeps = self.control_period / self.physics_dt
        if abs(substeps - round(substeps)) > 1e-9:
            raise ConfigError("control_period must be a multiple of physics_dt")

    @property
    def substeps(self) -> int:
        return round(self.control_period / self.physics_dt)


class BalanceEnv:
    OBS_DIM = 4
    ACTION_DIM = 1

    def __init__(
        self,
        params: PendulumParams,
        reward_spec: RewardSpec | None = None,
        config: EnvConfig | None = None,
        joint_config: JointConfiguration | None = None,
    ):
        self.params = params
        self.reward_spec = reward_spec or RewardSpec()
        self.config = config or EnvConfig()
        self.joint_config = joint_config  # static pose; None skips limit checks
        self._coeffs = _coeffs(params)
        self._state = PendulumState()
        self._prev_action = 0.0
        self._t = 0.0
        self._max_steps = round(self.config.episode_s / self.config.control_period)
        self._step_count = 0

    @property
    def state(self) -> PendulumState:
        return self._state

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        tilt = float(rng.uniform(-self.config.init_tilt, self.config.init_tilt))
        self._state = PendulumState(0.0, 0.0, tilt, 0.0)
        self._prev_action = 0.0
        self._t = 0.0
        self._step_count = 0
        return self._observe()

    def _observe(self) -> np.ndarray:
        s = self._state
        return np.array(
            [s.theta, s.thetadot, s.xdot - self.config.target_velocity, self._prev_action]
        )

    def step(self, action: float) -> tuple[np.ndarray, float, bool, dict]:
        """Apply one scaled, saturated action for a full control period."""
        raw = float(action)
        cfg = self.config
        torque = max(-cfg.torque_limit, min(cfg.torque_limit, raw * cfg.action_scale))

        a, b, c, bg, radius = self._coeffs
        x, xd, th, thd = (
            self._state.x,
            self._state.xdot,
            self._state.theta,
            self._state.thetadot,
        )
        dt = cfg.physics_dt
        sixth = dt / 6.0
        for _ in range(cfg.substeps):
            a1, b1 = _accel(xd, th, thd, torque, a, b, c, bg, radius)
            xd2, thd2 = xd + 0.5 * dt * a1, thd + 0.5 * dt * b1
            a2, b2 = _accel(xd2, th + 0.5 * dt * thd, thd2, torque, a, b, c, bg, radius)
            xd3, thd3 = xd + 0.5 * dt * a2, thd + 0.5 * dt * b2
            a3, b3 = _accel(xd3, th + 0.5 * dt * thd2, thd3, torque, a, b, c, bg, radius)
            xd4, thd4 = xd + dt * a3, thd + dt * b3
            a4, b4 = _accel(xd4, th + dt * thd3, thd4, torque, a, b, c, bg, radius)
            x += sixth * (xd + 2.0 * xd2 + 2.0 * xd3 + xd4)
            xd += sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            th += sixth * (thd + 2.0 * thd2 + 2.0 * thd3 + thd4)
            thd += sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        self._state = PendulumState(x, xd, th, thd)
        self._t += cfg.control_period
        self._step_count += 1
        self._prev_action = raw

        value = reward(
            self._state,
            torque,
            self.joint_config,
            self.reward_spec,
            target_velocity=cfg.target_velocity,
        )
        fell = abs(th) > self.reward_spec.fall_tilt
        if fell:
            value += self.reward_spec.termination_penalty
        done = fell or self._step_count >= self._max_steps
        if not (math.isfinite(value) and self._state.is_finite()):
            raise ConfigError(f"environment produced non-finite values at t={self._t}")
        return self._observe(), value, done, {"fell": fell, "torque": torque}
