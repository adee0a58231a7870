"""Rollout storage and generalized advantage estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class RolloutBatch:
    """One horizon of on-policy experience.

    `last_value` bootstraps the value beyond the horizon when the final
    step did not terminate. Advantages and returns are filled in by
    `compute_advantages` after the rollout is complete.
    """

    observations: np.ndarray  # (N, obs_dim)
    actions: np.ndarray  # (N, action_dim)
    log_probs: np.ndarray  # (N,)
    rewards: np.ndarray  # (N,)
    dones: np.ndarray  # (N,) 0/1
    values: np.ndarray  # (N,)
    last_value: float = 0.0
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)


def compute_advantages(
    batch: RolloutBatch, gamma: float = 0.99, gae_lambda: float = 0.95
) -> RolloutBatch:
    """Fill in GAE advantages and value targets.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t = sum_k (gamma * lambda)^k delta_{t+k}, truncated at episode ends;
    returns are A_t + V(s_t). Advantages come out raw; the trainer
    normalizes per batch before the update epochs.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
    if not 0.0 <= gae_lambda <= 1.0:
        raise ConfigError(f"gae_lambda must be in [0, 1], got {gae_lambda}")

    n = len(batch)
    adv = np.zeros(n)
    running = 0.0
    next_value = batch.last_value
    for t in range(n - 1, -1, -1):
        live = 1.0 - batch.dones[t]
        delta = batch.rewards[t] + gamma * next_value * live - batch.values[t]
        running = delta + gamma * gae_lambda * live * running
        adv[t] = running
        next_value = batch.values[t]
    batch.advantages = adv
    batch.returns = adv + batch.values
    return batch


def normalized_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance advantages (guarding a degenerate batch)."""
    std = advantages.std()
    if std < 1e-12:
        return advantages - advantages.mean()
    return (advantages - advantages.mean()) / std
