"""From-scratch PPO on the planar balance task."""

from .buffer import RolloutBatch, compute_advantages, normalized_advantages
from .env import BalanceEnv, EnvConfig
from .net import Mlp, PolicyNet
from .reward import RewardSpec, reward
from .trainer import (
    IterationRecord,
    PpoConfig,
    TrainResult,
    clipped_objective,
    objective_and_grads,
    random_policy_baseline,
    train,
)

__all__ = [
    "BalanceEnv",
    "EnvConfig",
    "IterationRecord",
    "Mlp",
    "PolicyNet",
    "PpoConfig",
    "RewardSpec",
    "RolloutBatch",
    "TrainResult",
    "clipped_objective",
    "compute_advantages",
    "normalized_advantages",
    "objective_and_grads",
    "random_policy_baseline",
    "reward",
    "train",
]
