"""Proximal policy optimization with a clipped surrogate objective.

The update ascends

    mean(min(r A, clip(r, 1-eps, 1+eps) A)) - c_v * value_loss + c_h * entropy

with gradients computed by hand through the policy and value networks.
Parameter steps use a momentum-free adaptive rule: each parameter is scaled
by the root of a running average of its squared gradient. All randomness
flows from independent child streams of one seed, so two runs with the same
seed produce bit-identical training curves; the minibatch shuffle stream is
separate from the environment stream so that a zero learning rate leaves
the rollout sequence untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TrainingDivergedError
from .buffer import RolloutBatch, compute_advantages, normalized_advantages
from .env import BalanceEnv
from .net import PolicyNet

TRAINING_CURVE_HEADER = "iter,steps,mean_return,loss_policy,loss_value,entropy"


def clipped_objective(ratio, advantage, epsilon: float = 0.2):
    """Per-sample clipped surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must be in (0, 1), got {epsilon}")
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage
    return np.minimum(ratio * advantage, clipped)


@dataclass(frozen=True)
class PpoConfig:
    horizon: int = 2048
    minibatch: int = 256
    epochs: int = 10
    learning_rate: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    adaptive_decay: float = 0.99  # running squared-gradient average
    adaptive_epsilon: float = 1e-8
    hidden: tuple[int, ...] = (64, 64)
    log_std_init: float = -0.7
    total_steps: int = 200_000


@dataclass
class IterationRecord:
    iteration: int
    steps: int
    mean_return: float
    loss_policy: float
    loss_value: float
    entropy: float

    def csv_row(self) -> str:
        return (
            f"{self.iteration},{self.steps},{self.mean_return:.15g},"
            f"{self.loss_policy:.15g},{self.loss_value:.15g},{self.entropy:.15g}"
        )


@dataclass
class TrainResult:
    policy: PolicyNet
    records: list[IterationRecord]

    @property
    def final_mean_return(self) -> float:
        return self.records[-1].mean_return if self.records else math.nan

    def write_curve(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(TRAINING_CURVE_HEADER + "\n")
            for rec in self.records:
                fh.write(rec.csv_row() + "\n")


def objective_and_grads(
    policy: PolicyNet,
    obs: np.ndarray,
    actions: np.ndarray,
    log_probs_old: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    config: PpoConfig,
) -> tuple[dict, list[np.ndarray]]:
    """Full PPO objective and its gradient wrt every parameter array.

    Gradient order matches `policy.param_arrays()`: mean-net weights and
    biases, log_std, value-net weights and biases.
    """
    n = len(obs)
    eps = config.clip_epsilon

    mean, acts_p = policy.mean_net.forward(obs)
    std = policy.std()
    z = (actions - mean) / std
    log_probs = (
        -0.5 * (z * z).sum(axis=1) - policy.log_std.sum() - 0.5 * policy.action_dim * math.log(2 * math.pi)
    )
    ratio = np.exp(log_probs - log_probs_old)

    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    surrogate = float(np.minimum(unclipped, clipped).mean())
    # the min passes gradient only where the unclipped branch is active;
    # inside the clip band both branches coincide, so ties go unclipped
    active = unclipped <= clipped
    dlogp = np.where(active, ratio * advantages, 0.0) / n

    dmean = dlogp[:, None] * z / std
    dlog_std = (dlogp[:, None] * (z * z - 1.0)).sum(axis=0)
    dlog_std += config.entropy_coef  # d(entropy)/d(log_std) = 1 per dim
    gw_p, gb_p = policy.mean_net.backward(acts_p, dmean)

    values, acts_v = policy.value_net.forward(obs)
    values = values[:, 0]
    value_err = values - returns
    value_loss = float((value_err**2).mean())
    dv = (-config.value_coef * 2.0 / n) * value_err
    gw_v, gb_v = policy.value_net.backward(acts_v, dv[:, None])

    entropy = policy.entropy()
    objective = surrogate - config.value_coef * value_loss + config.entropy_coef * entropy

    stats = {
        "objective": objective,
        "loss_policy": -surrogate,
        "loss_value": value_loss,
        "entropy": entropy,
    }
    grads = gw_p + gb_p + [dlog_std] + gw_v + gb_v
    return stats, grads


class AdaptiveAscent:
    """Momentum-free adaptive gradient ascent (per-parameter RMS scaling)."""

    def __init__(self, params: list[np.ndarray], config: PpoConfig):
        self.params = params
        self.lr = config.learning_rate
        self.decay = config.adaptive_decay
        self.eps = config.adaptive_epsilon
        self.accum = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]):
        for p, g, a in zip(self.params, grads, self.accum):
            a *= self.decay
            a += (1.0 - self.decay) * g * g
            p += self.lr * g / (np.sqrt(a) + self.eps)


class _RolloutWorker:
    """Sequential experience collector that persists episodes across
    iterations."""

    def __init__(self, env: BalanceEnv, policy: PolicyNet, rng_env, rng_action):
        self.env = env
        self.policy = policy
        self.rng_env = rng_env
        self.rng_action = rng_action
        self.obs = env.reset(rng_env)
        self.episode_return = 0.0
        self.completed: list[float] = []

    def collect(self, horizon: int, gamma: float, gae_lambda: float) -> RolloutBatch:
        obs_buf = np.empty((horizon, self.env.OBS_DIM))
        act_buf = np.empty((horizon, self.env.ACTION_DIM))
        logp_buf = np.empty(horizon)
        rew_buf = np.empty(horizon)
        done_buf = np.empty(horizon)
        self.completed = []
        for i in range(horizon):
            action, logp = self.policy.sample_action(self.obs, self.rng_action)
            obs_buf[i] = self.obs
            act_buf[i] = action
            logp_buf[i] = logp
            next_obs, rew, done, _ = self.env.step(float(action[0]))
            rew_buf[i] = rew
            done_buf[i] = 1.0 if done else 0.0
            self.episode_return += rew
            if done:
                self.completed.append(self.episode_return)
                self.episode_return = 0.0
                next_obs = self.env.reset(self.rng_env)
            self.obs = next_obs
        values = self.policy.value(obs_buf)
        last_value = float(self.policy.value(self.obs[None, :])[0])
        batch = RolloutBatch(
            observations=obs_buf,
            actions=act_buf,
            log_probs=logp_buf,
            rewards=rew_buf,
            dones=done_buf,
            values=values,
            last_value=last_value,
        )
        return compute_advantages(batch, gamma, gae_lambda)


def _spawn_rngs(seed: int) -> tuple[np.random.Generator, ...]:
    streams = np.random.SeedSequence(seed).spawn(4)
    return tuple(np.random.default_rng(s) for s in streams)  # init, env, action, shuffle


def train(
    env: BalanceEnv,
    config: PpoConfig | None = None,
    seed: int = 0,
    on_iteration=None,
) -> TrainResult:
    """Train a policy on the given environment; deterministic per seed."""
    config = config or PpoConfig()
    rng_init, rng_env, rng_action, rng_shuffle = _spawn_rngs(seed)
    policy = PolicyNet(
        env.OBS_DIM,
        env.ACTION_DIM,
        hidden=config.hidden,
        log_std_init=config.log_std_init,
        rng=rng_init,
    )
    worker = _RolloutWorker(env, policy, rng_env, rng_action)
    optimizer = AdaptiveAscent(policy.param_arrays(), config)

    records: list[IterationRecord] = []
    steps = 0
    iteration = 0
    mean_return = math.nan
    while steps < config.total_steps:
        iteration += 1
        batch = worker.collect(config.horizon, config.gamma, config.gae_lambda)
        steps += len(batch)
        advantages = normalized_advantages(batch.advantages)

        stats = {}
        for _ in range(config.epochs):
            order = rng_shuffle.permutation(len(batch))
            for start in range(0, len(batch), config.minibatch):
                idx = order[start:start + config.minibatch]
                stats, grads = objective_and_grads(
                    policy,
                    batch.observations[idx],
                    batch.actions[idx],
                    batch.log_probs[idx],
                    advantages[idx],
                    batch.returns[idx],
                    config,
                )
                if not math.isfinite(stats["objective"]):
                    raise TrainingDivergedError(
                        f"non-finite loss at iteration {iteration}",
                        snapshot={
                            "iteration": iteration,
                            "steps": steps,
                            "stats": stats,
                            "param_norm": float(np.linalg.norm(policy.flat_params())),
                            "advantage_range": [
                                float(advantages.min()),
                                float(advantages.max()),
                            ],
                        },
                    )
                optimizer.step(grads)
                policy.clamp_log_std()

        if worker.completed:
            mean_return = float(np.mean(worker.completed))
        records.append(
            IterationRecord(
                iteration=iteration,
                steps=steps,
                mean_return=mean_return,
                loss_policy=stats.get("loss_policy", math.nan),
                loss_value=stats.get("loss_value", math.nan),
                entropy=stats.get("entropy", math.nan),
            )
        )
        if on_iteration is not None:
            on_iteration(records[-1])
    return TrainResult(policy=policy, records=records)


def random_policy_baseline(
    env: BalanceEnv, config: PpoConfig | None = None, seed: int = 0
) -> float:
    """Mean episode return of the untrained policy.

    Uses the same seed-derived streams as `train`, so it reproduces exactly
    what the first training iteration experiences before any update.
    """
    config = config or PpoConfig()
    rng_init, rng_env, rng_action, _ = _spawn_rngs(seed)
    policy = PolicyNet(
        env.OBS_DIM,
        env.ACTION_DIM,
        hidden=config.hidden,
        log_std_init=config.log_std_init,
        rng=rng_init,
    )
    worker = _RolloutWorker(env, policy, rng_env, rng_action)
    worker.collect(config.horizon, config.gamma, config.gae_lambda)
    if not worker.completed:
        raise ConfigError("no episode completed within one horizon")
    return float(np.mean(worker.completed))
