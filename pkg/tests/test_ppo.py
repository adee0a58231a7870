import math

import numpy as np
import pytest

from wipsim.dynamics import PendulumState
from wipsim.errors import ConfigError
from wipsim.legmodel import JointConfiguration, LegJoints
from wipsim.ppo import (
    BalanceEnv,
    EnvConfig,
    PolicyNet,
    PpoConfig,
    RewardSpec,
    RolloutBatch,
    clipped_objective,
    compute_advantages,
    normalized_advantages,
    objective_and_grads,
    reward,
)


def two_branch_oracle(r, adv, eps):
    """Brute-force evaluation of both branches with an explicit clip."""
    if r < 1.0 - eps:
        clipped_ratio = 1.0 - eps
    elif r > 1.0 + eps:
        clipped_ratio = 1.0 + eps
    else:
        clipped_ratio = r
    return min(r * adv, clipped_ratio * adv)


class TestClippedObjective:
    def test_ratio_one_is_never_clipped(self):
        assert clipped_objective(1.0, 1.0) == 1.0

    def test_positive_advantage_is_capped_above(self):
        assert clipped_objective(1.5, 1.0, 0.2) == pytest.approx(1.2)

    def test_negative_advantage_clips_from_below(self):
        # both branches by hand: r*A = -0.5, clip(r)*A = -0.8; min is -0.8
        assert clipped_objective(0.5, -1.0, 0.2) == pytest.approx(-0.8)

    def test_grid_matches_brute_force_oracle(self):
        eps = 0.2
        for adv in (-1.0, 1.0):
            for r in np.arange(0.0, 3.0 + 1e-12, 0.05):
                got = float(clipped_objective(r, adv, eps))
                assert got == pytest.approx(two_branch_oracle(float(r), adv, eps))

    def test_inert_at_the_old_policy(self):
        for adv in (-2.0, -1.0, 0.0, 0.5, 3.0):
            assert clipped_objective(1.0, adv, 0.2) == 1.0 * adv

    def test_never_exceeds_either_branch(self):
        eps = 0.2
        for adv in (-1.0, 1.0):
            for r in np.arange(0.0, 3.0 + 1e-12, 0.05):
                val = float(clipped_objective(r, adv, eps))
                assert val <= r * adv + 1e-15
                assert val <= two_branch_oracle(float(r), adv, eps) + 1e-15

    def test_epsilon_domain(self):
        with pytest.raises(ConfigError):
            clipped_objective(1.0, 1.0, 0.0)
        with pytest.raises(ConfigError):
            clipped_objective(1.0, 1.0, 1.0)

    def test_vectorized(self):
        out = clipped_objective([1.0, 1.5, 0.5], [1.0, 1.0, -1.0], 0.2)
        np.testing.assert_allclose(out, [1.0, 1.2, -0.8])


def batch_of(rewards, values, dones, last_value=0.0):
    n = len(rewards)
    return RolloutBatch(
        observations=np.zeros((n, 1)),
        actions=np.zeros((n, 1)),
        log_probs=np.zeros(n),
        rewards=np.asarray(rewards, dtype=float),
        dones=np.asarray(dones, dtype=float),
        values=np.asarray(values, dtype=float),
        last_value=last_value,
    )


class TestAdvantages:
    def test_lambda_zero_reduces_to_td_error(self):
        rewards = [1.0, -0.5, 2.0, 0.3]
        values = [0.2, 0.4, -0.1, 0.6]
        dones = [0, 0, 0, 0]
        batch = compute_advantages(batch_of(rewards, values, dones, last_value=0.9),
                                   gamma=0.97, gae_lambda=0.0)
        for t in range(4):
            nxt = values[t + 1] if t < 3 else 0.9
            delta = rewards[t] + 0.97 * nxt - values[t]
            assert batch.advantages[t] == pytest.approx(delta, rel=1e-12)

    def test_undiscounted_single_episode_telescopes(self):
        # gamma = lambda = 1: A_t = (sum of rewards from t on) - V(s_t)
        rewards = [1.0, 2.0, 3.0, -1.0, 0.5]
        values = [0.3, -0.2, 0.1, 0.4, 0.0]
        dones = [0, 0, 0, 0, 1]
        batch = compute_advantages(batch_of(rewards, values, dones),
                                   gamma=1.0, gae_lambda=1.0)
        suffix = np.cumsum(rewards[::-1])[::-1]  # independent telescoping oracle
        for t in range(5):
            assert batch.advantages[t] == pytest.approx(suffix[t] - values[t], rel=1e-12)
            assert batch.returns[t] == pytest.approx(suffix[t], rel=1e-12)

    def test_all_zero_rewards_and_values(self):
        batch = compute_advantages(batch_of([0] * 6, [0] * 6, [0] * 6))
        assert np.all(batch.advantages == 0.0)

    def test_episode_boundary_blocks_bootstrap(self):
        batch = compute_advantages(batch_of([1.0, 1.0], [0.0, 0.0], [1, 0], last_value=5.0),
                                   gamma=0.9, gae_lambda=0.9)
        # first step ends an episode: no value flows across the boundary
        assert batch.advantages[0] == pytest.approx(1.0)

    def test_gamma_domain(self):
        with pytest.raises(ConfigError):
            compute_advantages(batch_of([1.0], [0.0], [0]), gamma=0.0)

    def test_normalization(self, rng):
        adv = rng.normal(3.0, 5.0, size=512)
        norm = normalized_advantages(adv)
        assert abs(norm.mean()) < 1e-10
        assert abs(norm.var() - 1.0) < 1e-6


class TestReward:
    def test_upright_tracking_no_effort_is_maximal(self):
        spec = RewardSpec()
        value = reward(PendulumState(), 0.0, None, spec)
        assert value == spec.upright_weight

    def test_hand_computed_weighted_sum(self):
        # weights and state fixed, sum worked out with plain arithmetic
        spec = RewardSpec(upright_weight=1.0, velocity_weight=0.5,
                          effort_weight=1e-4, tilt_rate_weight=0.05)
        state = PendulumState(x=0.0, xdot=0.2, theta=0.1, thetadot=0.3)
        got = reward(state, 4.0, None, spec, target_velocity=0.05)
        expected = (
            1.0 * math.cos(0.1)
            - 0.5 * (0.2 - 0.05) ** 2
            - 1e-4 * 16.0
            - 0.05 * 0.09
        )
        assert got == pytest.approx(expected, rel=1e-15)

    def test_joint_limit_penalty_fires_per_violating_tick(self):
        spec = RewardSpec()
        bad = JointConfiguration(left=LegJoints(knee_pitch=math.radians(130)))
        ok = JointConfiguration()
        assert reward(PendulumState(), 0.0, bad, spec) == pytest.approx(
            spec.upright_weight + spec.joint_limit_penalty
        )
        assert reward(PendulumState(), 0.0, ok, spec) == spec.upright_weight

    def test_penalties_must_dominate(self):
        with pytest.raises(ConfigError):
            RewardSpec(termination_penalty=-5.0)  # less than 10x the peak
        with pytest.raises(ConfigError):
            RewardSpec(joint_limit_penalty=0.5)

    def test_termination_fires_once_and_ends_the_episode(self, straight_params):
        spec = RewardSpec()
        env = BalanceEnv(straight_params, spec, EnvConfig())
        env.reset(np.random.default_rng(0))
        env._state = PendulumState(theta=0.69, thetadot=6.0)
        obs, value, done, info = env.step(0.0)
        assert info["fell"] and done
        # shaping is bounded by +-2 here, so the -10 must be present exactly once
        assert value < spec.termination_penalty + 2.0
        assert value > 2.0 * spec.termination_penalty


class TestGradients:
    def make_data(self, policy, n, seed):
        rng = np.random.default_rng(seed)
        obs = rng.normal(size=(n, policy.obs_dim))
        actions = rng.normal(size=(n, policy.action_dim))
        mean = policy.mean(obs)
        logp_old = policy.log_prob(mean, actions) + rng.uniform(-0.15, 0.15, size=n)
        advantages = rng.normal(size=n)
        returns = rng.normal(size=n)
        # keep every sample away from the clip kinks so the objective is
        # differentiable at the test point
        ratio = np.exp(policy.log_prob(mean, actions) - logp_old)
        assert (np.abs(ratio - 0.8) > 1e-3).all() and (np.abs(ratio - 1.2) > 1e-3).all()
        return obs, actions, logp_old, advantages, returns

    @pytest.mark.parametrize("hidden", [(), (4,)])
    def test_analytic_gradient_matches_central_differences(self, hidden):
        config = PpoConfig(clip_epsilon=0.2, entropy_coef=0.01, value_coef=0.5)
        policy = PolicyNet(2, 1, hidden=hidden, rng=np.random.default_rng(3))
        data = self.make_data(policy, 32, seed=5)

        stats, grads = objective_and_grads(policy, *data, config)
        flat_grad = np.concatenate([g.ravel() for g in grads])

        def objective(flat):
            saved = policy.flat_params()
            policy.set_flat_params(flat)
            value = objective_and_grads(policy, *data, config)[0]["objective"]
            policy.set_flat_params(saved)
            return value

        x0 = policy.flat_params()
        h = 1e-6
        fd = np.zeros_like(x0)
        for i in range(len(x0)):
            e = np.zeros_like(x0)
            e[i] = h
            fd[i] = (objective(x0 + e) - objective(x0 - e)) / (2 * h)

        assert np.linalg.norm(fd - flat_grad) / np.linalg.norm(fd) < 1e-4

    def test_two_parameter_toy_policy(self):
        # linear mean + log sigma only; value and entropy terms switched off
        config = PpoConfig(clip_epsilon=0.2, entropy_coef=0.0, value_coef=0.0)
        policy = PolicyNet(1, 1, hidden=(), rng=np.random.default_rng(9))
        policy.mean_net.biases[0][:] = 0.0
        data = self.make_data(policy, 24, seed=2)
        stats, grads = objective_and_grads(policy, *data, config)
        flat = np.concatenate([g.ravel() for g in grads])

        def objective(flat_params):
            saved = policy.flat_params()
            policy.set_flat_params(flat_params)
            value = objective_and_grads(policy, *data, config)[0]["objective"]
            policy.set_flat_params(saved)
            return value

        x0 = policy.flat_params()
        h = 1e-6
        for i in range(len(x0)):
            e = np.zeros_like(x0)
            e[i] = h
            fd = (objective(x0 + e) - objective(x0 - e)) / (2 * h)
            if abs(fd) > 1e-9:
                assert flat[i] == pytest.approx(fd, rel=1e-4)


def test_policy_json_round_trip(tmp_path):
    policy = PolicyNet(4, 1, rng=np.random.default_rng(1))
    path = tmp_path / "policy.json"
    policy.save(path)
    loaded = PolicyNet.load(path)
    np.testing.assert_array_equal(policy.flat_params(), loaded.flat_params())
    obs = np.array([0.1, -0.2, 0.3, 0.0])
    np.testing.assert_array_equal(policy.mean_action(obs), loaded.mean_action(obs))


def test_policy_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        PolicyNet.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"obs_dim": 4}')
    with pytest.raises(ConfigError, match="malformed"):
        PolicyNet.load(bad)
