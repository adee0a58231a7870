import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from wipsim.dynamics import ControlInput, LinearModel, PendulumState, linearize
from wipsim.errors import UnstabilizableSystemError, WeightError
from wipsim.harness import default_weights
from wipsim.legmodel import JointConfiguration
from wipsim.lqr import (
    GainScheduler,
    LqrWeights,
    control,
    dare_residual,
    design_controller,
    evaluate_cost,
    solve_dare,
    solve_dare_doubling,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class TestSolveDare:
    def test_scalar_golden_ratio_plant(self):
        # a=b=q=r=1: the fixed point solves P^2 = P + 1, worked by hand
        p, k = solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert p[0, 0] == pytest.approx(GOLDEN, abs=1e-9)
        assert k[0, 0] == pytest.approx(GOLDEN - 1.0, abs=1e-9)  # 1/phi

    def test_deadbeat_plant(self):
        p, k = solve_dare([[0.0]], [[1.0]], [[3.0]], [[1.0]])
        assert p[0, 0] == 3.0
        assert k[0, 0] == 0.0

    def test_uncontrollable_unstable_plant_raises(self):
        with pytest.raises(UnstabilizableSystemError):
            solve_dare([[1.5]], [[0.0]], [[1.0]], [[1.0]])

    def test_iteration_cap_raises(self):
        # marginally stable, uncontrollable: P grows linearly forever
        with pytest.raises(UnstabilizableSystemError):
            solve_dare([[1.0]], [[0.0]], [[1.0]], [[1.0]], max_iterations=500)

    def test_nominal_plant_residual_and_scipy_agreement(self, discrete_model):
        w = default_weights()
        p, k = solve_dare(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost
        )
        res = dare_residual(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost, p
        )
        assert res < 1e-10
        p_scipy = sla.solve_discrete_are(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost
        )
        assert np.abs(p - p_scipy).max() / np.abs(p_scipy).max() < 1e-9


class TestDoublingSolver:
    def test_agrees_with_plain_iteration_on_nominal_plant(self, discrete_model):
        w = default_weights()
        p1, k1 = solve_dare(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost
        )
        p2, k2 = solve_dare_doubling(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost
        )
        assert np.abs(p1 - p2).max() / np.abs(p1).max() < 1e-12
        np.testing.assert_allclose(k1, k2, rtol=1e-9)
        res = dare_residual(
            discrete_model.a_mat, discrete_model.b_mat, w.state_cost, w.input_cost, p2
        )
        assert res < 1e-10

    def test_golden_ratio(self):
        p, k = solve_dare_doubling([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert p[0, 0] == pytest.approx(GOLDEN, abs=1e-12)

    def test_agrees_on_random_plants(self):
        rng = np.random.default_rng(42)
        for _ in range(15):
            n = rng.integers(2, 5)
            a = rng.normal(size=(n, n))
            a *= 1.1 / np.abs(np.linalg.eigvals(a)).max()  # mildly unstable
            b = rng.normal(size=(n, 1))
            q = np.eye(n)
            r = np.array([[1.0]])
            p1, _ = solve_dare(a, b, q, r)
            p2, _ = solve_dare_doubling(a, b, q, r)
            assert np.abs(p1 - p2).max() / max(1.0, np.abs(p1).max()) < 1e-9

    def test_uncontrollable_unstable_plant_raises(self):
        with pytest.raises(UnstabilizableSystemError):
            solve_dare_doubling([[1.5]], [[0.0]], [[1.0]], [[1.0]])


class TestWeights:
    def test_asymmetric_state_cost_rejected(self):
        q = np.diag([1.0, 1.0, 1.0, 1.0])
        q[0, 1] = 0.5
        with pytest.raises(WeightError):
            LqrWeights(q, np.array([[0.1]]))

    def test_indefinite_state_cost_rejected(self):
        with pytest.raises(WeightError):
            LqrWeights(np.diag([1.0, -0.5, 1.0, 1.0]), np.array([[0.1]]))

    def test_nonpositive_input_cost_rejected(self):
        with pytest.raises(WeightError):
            LqrWeights(np.eye(4), np.array([[0.0]]))


class TestDesign:
    def test_design_invariants(self, nominal_design):
        d = nominal_design
        assert d.residual < 1e-10
        assert d.spectral_radius < 1.0
        np.testing.assert_allclose(d.riccati, d.riccati.T, atol=1e-9)
        assert np.linalg.eigvalsh(d.riccati).min() > 0

    def test_requires_discrete_model(self, straight_params):
        with pytest.raises(WeightError):
            design_controller(linearize(straight_params), default_weights())

    def test_every_shipped_pose_preset_is_stabilized(self, links, limits):
        from wipsim.harness import POSE_PRESETS

        sched = GainScheduler(links, default_weights(), limits=limits)
        for name, pose in POSE_PRESETS.items():
            design = sched.design_for(pose)
            assert design.spectral_radius < 1.0, name
            assert design.residual < 1e-10, name

    def test_residual_invariant_on_random_plants(self):
        rng = np.random.default_rng(3)
        produced = 0
        while produced < 12:
            a = rng.normal(size=(4, 4))
            a *= rng.uniform(0.8, 1.2) / np.abs(np.linalg.eigvals(a)).max()
            b = rng.normal(size=(4, 1))
            q = np.diag(rng.uniform(0.1, 5.0, size=4))
            r = np.array([[rng.uniform(0.05, 2.0)]])
            for method in ("iteration", "doubling"):
                model = LinearModel(a, b, discrete=True, dt=1e-3)
                design = design_controller(model, LqrWeights(q, r), method=method)
                assert design.residual < 1e-10
                assert design.spectral_radius < 1.0
            produced += 1

    def test_more_expensive_actuation_never_raises_gains(self, discrete_model):
        w = default_weights()
        d1 = design_controller(discrete_model, w)
        expensive = LqrWeights(w.state_cost, w.input_cost * 100.0)
        d2 = design_controller(discrete_model, expensive)
        assert np.abs(d2.gain).max() <= np.abs(d1.gain).max()


class TestControlLaw:
    def test_zero_error_gives_zero_torque(self, nominal_design):
        state = PendulumState(0.3, 0.1, 0.02, -0.05)
        u = control(nominal_design, state, reference=state)
        assert u.torque == 0.0 and not u.saturated

    def test_linear_in_the_error(self, nominal_design):
        state = PendulumState(0.1, 0.0, 0.03, 0.2)
        ref = PendulumState(0.05, 0.0, 0.0, 0.0)
        u = control(nominal_design, state, ref, torque_limit=1e9)
        err = state.as_array() - ref.as_array()
        assert u.torque == pytest.approx(float(-(nominal_design.gain @ err)[0]), rel=1e-15)

    def test_saturation_clamps_and_flags(self, nominal_design):
        state = PendulumState(theta=0.5)  # demands far more than the limit
        u = control(nominal_design, state, torque_limit=5.0)
        assert abs(u.torque) == 5.0 and u.saturated


class TestEvaluateCost:
    def test_zero_trajectory_costs_nothing(self):
        w = LqrWeights(np.eye(4), np.array([[1.0]]))
        states = [PendulumState()] * 10
        inputs = [0.0] * 10
        assert evaluate_cost(states, inputs, w) == 0.0

    def test_single_step_unit_state(self):
        w = LqrWeights(np.eye(4), np.array([[1.0]]))
        assert evaluate_cost([PendulumState(x=1.0)], [0.0], w) == 1.0
        assert evaluate_cost([PendulumState()], [ControlInput(2.0)], w) == 4.0

    def test_length_mismatch_rejected(self):
        w = default_weights()
        with pytest.raises(WeightError):
            evaluate_cost([PendulumState()], [], w)

    def test_designed_gain_beats_perturbed_gains(self, discrete_model, nominal_design):
        # simulation oracle: roll the closed loop out to machine-level decay
        w = default_weights()
        a_mat, b_mat = discrete_model.a_mat, discrete_model.b_mat
        x0 = np.array([0.2, 0.0, 0.05, 0.0])

        def closed_loop_cost(gain):
            x = x0.copy()
            q, r = w.state_cost, float(w.input_cost[0, 0])
            total = 0.0
            for _ in range(400_000):
                u = float(-(gain @ x)[0])
                step_cost = float(x @ q @ x) + r * u * u
                total += step_cost
                if not np.isfinite(total) or total > 1e12:
                    return math.inf
                x = a_mat @ x + (b_mat * u).ravel()
                if step_cost < 1e-12:
                    break
            return total

        j_opt = closed_loop_cost(nominal_design.gain)
        # the DARE solution predicts the infinite-horizon cost from x0
        assert j_opt == pytest.approx(float(x0 @ nominal_design.riccati @ x0), rel=1e-4)
        rng = np.random.default_rng(11)
        scale = 0.1 * np.linalg.norm(nominal_design.gain)
        for _ in range(10):
            delta = rng.normal(size=(1, 4))
            delta *= scale / np.linalg.norm(delta)
            assert closed_loop_cost(nominal_design.gain + delta) >= j_opt - 1e-9


class TestGainScheduler:
    def test_same_pose_is_a_cache_hit_with_identical_gains(self, links, limits):
        sched = GainScheduler(links, default_weights(), limits=limits)
        pose = JointConfiguration.symmetric(hip_pitch=-0.3, knee_pitch=0.6)
        d1 = sched.design_for(pose)
        d2 = sched.design_for(pose)
        assert d1 is d2
        assert np.array_equal(d1.gain, d2.gain)

    def test_pose_change_changes_the_design(self, links, limits):
        sched = GainScheduler(links, default_weights(), limits=limits)
        straight = sched.design_for(JointConfiguration.symmetric())
        squat = sched.design_for(
            JointConfiguration.symmetric(hip_pitch=-0.8, knee_pitch=1.6)
        )
        assert not np.array_equal(straight.gain, squat.gain)

    def test_mirror_symmetric_pair_shares_a_design(self, links, limits):
        sched = GainScheduler(links, default_weights(), limits=limits)
        pose = JointConfiguration.symmetric(hip_roll=-0.1, hip_pitch=-0.4, knee_pitch=0.8)
        d1 = sched.design_for(pose)
        d2 = sched.design_for(pose.relabeled())
        assert np.array_equal(d1.gain, d2.gain)

    def test_quantization_bins_nearby_poses(self, links, limits):
        sched = GainScheduler(links, default_weights(), limits=limits)
        d1 = sched.design_for(JointConfiguration.symmetric(hip_pitch=-0.30002))
        d2 = sched.design_for(JointConfiguration.symmetric(hip_pitch=-0.30014))
        assert d1 is d2

    def test_nowait_serves_stale_then_converges(self, links, limits):
        sched = GainScheduler(links, default_weights(), limits=limits)
        straight = sched.design_for(JointConfiguration.symmetric())
        squat_pose = JointConfiguration.symmetric(hip_pitch=-0.8, knee_pitch=1.6)
        first = sched.design_nowait(squat_pose)
        assert first is straight  # stale gain while the worker computes
        deadline = time.time() + 5.0
        while time.time() < deadline:
            candidate = sched.design_nowait(squat_pose)
            if candidate is not first:
                break
            time.sleep(0.01)
        fresh = sched.design_nowait(squat_pose)
        assert fresh is not straight
        np.testing.assert_allclose(
            fresh.gain, sched.design_for(squat_pose).gain, rtol=0, atol=0
        )
