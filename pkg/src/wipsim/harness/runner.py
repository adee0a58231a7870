"""Scenario execution: estimator-in-the-loop simulation, DOF-lock sweeps
and controller mode switching.

The loop advances the physics at the 1 ms tick. Each tick samples sensors,
updates the estimator, asks the active controller for torque, records the
trajectory row, applies any scheduled disturbance, then integrates. The
controller never sees ground truth unless the scenario sets `truth_feed`.

Metrics are computed from the values exactly as they appear in the exported
CSV (15 significant digits), so re-deriving a metric from the file
reproduces the report bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..dynamics import (
    DEFAULT_TIMESTEP,
    DEFAULT_TORQUE_LIMIT,
    ControlInput,
    PendulumState,
    step_rk4,
    write_trajectory_csv,
)
from ..errors import ScenarioError
from ..estimation import ComplementaryEstimator, sample_sensors
from ..legmodel import (
    LIMITED_JOINTS,
    SIDES,
    JointConfiguration,
    JointLimits,
    LegJoints,
    LinkParams,
    nominal_link_config,
    reduce_to_pendulum,
)
from ..lqr import GainScheduler, LqrWeights, control
from ..ppo.env import EnvConfig
from ..ppo.net import PolicyNet
from .metrics import MetricsReport, rms, settling_time
from .scenario import (
    POSE_PRESETS,
    DofLock,
    Scenario,
    mask_name,
)

FALL_TILT = 0.7  # rad; well inside the model's validity range
SETTLE_BAND = 0.01  # rad
POSE_SLEW_RATE = 1.0  # rad/s per joint during playback
POSE_UPDATE_PERIOD = 0.02  # s; pose targets move at 50 Hz

DEFAULT_WEIGHT_DIAG = (1.0, 1.0, 10.0, 1.0)
DEFAULT_INPUT_WEIGHT = 0.1

JOINT_COLUMNS = [f"{side[0]}_{joint}" for side in SIDES for joint in LIMITED_JOINTS]
JOINTS_HEADER = "t," + ",".join(
    [f"angle_{c}" for c in JOINT_COLUMNS] + [f"dev_{c}" for c in JOINT_COLUMNS]
)


def default_weights() -> LqrWeights:
    return LqrWeights.from_diagonal(DEFAULT_WEIGHT_DIAG, DEFAULT_INPUT_WEIGHT)


class PoseTracker:
    """Kinematic pose playback with per-joint slew limiting and DOF locks.

    Keeps two copies of the pose: the free playback that follows commands
    exactly, and the actual pose whose locked joints stay pinned. Their
    difference is what the joint-space deviation metric measures.
    """

    def __init__(
        self,
        initial: JointConfiguration,
        locks: tuple[DofLock, ...],
        dt: float = DEFAULT_TIMESTEP,
        slew_rate: float = POSE_SLEW_RATE,
        update_period: float = POSE_UPDATE_PERIOD,
    ):
        self.dt = dt
        self.slew = slew_rate
        self.period_ticks = max(1, round(update_period / dt))
        self.update_period = self.period_ticks * dt
        self.locked = {(lock.side, lock.joint): lock.hold_angle for lock in locks}
        self.free = {
            (side, joint): initial.joints(side).value(joint)
            for side in SIDES
            for joint in LIMITED_JOINTS
        }
        self.target = dict(self.free)
        self.actual = {
            key: self.locked.get(key, angle) for key, angle in self.free.items()
        }
        self.rates = {key: 0.0 for key in self.free}

    def command(self, pose: JointConfiguration):
        self.target = {
            (side, joint): pose.joints(side).value(joint)
            for side in SIDES
            for joint in LIMITED_JOINTS
        }

    def tick(self, k: int) -> bool:
        """Advance playback; returns True when any joint moved."""
        if k % self.period_ticks != 0:
            return False
        max_step = self.slew * self.update_period
        changed = False
        for key, target in self.target.items():
            current = self.free[key]
            step = max(-max_step, min(max_step, target - current))
            if step == 0.0:
                if self.rates[key] != 0.0:
                    self.rates[key] = 0.0
                    changed = True
                continue
            new = current + step
            self.rates[key] = step / self.update_period if key not in self.locked else 0.0
            self.free[key] = new
            self.actual[key] = self.locked.get(key, new)
            changed = True
        return changed

    def _leg(self, values: dict, side: str) -> LegJoints:
        return LegJoints(**{joint: values[(side, joint)] for joint in LIMITED_JOINTS})

    def config(self) -> JointConfiguration:
        return JointConfiguration(
            left=self._leg(self.actual, "left"),
            right=self._leg(self.actual, "right"),
            left_rates=self._leg(self.rates, "left"),
            right_rates=self._leg(self.rates, "right"),
        )

    def deviations(self) -> list[float]:
        return [
            self.actual[(side, joint)] - self.free[(side, joint)]
            for side in SIDES
            for joint in LIMITED_JOINTS
        ]

    def actual_angles(self) -> list[float]:
        return [self.actual[(side, joint)] for side in SIDES for joint in LIMITED_JOINTS]


class PolicyController:
    """Runs a trained policy at the 50 Hz action period, holding torque
    in between. Uses the deterministic mean action."""

    def __init__(self, policy: PolicyNet, env_config: EnvConfig | None = None):
        self.policy = policy
        self.config = env_config or EnvConfig()
        self.period_ticks = self.config.substeps
        self.prev_action = 0.0
        self.torque = 0.0
        self._phase = 0

    def warm_start(self, torque: float):
        self.torque = torque
        self.prev_action = torque / self.config.action_scale
        self._phase = 0

    def command(self, k: int, estimate: PendulumState, vx_ref: float) -> ControlInput:
        if self._phase % self.period_ticks == 0:
            obs = np.array(
                [
                    estimate.theta,
                    estimate.thetadot,
                    estimate.xdot - vx_ref,
                    self.prev_action,
                ]
            )
            raw = float(self.policy.mean_action(obs)[0])
            limit = self.config.torque_limit
            self.torque = max(-limit, min(limit, raw * self.config.action_scale))
            self.prev_action = raw
        self._phase += 1
        saturated = abs(self.torque) >= self.config.torque_limit
        return ControlInput(self.torque, saturated=saturated)


@dataclass
class RunResult:
    scenario: Scenario
    rows: list[str]
    joint_rows: list[str]
    report: MetricsReport
    final_state: PendulumState

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "trajectory": out / "trajectory.csv",
            "joints": out / "joints.csv",
            "metrics": out / "metrics.json",
        }
        write_trajectory_csv(paths["trajectory"], self.rows)
        with open(paths["joints"], "w", newline="") as fh:
            fh.write(JOINTS_HEADER + "\n")
            for row in self.joint_rows:
                fh.write(row + "\n")
        paths["metrics"].write_text(self.report.to_json())
        return paths


def run_scenario(
    scenario: Scenario,
    links: LinkParams | None = None,
    limits: JointLimits | None = None,
    weights: LqrWeights | None = None,
    dt: float = DEFAULT_TIMESTEP,
    torque_limit: float = DEFAULT_TORQUE_LIMIT,
    out_dir: str | Path | None = None,
) -> RunResult:
    """Simulate one scenario and aggregate its stability metrics.

    A fall ends the run early with the fall flag set; that is a result,
    not an error. Each run builds a fresh gain scheduler so the outcome
    depends only on the scenario and seed.
    """
    if links is None:
        links, nominal_limits = nominal_link_config()
        limits = limits or nominal_limits
    limits = limits or JointLimits()
    weights = weights or default_weights()
    scenario = scenario.validated(limits)

    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed))
    scheduler = GainScheduler(links, weights, dt=dt, limits=limits)
    tracker = PoseTracker(POSE_PRESETS[scenario.pose], scenario.locks, dt=dt)

    policy_ctl: PolicyController | None = None
    if scenario.policy_file:
        policy_ctl = PolicyController(
            PolicyNet.load(scenario.policy_file),
            EnvConfig(physics_dt=dt, torque_limit=torque_limit),
        )

    config = tracker.config()
    params = reduce_to_pendulum(config, links, limits)
    estimator = ComplementaryEstimator(params, gyro_bias=scenario.noise.gyro_bias, dt=dt)

    truth = scenario.initial_state
    active = scenario.controller
    switches = sorted(scenario.switches, key=lambda s: s.t)
    disturbances = sorted(scenario.disturbances, key=lambda d: d.t)
    references = sorted(scenario.references, key=lambda r: r.t)
    next_switch = 0
    next_dist = 0
    next_ref = 0

    vx_ref = 0.0
    hold_x = None  # latched on entering hold mode; None until first estimate

    n_ticks = round(scenario.duration_s / dt)
    rows: list[str] = []
    joint_rows: list[str] = []
    theta_col: list[float] = []
    thetadot_col: list[float] = []
    t_col: list[float] = []
    dev_rows: list[list[float]] = []
    fall = False
    saturation_count = 0
    cost = 0.0
    q_cost = weights.state_cost
    r_cost = float(weights.input_cost[0, 0])

    for k in range(n_ticks):
        t = k * dt

        # pose playback; the plant is re-reduced only when the pose moved
        if tracker.tick(k):
            config = tracker.config()
            params = reduce_to_pendulum(config, links, limits)
            estimator.params = params

        # commands that activate this tick
        while next_ref < len(references) and references[next_ref].t <= t:
            ref_cmd = references[next_ref]
            if ref_cmd.pose is not None:
                tracker.command(POSE_PRESETS[ref_cmd.pose])
            if ref_cmd.vx is not None:
                vx_ref = ref_cmd.vx
                hold_x = None  # re-latch when the command drops back to zero
            next_ref += 1
        while next_switch < len(switches) and switches[next_switch].t <= t:
            incoming = switches[next_switch].controller
            if incoming != active:
                active = incoming
            next_switch += 1

        # sense and estimate; the controller sees only the estimate
        sample = sample_sensors(
            truth, config, scenario.noise, rng, t=t, wheel_radius=params.wheel_radius
        )
        estimate = truth if scenario.truth_feed else estimator.update(sample)

        # reference: hold position when vx_ref is zero, otherwise pure
        # velocity tracking (position error zeroed against the estimate)
        if vx_ref == 0.0:
            if hold_x is None:
                hold_x = estimate.x
            reference = PendulumState(hold_x, 0.0, 0.0, 0.0)
        else:
            reference = PendulumState(estimate.x, vx_ref, 0.0, 0.0)

        if active == "policy":
            if policy_ctl is None:
                raise ScenarioError("policy controller requested but not loaded")
            u = policy_ctl.command(k, estimate, vx_ref)
        else:
            design = scheduler.design_for(config)
            u = control(design, estimate, reference, torque_limit=torque_limit)
            if policy_ctl is not None:
                policy_ctl.warm_start(u.torque)  # keep the idle controller warm
        if u.saturated:
            saturation_count += 1

        # record the tick as it will appear in the CSV
        row_vals = (t, truth.x, truth.xdot, truth.theta, truth.thetadot, u.torque)
        rows.append(",".join(f"{v:.15g}" for v in row_vals))
        rounded = [float(f"{v:.15g}") for v in row_vals]
        t_col.append(rounded[0])
        theta_col.append(rounded[3])
        thetadot_col.append(rounded[4])

        devs = tracker.deviations()
        angles = tracker.actual_angles()
        joint_vals = [t] + angles + devs
        joint_rows.append(",".join(f"{v:.15g}" for v in joint_vals))
        dev_rows.append([float(f"{d:.15g}") for d in devs])

        err = truth.as_array() - reference.as_array()
        cost += float(err @ q_cost @ err) + r_cost * u.torque * u.torque

        # disturbances land after sensing, so this tick's control cannot
        # depend on them
        while next_dist < len(disturbances) and disturbances[next_dist].t < t + dt:
            if disturbances[next_dist].t >= t:
                d = disturbances[next_dist]
                if d.kind == "tilt_rate":
                    truth = replace(truth, thetadot=truth.thetadot + d.value)
                else:  # push_force: impulse over one tick on the x row
                    a_coef = (
                        params.wheel_mass
                        + params.body_mass
                        + params.wheel_inertia / params.wheel_radius**2
                    )
                    truth = replace(truth, xdot=truth.xdot + d.value * dt / a_coef)
            next_dist += 1

        truth = step_rk4(truth, params, u, dt)
        if abs(truth.theta) > FALL_TILT:
            fall = True
            row_vals = (
                (k + 1) * dt, truth.x, truth.xdot, truth.theta, truth.thetadot, u.torque,
            )
            rows.append(",".join(f"{v:.15g}" for v in row_vals))
            rounded = [float(f"{v:.15g}") for v in row_vals]
            t_col.append(rounded[0])
            theta_col.append(rounded[3])
            thetadot_col.append(rounded[4])
            break

    t_arr = np.asarray(t_col)
    theta_arr = np.asarray(theta_col)
    report = MetricsReport(
        rms_theta=rms(theta_arr),
        rms_thetadot=rms(np.asarray(thetadot_col)),
        rms_joint=rms(np.asarray(dev_rows).ravel()) if dev_rows else 0.0,
        fall=fall,
        settling_s=None if fall else settling_time(t_arr, theta_arr, SETTLE_BAND),
        cost=cost,
        saturation_count=saturation_count,
        duration_s=scenario.duration_s,
    )
    result = RunResult(
        scenario=scenario,
        rows=rows,
        joint_rows=joint_rows,
        report=report,
        final_state=truth,
    )
    if out_dir is not None:
        result.write(out_dir)
    return result


def mode_switch(scenario: Scenario, **kwargs) -> RunResult:
    """Run a scenario whose controller changes at scheduled times.

    The incoming controller is warm-started from the current estimate and
    torque inside the loop; this wrapper just insists a schedule exists.
    """
    if not scenario.switches:
        raise ScenarioError("mode_switch requires a switch schedule")
    return run_scenario(scenario, **kwargs)


SWEEP_HEADER = "mask,rms_theta,rms_thetadot,rms_joint,fall,settling_s,cost_J"


def dof_sweep(
    base: Scenario,
    masks: list[tuple[DofLock, ...]],
    out_dir: str | Path | None = None,
    **kwargs,
) -> list[tuple[str, MetricsReport | None, str | None]]:
    """Run the base scenario once per DOF lock mask under identical seeds.

    Returns (mask name, report, error) per mask; a failed run keeps its
    slot with the error message so the table stays aligned with the input.
    """
    names = [mask_name(m) for m in masks]
    if len(set(names)) != len(names):
        raise ScenarioError(f"duplicate lock masks in sweep: {names}")
    results = []
    for mask, name in zip(masks, names):
        try:
            run = run_scenario(base.with_locks(mask), **kwargs)
            results.append((name, run.report, None))
        except Exception as exc:  # keep the table row, note the failure
            results.append((name, None, str(exc)))
    if out_dir is not None:
        write_sweep_outputs(results, out_dir)
    return results


def write_sweep_outputs(results, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    json_path = out / "sweep.json"
    with open(csv_path, "w", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for name, report, error in results:
            if report is None:
                fh.write(f"{name},,,,,,\n")
            else:
                settling = "" if report.settling_s is None else f"{report.settling_s:.15g}"
                fh.write(
                    f"{name},{report.rms_theta:.15g},{report.rms_thetadot:.15g},"
                    f"{report.rms_joint:.15g},{report.fall},{settling},"
                    f"{report.cost:.15g}\n"
                )
    doc = [
        {
            "mask": name,
            "error": error,
            "metrics": None if report is None else json.loads(report.to_json()),
        }
        for name, report, error in results
    ]
    json_path.write_text(json.dumps(doc, indent=2))
    return {"csv": csv_path, "json": json_path}
