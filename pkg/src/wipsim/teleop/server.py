"""Real-time teleop session: physics loop plus a WebSocket telemetry seam.

One server owns one simulated robot. The physics advances at the 1 ms tick
in wall time (20 ticks per wakeup); telemetry goes out at 50 Hz. The first
client to connect takes the commander role; everyone else observes. The
latest command frame is a mailbox read by the physics loop, so commands
never block the tick.

Commands carry (vx, yaw_rate, pose). The yaw rate is accepted but unused:
yaw dynamics are outside the reduced planar model, and the field exists so
the command surface matches the joystick. A fall resets the robot upright
and the session continues; teleoperation is a demo surface, not an
experiment.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import dataclass

import numpy as np

from ..dynamics import (
    DEFAULT_TIMESTEP,
    DEFAULT_TORQUE_LIMIT,
    PendulumState,
    step_rk4,
)
from ..estimation import ComplementaryEstimator, sample_sensors
from ..legmodel import (
    LIMITED_JOINTS,
    JointLimits,
    LinkParams,
    nominal_link_config,
    reduce_to_pendulum,
)
from ..lqr import GainScheduler, LqrWeights, control
from ..ppo.env import EnvConfig
from ..ppo.net import PolicyNet
from ..protocol import is_valid_frame
from . import ws
from ..harness.runner import FALL_TILT, PolicyController, PoseTracker, default_weights
from ..harness.scenario import POSE_PRESETS, Scenario

logger = logging.getLogger("wipsim.teleop")

TELEMETRY_HZ = 50.0
MAX_COMMAND_SPEED = 0.5  # m/s, matches the cmd frame schema

# real-time contract: a thousand physics ticks must cost at most a second
REALTIME_BUDGET_S = 1.0
REALTIME_WINDOW_TICKS = 1000


@dataclass
class _Client:
    conn: ws.WsConnection
    commander: bool


class TeleopServer:
    def __init__(
        self,
        scenario: Scenario | None = None,
        links: LinkParams | None = None,
        limits: JointLimits | None = None,
        weights: LqrWeights | None = None,
        policy: PolicyNet | None = None,
        host: str = "127.0.0.1",
        port: int = 8765,
        dt: float = DEFAULT_TIMESTEP,
        torque_limit: float = DEFAULT_TORQUE_LIMIT,
    ):
        if links is None:
            links, nominal_limits = nominal_link_config()
            limits = limits or nominal_limits
        self.links = links
        self.limits = limits or JointLimits()
        self.weights = weights or default_weights()
        self.scenario = scenario or Scenario(name="teleop")
        self.host = host
        self.port = port
        self.dt = dt
        self.torque_limit = torque_limit
        self.mode = "policy" if policy is not None else "lqr"
        self._policy_ctl = (
            PolicyController(policy, EnvConfig(physics_dt=dt, torque_limit=torque_limit))
            if policy is not None
            else None
        )

        self._clients: list[_Client] = []
        self._commander: _Client | None = None
        self._cmd = {"vx": 0.0, "yaw_rate": 0.0, "pose": None}
        self._server: asyncio.Server | None = None
        self._physics_task: asyncio.Task | None = None

        # simulation state
        self._scheduler = GainScheduler(self.links, self.weights, dt=dt, limits=self.limits)
        self._tracker = PoseTracker(
            POSE_PRESETS[self.scenario.pose], self.scenario.locks, dt=dt
        )
        self._config = self._tracker.config()
        self._params = reduce_to_pendulum(self._config, self.links, self.limits)
        self._scheduler.design_for(self._config)  # seed the gain cache
        self._estimator = ComplementaryEstimator(
            self._params, gyro_bias=self.scenario.noise.gyro_bias, dt=dt
        )
        self._rng = np.random.default_rng(np.random.SeedSequence(self.scenario.seed))
        self._truth = self.scenario.initial_state
        self._tick = 0
        self._torque = 0.0
        self._vx_ref = 0.0
        self._hold_x: float | None = None
        self._work_seconds = 0.0
        self._work_ticks = 0

    # -- lifecycle -----------------------------------------------------------

    async def start(self):
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._physics_task = asyncio.create_task(self._physics_loop())
        logger.info("teleop server on ws://%s:%d", self.host, self.port)
        return self

    async def stop(self):
        if self._physics_task is not None:
            self._physics_task.cancel()
            try:
                await self._physics_task
            except asyncio.CancelledError:
                pass
        for client in list(self._clients):
            await client.conn.close()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self):
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()

    # -- client side ----------------------------------------------------------

    async def _handle(self, reader, writer):
        try:
            conn = await ws.accept(reader, writer)
        except Exception:
            return
        client = _Client(conn, commander=self._commander is None)
        if client.commander:
            self._commander = client
        self._clients.append(client)
        await self._send(client, {"type": "role",
                                  "role": "commander" if client.commander else "observer"})
        try:
            while True:
                text = await conn.recv_text()
                if text is None:
                    break
                try:
                    frame = json.loads(text)
                except json.JSONDecodeError:
                    await self._send(client, {"type": "error", "code": "bad-frame"})
                    continue
                if not isinstance(frame, dict) or not is_valid_frame("cmd", frame):
                    await self._send(client, {"type": "error", "code": "bad-frame"})
                    continue
                if not client.commander:
                    await self._send(client, {"type": "error", "code": "commander-occupied"})
                    continue
                pose = frame.get("pose")
                if pose is not None and pose not in POSE_PRESETS:
                    await self._send(client, {"type": "error", "code": "unknown-pose"})
                    continue
                self._cmd = {
                    "vx": float(frame.get("vx", 0.0)),
                    "yaw_rate": float(frame.get("yaw_rate", 0.0)),
                    "pose": pose,
                }
        finally:
            if client in self._clients:
                self._clients.remove(client)
            if self._commander is client:
                self._commander = None  # next connection may take command
                self._cmd = {"vx": 0.0, "yaw_rate": 0.0, "pose": None}
            await conn.close()

    async def _send(self, client: _Client, frame: dict):
        try:
            await client.conn.send_text(json.dumps(frame))
        except (ConnectionResetError, OSError):
            if client in self._clients:
                self._clients.remove(client)

    async def _broadcast(self, frame: dict):
        text = json.dumps(frame)
        for client in list(self._clients):
            try:
                await client.conn.send_text(text)
            except (ConnectionResetError, OSError):
                if client in self._clients:
                    self._clients.remove(client)

    # -- physics ----------------------------------------------------------------

    def _step_block(self, ticks: int):
        """Advance the simulation by `ticks` physics steps."""
        cmd = self._cmd
        vx = max(-MAX_COMMAND_SPEED, min(MAX_COMMAND_SPEED, cmd["vx"]))
        if vx != self._vx_ref:
            self._vx_ref = vx
            self._hold_x = None
        if cmd["pose"] is not None:
            self._tracker.command(POSE_PRESETS[cmd["pose"]])

        for _ in range(ticks):
            if self._tracker.tick(self._tick):
                self._config = self._tracker.config()
                self._params = reduce_to_pendulum(self._config, self.links, self.limits)
                self._estimator.params = self._params
            sample = sample_sensors(
                self._truth,
                self._config,
                self.scenario.noise,
                self._rng,
                t=self._tick * self.dt,
                wheel_radius=self._params.wheel_radius,
            )
            estimate = self._estimator.update(sample)

            if self._vx_ref == 0.0:
                if self._hold_x is None:
                    self._hold_x = estimate.x
                reference = PendulumState(self._hold_x, 0.0, 0.0, 0.0)
            else:
                reference = PendulumState(estimate.x, self._vx_ref, 0.0, 0.0)

            if self.mode == "policy" and self._policy_ctl is not None:
                u = self._policy_ctl.command(self._tick, estimate, self._vx_ref)
            else:
                design = self._scheduler.design_nowait(self._config)
                u = control(design, estimate, reference, torque_limit=self.torque_limit)
            self._torque = u.torque

            self._truth = step_rk4(self._truth, self._params, u, self.dt)
            self._tick += 1
            if abs(self._truth.theta) > FALL_TILT:
                logger.warning("fall at t=%.3f s; resetting upright", self._tick * self.dt)
                self._truth = PendulumState()
                self._estimator = ComplementaryEstimator(
                    self._params, gyro_bias=self.scenario.noise.gyro_bias, dt=self.dt
                )
                self._hold_x = None

    def _state_frame(self) -> dict:
        joints = {}
        for side in ("left", "right"):
            leg = self._config.joints(side)
            joints[side] = {j: leg.value(j) for j in LIMITED_JOINTS}
        return {
            "type": "state",
            "t": self._tick * self.dt,
            "x": self._truth.x,
            "xdot": self._truth.xdot,
            "theta": self._truth.theta,
            "thetadot": self._truth.thetadot,
            "torque": self._torque,
            "joints": joints,
            "mode": self.mode,
        }

    async def _physics_loop(self):
        loop = asyncio.get_running_loop()
        period = 1.0 / TELEMETRY_HZ
        ticks_per_wake = max(1, round(period / self.dt))
        next_wake = loop.time()
        while True:
            began = time.perf_counter()
            self._step_block(ticks_per_wake)
            self._work_seconds += time.perf_counter() - began
            self._work_ticks += ticks_per_wake
            if self._work_ticks >= REALTIME_WINDOW_TICKS:
                per_thousand = self._work_seconds * REALTIME_WINDOW_TICKS / self._work_ticks
                level = logging.WARNING if per_thousand > REALTIME_BUDGET_S else logging.DEBUG
                logger.log(level, "physics cost %.3f s per 1000 ticks", per_thousand)
                self._work_seconds = 0.0
                self._work_ticks = 0
            await self._broadcast(self._state_frame())
            next_wake += period
            delay = next_wake - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_wake = loop.time()  # fell behind; do not burst to catch up


def teleop_serve(
    port: int = 8765,
    scenario: Scenario | None = None,
    policy_file: str | None = None,
    host: str = "127.0.0.1",
    **kwargs,
):
    """Blocking entry point for the CLI."""
    policy = PolicyNet.load(policy_file) if policy_file else None
    server = TeleopServer(
        scenario=scenario, policy=policy, host=host, port=port, **kwargs
    )
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
