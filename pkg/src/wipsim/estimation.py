"""Simulated IMU/encoder sensing and state reconstruction.

The sensor model is additive: Gaussian white noise plus a constant gyro
bias, and floor quantization on encoder angles. The estimator is a
complementary filter on tilt (integrated gyro blended with the absolute
tilt observation), a bias-corrected gyro rate, and wheel-encoder odometry
for the translation states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DEFAULT_TIMESTEP, PendulumState
from .errors import ConfigError, StreamOrderError
from .legmodel import JOINT_NAMES, JointConfiguration, LegJoints, PendulumParams

SENSOR_RATE_HZ = 1000.0

# Blend factor of the complementary filter at the 1 kHz tick: weight of the
# integrated gyro path vs the absolute tilt observation.
DEFAULT_BLEND = 0.98


@dataclass(frozen=True)
class NoiseModel:
    """Sensor corruption levels; all-zero means ideal sensors.

    Sigmas are per-sample standard deviations at the 1 kHz tick.
    """

    gyro_sigma: float = 0.0  # rad/s
    gyro_bias: float = 0.0  # rad/s, constant
    tilt_sigma: float = 0.0  # rad
    encoder_quantum: float = 0.0  # rad

    def __post_init__(self):
        for name in ("gyro_sigma", "tilt_sigma", "encoder_quantum"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @staticmethod
    def nominal() -> "NoiseModel":
        # 16-bit encoders; gyro figures typical of a small MEMS unit
        return NoiseModel(
            gyro_sigma=0.005,
            gyro_bias=0.002,
            tilt_sigma=0.01,
            encoder_quantum=2.0 * math.pi / 65536.0,
        )


@dataclass(frozen=True)
class SensorSample:
    """One 1 kHz sensor tick."""

    t: float
    gyro_roll: float
    gyro_pitch: float
    gyro_yaw: float
    tilt_obs: float
    left_angles: LegJoints
    right_angles: LegJoints
    left_rates: LegJoints
    right_rates: LegJoints


def _quantize(value: float, quantum: float) -> float:
    if quantum <= 0.0:
        return value
    return math.floor(value / quantum) * quantum


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_sensors(
    true_state: PendulumState,
    config: JointConfiguration,
    noise: NoiseModel,
    rng,
    t: float = 0.0,
    wheel_radius: float = 0.08,
) -> SensorSample:
    """Simulate one sensor tick from ground truth.

    The wheel encoders report the rolling angle x/R and its rate; joint
    encoder angles are floor-quantized, encoder rates pass through. The
    gyro bias corrupts all three axes.
    """
    rng = _as_rng(rng)
    gyro = rng.normal(0.0, noise.gyro_sigma, size=3) if noise.gyro_sigma > 0 else np.zeros(3)
    tilt_noise = rng.normal(0.0, noise.tilt_sigma) if noise.tilt_sigma > 0 else 0.0

    wheel_angle = true_state.x / wheel_radius
    wheel_rate = true_state.xdot / wheel_radius

    def encode(leg: LegJoints) -> LegJoints:
        vals = {
            j: _quantize(leg.value(j), noise.encoder_quantum) for j in JOINT_NAMES
        }
        vals["wheel"] = _quantize(wheel_angle, noise.encoder_quantum)
        return LegJoints(**vals)

    def rates_of(leg_rates: LegJoints) -> LegJoints:
        vals = leg_rates.as_dict()
        vals["wheel"] = wheel_rate
        return LegJoints(**vals)

    return SensorSample(
        t=t,
        gyro_roll=float(gyro[0]) + noise.gyro_bias,
        gyro_pitch=true_state.thetadot + float(gyro[1]) + noise.gyro_bias,
        gyro_yaw=float(gyro[2]) + noise.gyro_bias,
        tilt_obs=true_state.theta + float(tilt_noise),
        left_angles=encode(config.joints("left")),
        right_angles=encode(config.joints("right")),
        left_rates=rates_of(config.rates("left")),
        right_rates=rates_of(config.rates("right")),
    )


class ComplementaryEstimator:
    """Reconstructs [x, xdot, theta, thetadot] from the sensor stream.

    Tilt: theta <- blend * (theta + gyro_pitch * dt) + (1 - blend) * tilt_obs.
    Tilt rate: gyro pitch minus the calibrated bias. Translation: wheel
    odometry, xdot = R * mean wheel rate, x integrated from xdot. The first
    sample initializes tilt from the absolute observation and x from the
    wheel angle.
    """

    def __init__(
        self,
        params: PendulumParams,
        blend: float = DEFAULT_BLEND,
        gyro_bias: float = 0.0,
        dt: float = DEFAULT_TIMESTEP,
    ):
        if not 0.0 <= blend <= 1.0:
            raise ConfigError(f"blend must be in [0, 1], got {blend}")
        self.params = params
        self.blend = blend
        self.gyro_bias = gyro_bias
        self.dt = dt
        self._t_last: float | None = None
        self._theta = 0.0
        self._x = 0.0

    def update(self, sample: SensorSample) -> PendulumState:
        if self._t_last is not None and sample.t <= self._t_last:
            raise StreamOrderError(
                f"sample at t={sample.t} after t={self._t_last}"
            )
        radius = self.params.wheel_radius
        wheel_rate = 0.5 * (sample.left_rates.wheel + sample.right_rates.wheel)
        xdot = radius * wheel_rate
        thetadot = sample.gyro_pitch - self.gyro_bias

        if self._t_last is None:
            self._theta = sample.tilt_obs
            wheel_angle = 0.5 * (sample.left_angles.wheel + sample.right_angles.wheel)
            self._x = radius * wheel_angle
        else:
            dt = sample.t - self._t_last
            self._theta = (
                self.blend * (self._theta + sample.gyro_pitch * dt)
                + (1.0 - self.blend) * sample.tilt_obs
            )
            self._x += xdot * dt
        self._t_last = sample.t
        return PendulumState(self._x, xdot, self._theta, thetadot)


def estimate(
    samples,
    params: PendulumParams,
    blend: float = DEFAULT_BLEND,
    gyro_bias: float = 0.0,
):
    """Run the complementary estimator over a sample stream; yields one
    state estimate per sample."""
    est = ComplementaryEstimator(params, blend=blend, gyro_bias=gyro_bias)
    for sample in samples:
        yield est.update(sample)


# ---------------------------------------------------------------------------
# Sensor log CSV (for replay-based estimator tests)
# ---------------------------------------------------------------------------

def _enc_columns() -> list[str]:
    cols = []
    for side in ("l", "r"):
        cols += [f"enc_{side}_{j}" for j in JOINT_NAMES]
        cols += [f"encv_{side}_{j}" for j in JOINT_NAMES]
    return cols


SENSOR_LOG_HEADER = ["t", "gyro_r", "gyro_p", "gyro_y", "tilt_obs"] + _enc_columns()


def write_sensor_log(path, samples: list[SensorSample]):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SENSOR_LOG_HEADER) + "\n")
        for s in samples:
            vals = [s.t, s.gyro_roll, s.gyro_pitch, s.gyro_yaw, s.tilt_obs]
            for angles, rates in ((s.left_angles, s.left_rates), (s.right_angles, s.right_rates)):
                vals += [angles.value(j) for j in JOINT_NAMES]
                vals += [rates.value(j) for j in JOINT_NAMES]
            fh.write(",".join(f"{v:.15g}" for v in vals) + "\n")


def read_sensor_log(path) -> list[SensorSample]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != SENSOR_LOG_HEADER:
            raise ConfigError(f"unexpected sensor log header in {path}")
        samples = []
        for line in fh:
            if not line.strip():
                continue
            vals = [float(v) for v in line.strip().split(",")]
            t, gr, gp, gy, tilt = vals[:5]
            rest = vals[5:]
            legs = []
            for i in range(2):
                base = i * 2 * len(JOINT_NAMES)
                angles = LegJoints(**dict(zip(JOINT_NAMES, rest[base:base + 5])))
                rates = LegJoints(**dict(zip(JOINT_NAMES, rest[base + 5:base + 10])))
                legs.append((angles, rates))
            samples.append(
                SensorSample(
                    t=t, gyro_roll=gr, gyro_pitch=gp, gyro_yaw=gy, tilt_obs=tilt,
                    left_angles=legs[0][0], left_rates=legs[0][1],
                    right_angles=legs[1][0], right_rates=legs[1][1],
                )
            )
    return samples
