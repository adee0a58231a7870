"""Nonlinear planar wheeled-inverted-pendulum dynamics.

State is [x, xdot, theta, thetadot]: wheel ground position, its rate, body
tilt from vertical, tilt rate. The control is the total wheel torque of both
wheels, acting between the wheel pair and the body.

The equations of motion form a coupled 2x2 linear system in the
accelerations:

    [ a          b cos(th) ] [xddot ]   [ M/R + b sin(th) thdot^2 ]
    [ b cos(th)  c         ] [thddot] = [ -M + m g l sin(th)      ]

with a = m_w + m_p + I_w/R^2, b = m_p l_p, c = m_p l_p^2 + I_p. The
determinant a c - b^2 cos^2(th) is strictly positive for physical
parameters, so the system is solved by the closed-form 2x2 inverse.

The integrator does not wrap the tilt angle; an unforced body that tips
over simply keeps accumulating angle. Control layers enforce their own
fall thresholds well inside |theta| < pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegrationError, InternalError
from .legmodel import PendulumParams

# Two drive motors at 18 Nm peak each, lumped.
DEFAULT_TORQUE_LIMIT = 36.0

# Shared physics tick, chosen to match the 1 kHz IMU so the estimator and
# the dynamics advance on the same clock.
DEFAULT_TIMESTEP = 1e-3

MAX_TIMESTEP = 0.01

TRAJECTORY_HEADER = "t,x,xdot,theta,thetadot,torque"


@dataclass(frozen=True)
class PendulumState:
    """Planar state [x, xdot, theta, thetadot]."""

    x: float = 0.0
    xdot: float = 0.0
    theta: float = 0.0
    thetadot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.xdot, self.theta, self.thetadot])

    @staticmethod
    def from_array(arr) -> "PendulumState":
        x, xdot, theta, thetadot = (float(v) for v in arr)
        return PendulumState(x, xdot, theta, thetadot)

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v) for v in (self.x, self.xdot, self.theta, self.thetadot)
        )

    def require_valid(self):
        """Finite components and tilt inside the model's validity range."""
        if not self.is_finite():
            raise IntegrationError(f"non-finite state {self}")
        if abs(self.theta) >= math.pi:
            raise IntegrationError(
                f"tilt {self.theta:.4f} rad outside the model range (-pi, pi)"
            )


@dataclass(frozen=True)
class ControlInput:
    """Total wheel torque (both wheels lumped), N*m."""

    torque: float = 0.0
    saturated: bool = False


@dataclass(frozen=True)
class LinearModel:
    """State-space pair; discrete models come only from `discretize`."""

    a_mat: np.ndarray  # (4, 4)
    b_mat: np.ndarray  # (4, 1)
    discrete: bool = False
    dt: float | None = None


def _coeffs(params: PendulumParams) -> tuple[float, float, float, float, float]:
    a = params.wheel_mass + params.body_mass + params.wheel_inertia / params.wheel_radius**2
    b = params.body_mass * params.com_distance
    c = params.body_mass * params.com_distance**2 + params.body_inertia
    return a, b, c, b * params.gravity, params.wheel_radius


def _accel(
    xdot: float,
    theta: float,
    thetadot: float,
    torque: float,
    a: float,
    b: float,
    c: float,
    bg: float,
    radius: float,
    viscous: float = 0.0,
) -> tuple[float, float]:
    # closed-form 2x2 solve; bg = m_p l_p g is the gravity lever term
    sth = math.sin(theta)
    cth = math.cos(theta)
    bc = b * cth
    det = a * c - bc * bc
    if det <= 0.0:
        raise InternalError("singular mass matrix for physical parameters")
    r1 = torque / radius + b * sth * thetadot * thetadot - viscous * xdot
    r2 = -torque + bg * sth
    return (c * r1 - bc * r2) / det, (a * r2 - bc * r1) / det


def accelerations(
    state: PendulumState,
    params: PendulumParams,
    u: ControlInput | float = 0.0,
    viscous_friction: float = 0.0,
) -> tuple[float, float]:
    """(xddot, thetaddot) for the given state and wheel torque.

    `viscous_friction` adds a drag force -c*xdot on the translation row for
    robustness experiments; the baseline model is frictionless.
    """
    torque = u.torque if isinstance(u, ControlInput) else float(u)
    a, b, c, bg, radius = _coeffs(params)
    return _accel(
        state.xdot, state.theta, state.thetadot, torque, a, b, c, bg, radius,
        viscous_friction,
    )


def energy(state: PendulumState, params: PendulumParams) -> tuple[float, float, float]:
    """(kinetic, potential, total); potential datum at axle height."""
    a, b, c, _, radius = _coeffs(params)
    # T = 1/2 a xdot^2 + b cos(th) xdot thdot + 1/2 c thdot^2, the quadratic
    # form of the same mass matrix that generates the accelerations
    kinetic = (
        0.5 * a * state.xdot**2
        + b * math.cos(state.theta) * state.xdot * state.thetadot
        + 0.5 * c * state.thetadot**2
    )
    potential = (
        params.body_mass * params.gravity * params.com_distance * math.cos(state.theta)
    )
    return kinetic, potential, kinetic + potential


def input_power(state: PendulumState, params: PendulumParams, torque: float) -> float:
    """Mechanical power injected by the wheel torque.

    The torque acts between the wheel pair (spinning at xdot/R under rolling)
    and the body (spinning at thetadot), so P = M (xdot/R - thetadot).
    """
    return torque * (state.xdot / params.wheel_radius - state.thetadot)


def step_rk4(
    state: PendulumState,
    params: PendulumParams,
    u: ControlInput | float,
    dt: float,
    viscous_friction: float = 0.0,
) -> PendulumState:
    """One classical Runge-Kutta step with the torque held constant."""
    if not 0.0 < dt <= MAX_TIMESTEP:
        raise ConfigError(f"dt must be in (0, {MAX_TIMESTEP}], got {dt}")
    torque = u.torque if isinstance(u, ControlInput) else float(u)
    a, b, c, bg, radius = _coeffs(params)
    cv = viscous_friction
    x, xd, th, thd = state.x, state.xdot, state.theta, state.thetadot
    if not (
        math.isfinite(x) and math.isfinite(xd) and math.isfinite(th) and math.isfinite(thd)
    ):
        raise IntegrationError(f"non-finite state {state}")

    a1, b1 = _accel(xd, th, thd, torque, a, b, c, bg, radius, cv)
    xd2, thd2 = xd + 0.5 * dt * a1, thd + 0.5 * dt * b1
    a2, b2 = _accel(xd2, th + 0.5 * dt * thd, thd2, torque, a, b, c, bg, radius, cv)
    xd3, thd3 = xd + 0.5 * dt * a2, thd + 0.5 * dt * b2
    a3, b3 = _accel(xd3, th + 0.5 * dt * thd2, thd3, torque, a, b, c, bg, radius, cv)
    xd4, thd4 = xd + dt * a3, thd + dt * b3
    a4, b4 = _accel(xd4, th + dt * thd3, thd4, torque, a, b, c, bg, radius, cv)

    sixth = dt / 6.0
    out = PendulumState(
        x + sixth * (xd + 2.0 * xd2 + 2.0 * xd3 + xd4),
        xd + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        th + sixth * (thd + 2.0 * thd2 + 2.0 * thd3 + thd4),
        thd + sixth * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
    if not out.is_finite():
        raise IntegrationError("state became non-finite during integration")
    return out


def linearize(params: PendulumParams) -> LinearModel:
    """Continuous-time Jacobians of the dynamics at the upright origin."""
    a, b, c, bg, radius = _coeffs(params)
    det0 = a * c - b * b
    a_mat = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, -b * bg / det0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, a * bg / det0, 0.0],
        ]
    )
    b_mat = np.array(
        [
            [0.0],
            [(c / radius + b) / det0],
            [0.0],
            [-(a + b / radius) / det0],
        ]
    )
    return LinearModel(a_mat, b_mat, discrete=False, dt=None)


def discretize(model: LinearModel, dt: float) -> LinearModel:
    """Zero-order-hold discretization of a continuous model.

    Computes the matrix exponential of the augmented [A B; 0 0] block by a
    scaled-and-squared Taylor series, truncated when the term norm falls
    below 1e-16.
    """
    if model.discrete:
        raise ConfigError("model is already discrete")
    if not 0.0 < dt <= MAX_TIMESTEP:
        raise ConfigError(f"dt must be in (0, {MAX_TIMESTEP}], got {dt}")

    n = model.a_mat.shape[0]
    m = model.b_mat.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = model.a_mat * dt
    aug[:n, n:] = model.b_mat * dt

    norm = np.linalg.norm(aug, "fro")
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    scaled = aug / (2.0**squarings)

    expm = np.eye(n + m)
    term = np.eye(n + m)
    k = 1
    while True:
        term = term @ scaled / k
        expm = expm + term
        if np.linalg.norm(term, "fro") < 1e-16:
            break
        k += 1
        if k > 10_000:  # cannot happen after scaling; guards a stuck loop
            raise InternalError("matrix exponential series did not truncate")
    for _ in range(squarings):
        expm = expm @ expm

    return LinearModel(expm[:n, :n], expm[:n, n:], discrete=True, dt=dt)


# ---------------------------------------------------------------------------
# Trajectory CSV export
# ---------------------------------------------------------------------------

def csv_value(v: float) -> float:
    """The value as it survives the CSV round trip (15 significant digits)."""
    return float(f"{v:.15g}")


def format_trajectory_row(
    t: float, state: PendulumState, torque: float
) -> str:
    vals = (t, state.x, state.xdot, state.theta, state.thetadot, torque)
    return ",".join(f"{v:.15g}" for v in vals)


def write_trajectory_csv(path, rows: list[str]):
    """Write pre-formatted trajectory rows under the standard header."""
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV keyed by header name."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    arr = np.array(data) if data else np.zeros((0, len(header)))
    return {name: arr[:, i] for i, name in enumerate(header)}
