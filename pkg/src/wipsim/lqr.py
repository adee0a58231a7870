"""Discrete LQR balance controller: Riccati design and gain scheduling.

Two dependency-free Riccati solvers share one fixed point: the plain
value-iteration recursion (`solve_dare`, simple and convergence-checked)
and a structure-preserving doubling iteration (`solve_dare_doubling`) that
the gain scheduler uses because pose playback asks for a fresh design every
few milliradians of slew. Gains are re-designed whenever the pose moves the
quantized pose key, and cached so a repeated pose is a dictionary lookup.
"""

from __future__ import annotations

import math
import queue
import threading
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DEFAULT_TIMESTEP,
    DEFAULT_TORQUE_LIMIT,
    ControlInput,
    LinearModel,
    PendulumState,
    discretize,
    linearize,
)
from .errors import UnstabilizableSystemError, WeightError
from .legmodel import (
    JointConfiguration,
    JointLimits,
    LegJoints,
    LinkParams,
    reduce_to_pendulum,
)

DARE_TOLERANCE = 1e-12
DARE_MAX_ITERATIONS = 100_000
_DIVERGENCE_NORM = 1e100


@dataclass(frozen=True)
class LqrWeights:
    """Quadratic state/input costs: Q symmetric PSD, R positive."""

    state_cost: np.ndarray  # (4, 4)
    input_cost: np.ndarray  # (1, 1)

    def __post_init__(self):
        q = np.asarray(self.state_cost, dtype=float)
        r = np.asarray(self.input_cost, dtype=float).reshape(1, 1)
        object.__setattr__(self, "state_cost", q)
        object.__setattr__(self, "input_cost", r)
        if q.shape[0] != q.shape[1]:
            raise WeightError("Q must be square")
        if not np.allclose(q, q.T, atol=1e-12):
            raise WeightError("Q must be symmetric")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise WeightError("Q must be positive semidefinite")
        if r[0, 0] <= 0:
            raise WeightError("R must be positive")

    @staticmethod
    def from_diagonal(state_diag, input_weight: float) -> "LqrWeights":
        return LqrWeights(np.diag(np.asarray(state_diag, dtype=float)),
                          np.array([[float(input_weight)]]))


@dataclass(frozen=True)
class LqrDesign:
    """A designed balance controller for one discrete plant."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    weights: LqrWeights
    riccati: np.ndarray  # P
    gain: np.ndarray  # K, (1, 4)
    spectral_radius: float
    residual: float
    dt: float


def solve_dare(
    a_mat,
    b_mat,
    state_cost,
    input_cost,
    tolerance: float = DARE_TOLERANCE,
    max_iterations: int = DARE_MAX_ITERATIONS,
    initial=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-point solution (P, K) of the discrete Riccati equation.

    Iterates P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q from P0 = Q until the
    Frobenius norm of the update falls below `tolerance`. `initial`
    replaces P0 to warm-start neighbouring designs; the fixed point is the
    same. Divergence or hitting the iteration cap raises
    UnstabilizableSystemError.
    """
    a = np.asarray(a_mat, dtype=float)
    b = np.asarray(b_mat, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    q = np.asarray(state_cost, dtype=float)
    r = np.asarray(input_cost, dtype=float)
    if r.ndim < 2:
        r = r.reshape(1, 1)

    p = q.copy() if initial is None else np.asarray(initial, dtype=float).copy()
    for _ in range(max_iterations):
        btp = b.T @ p
        gain = np.linalg.solve(r + btp @ b, btp @ a)
        p_next = a.T @ p @ a - (a.T @ p @ b) @ gain + q
        p_next = 0.5 * (p_next + p_next.T)
        delta = np.linalg.norm(p_next - p, "fro")
        p = p_next
        if delta < tolerance:
            btp = b.T @ p
            k = np.linalg.solve(r + btp @ b, btp @ a)
            return p, k
        if not np.isfinite(delta) or np.linalg.norm(p, "fro") > _DIVERGENCE_NORM:
            raise UnstabilizableSystemError(
                "Riccati iteration diverged; (A, B) is not stabilizable"
            )
    raise UnstabilizableSystemError(
        f"Riccati iteration did not converge within {max_iterations} iterations"
    )


def solve_dare_doubling(
    a_mat, b_mat, state_cost, input_cost, max_iterations: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Structure-preserving doubling solution of the same Riccati equation.

    Each pass doubles the horizon of the underlying value recursion, so the
    iterate reaches the fixed point of `solve_dare` in a few dozen passes
    instead of thousands. Used by the gain scheduler, where a design is
    needed for every pose the playback slews through; produces the same
    design (checked against the plain iteration in the tests).
    """
    a = np.asarray(a_mat, dtype=float)
    b = np.asarray(b_mat, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    q = np.asarray(state_cost, dtype=float)
    r = np.asarray(input_cost, dtype=float)
    if r.ndim < 2:
        r = r.reshape(1, 1)

    n = a.shape[0]
    eye = np.eye(n)
    a_k = a.copy()
    g_k = b @ np.linalg.solve(r, b.T)
    h_k = q.copy()
    converged = False
    for _ in range(max_iterations):
        w_inv_a = np.linalg.solve(eye + g_k @ h_k, a_k)
        a_next = a_k @ w_inv_a
        g_next = g_k + a_k @ np.linalg.solve(eye + g_k @ h_k, g_k) @ a_k.T
        h_next = h_k + w_inv_a.T @ (h_k @ a_k)
        h_next = 0.5 * (h_next + h_next.T)
        delta = np.linalg.norm(h_next - h_k, "fro")
        a_k, g_k, h_k = a_next, 0.5 * (g_next + g_next.T), h_next
        if not np.isfinite(delta) or np.linalg.norm(h_k, "fro") > _DIVERGENCE_NORM:
            raise UnstabilizableSystemError(
                "doubling iteration diverged; (A, B) is not stabilizable"
            )
        if converged:  # one extra pass after reaching tolerance
            break
        if delta <= 1e-12 * max(1.0, np.linalg.norm(h_k, "fro")):
            converged = True
    else:
        raise UnstabilizableSystemError(
            f"doubling iteration did not converge within {max_iterations} passes"
        )
    p = h_k
    btp = b.T @ p
    k = np.linalg.solve(r + btp @ b, btp @ a)
    return p, k


def dare_residual(a, b, q, r, p) -> float:
    """Frobenius norm of P minus its Riccati map."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    btp = b.T @ p
    gain = np.linalg.solve(np.asarray(r, dtype=float) + btp @ b, btp @ a)
    return float(np.linalg.norm(a.T @ p @ a - (a.T @ p @ b) @ gain + q - p, "fro"))


def design_controller(
    model: LinearModel, weights: LqrWeights, method: str = "iteration"
) -> LqrDesign:
    """Solve the Riccati equation for a discrete model and package the
    design with its residual and closed-loop spectral radius."""
    if not model.discrete:
        raise WeightError("design_controller expects a discrete model")
    solver = solve_dare_doubling if method == "doubling" else solve_dare
    p, k = solver(
        model.a_mat, model.b_mat, weights.state_cost, weights.input_cost
    )
    residual = dare_residual(
        model.a_mat, model.b_mat, weights.state_cost, weights.input_cost, p
    )
    closed = model.a_mat - model.b_mat @ k
    radius = float(np.abs(np.linalg.eigvals(closed)).max())
    return LqrDesign(
        a_mat=model.a_mat,
        b_mat=model.b_mat,
        weights=weights,
        riccati=p,
        gain=k,
        spectral_radius=radius,
        residual=residual,
        dt=float(model.dt),
    )


def control(
    gain: np.ndarray | LqrDesign,
    state: PendulumState,
    reference: PendulumState | None = None,
    torque_limit: float = DEFAULT_TORQUE_LIMIT,
) -> ControlInput:
    """u = -K (state - reference), saturated to the torque limit."""
    k = gain.gain if isinstance(gain, LqrDesign) else np.asarray(gain)
    error = state.as_array()
    if reference is not None:
        error = error - reference.as_array()
    torque = float(-(k @ error).reshape(-1)[0])
    if abs(torque) > torque_limit:
        return ControlInput(math.copysign(torque_limit, torque), saturated=True)
    return ControlInput(torque, saturated=False)


def evaluate_cost(states, inputs, weights: LqrWeights) -> float:
    """J = sum_k x'Qx + u'Ru over an equal-length state/input history."""
    states = list(states)
    inputs = list(inputs)
    if len(states) != len(inputs):
        raise WeightError(
            f"state/input length mismatch: {len(states)} vs {len(inputs)}"
        )
    q = weights.state_cost
    r = float(weights.input_cost[0, 0])
    total = 0.0
    for s, u in zip(states, inputs):
        x = s.as_array() if isinstance(s, PendulumState) else np.asarray(s, dtype=float)
        m = u.torque if isinstance(u, ControlInput) else float(u)
        total += float(x @ q @ x) + r * m * m
    return total


class GainScheduler:
    """Pose-triggered gain design with caching.

    The cache key is the hip/knee angles quantized to 1e-3 rad. Synchronous
    lookups (`design_for`) compute on a miss; that is what the deterministic
    offline runner uses. The real-time teleop loop uses `design_nowait`,
    which never blocks: on a miss it returns the most recent design (staler
    by a tick or two) and hands the computation to a single background
    worker. Cache writes are single-assignment dict stores, so readers never
    see a partial design.
    """

    def __init__(
        self,
        links: LinkParams,
        weights: LqrWeights,
        dt: float = DEFAULT_TIMESTEP,
        limits: JointLimits | None = None,
        quantum: float = 1e-3,
    ):
        self.links = links
        self.weights = weights
        self.dt = dt
        self.limits = limits
        self.quantum = quantum
        self._cache: dict[tuple, LqrDesign] = {}
        self._last: LqrDesign | None = None
        self._worker: threading.Thread | None = None
        self._pending: queue.Queue | None = None

    def _quantized_config(self, key: tuple) -> JointConfiguration:
        left = LegJoints(*key[0:4])
        right = LegJoints(*key[4:8])
        return JointConfiguration(left=left, right=right)

    def _compute(self, key: tuple) -> LqrDesign:
        config = self._quantized_config(key)
        params = reduce_to_pendulum(config, self.links, self.limits)
        model = discretize(linearize(params), self.dt)
        design = design_controller(model, self.weights, method="doubling")
        self._cache[key] = design
        self._last = design
        return design

    def design_for(self, config: JointConfiguration) -> LqrDesign:
        """Blocking lookup: compute and cache on a miss."""
        key = config.pose_key(self.quantum)
        cached = self._cache.get(key)
        if cached is not None:
            self._last = cached
            return cached
        return self._compute(key)

    def design_nowait(self, config: JointConfiguration) -> LqrDesign:
        """Non-blocking lookup for the real-time loop.

        Returns the cached design for this pose if present, otherwise the
        latest design (stale) while a worker computes the new one. Must be
        seeded once via `design_for` before first use.
        """
        key = config.pose_key(self.quantum)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if self._last is None:
            return self.design_for(config)
        self._enqueue(key)
        return self._last

    def _enqueue(self, key: tuple):
        if self._pending is None:
            self._pending = queue.Queue()
            self._worker = threading.Thread(target=self._work, daemon=True)
            self._worker.start()
        self._pending.put(key)

    def _work(self):
        while True:
            key = self._pending.get()
            if key not in self._cache:
                try:
                    self._compute(key)
                except Exception:
                    pass  # degenerate pose mid-slew: keep the stale gain
