"""wipsim: simulation and control for a wheeled bipedal robot reduced to a
planar wheeled inverted pendulum.

The stack mirrors the layering of the physical platform: an instruction
layer (CLI and teleop clients), a control layer (LQR design, state
estimation, learned policies), and a simulated hardware layer (sensor
models and the nonlinear dynamics).
"""

__version__ = "0.1.0"

from .dynamics import (
    ControlInput,
    LinearModel,
    PendulumState,
    accelerations,
    discretize,
    energy,
    linearize,
    step_rk4,
)
from .legmodel import (
    JointConfiguration,
    JointLimits,
    LegJoints,
    LinkParams,
    PendulumParams,
    forward_kinematics,
    load_link_config,
    nominal_link_config,
    reduce_to_pendulum,
    validate,
)
from .lqr import GainScheduler, LqrDesign, LqrWeights, control, evaluate_cost, solve_dare

__all__ = [
    "ControlInput",
    "GainScheduler",
    "JointConfiguration",
    "JointLimits",
    "LegJoints",
    "LinearModel",
    "LinkParams",
    "LqrDesign",
    "LqrWeights",
    "PendulumParams",
    "PendulumState",
    "accelerations",
    "control",
    "discretize",
    "energy",
    "evaluate_cost",
    "forward_kinematics",
    "linearize",
    "load_link_config",
    "nominal_link_config",
    "reduce_to_pendulum",
    "solve_dare",
    "step_rk4",
    "validate",
]
