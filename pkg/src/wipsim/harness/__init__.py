"""Scenario execution, stability metrics and DOF-lock sweeps."""

from .metrics import MetricsReport, gaussian_smooth, rms, settling_time
from .runner import (
    FALL_TILT,
    PolicyController,
    PoseTracker,
    RunResult,
    default_weights,
    dof_sweep,
    mode_switch,
    run_scenario,
)
from .scenario import (
    POSE_PRESETS,
    Disturbance,
    DofLock,
    ModeSwitch,
    ReferenceCommand,
    Scenario,
    load_scenario,
    lock_mask,
    mask_name,
    scenario_presets,
)

__all__ = [
    "FALL_TILT",
    "POSE_PRESETS",
    "Disturbance",
    "DofLock",
    "MetricsReport",
    "ModeSwitch",
    "PolicyController",
    "PoseTracker",
    "ReferenceCommand",
    "RunResult",
    "Scenario",
    "default_weights",
    "dof_sweep",
    "gaussian_smooth",
    "load_scenario",
    "lock_mask",
    "mask_name",
    "mode_switch",
    "rms",
    "run_scenario",
    "scenario_presets",
    "settling_time",
]
