"""Scenario descriptions: what to run, under which controller, with which
disturbances, locks and reference commands.

Scenario files are YAML; all values are SI except DOF lock hold angles,
which are given in degrees like the joint limits they are checked against.
A handful of named presets ship with the package both as builtins and as
example files documenting the schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from ..dynamics import PendulumState
from ..errors import ScenarioError
from ..estimation import NoiseModel
from ..legmodel import HIP_JOINTS, SIDES, JointConfiguration, JointLimits

CONTROLLERS = ("lqr", "policy")

LOCKABLE_JOINTS = HIP_JOINTS  # locks emulate lower-DOF hip variants

POSE_PRESETS: dict[str, JointConfiguration] = {
    "straight": JointConfiguration.symmetric(),
    "lean": JointConfiguration.symmetric(hip_pitch=-0.3, knee_pitch=0.6),
    "squat": JointConfiguration.symmetric(hip_pitch=-0.8, knee_pitch=1.6),
    "splay": JointConfiguration.symmetric(
        hip_roll=-0.25, hip_pitch=-0.2, knee_pitch=0.4
    ),
}


@dataclass(frozen=True)
class Disturbance:
    t: float
    kind: str  # "tilt_rate" (rad/s added to thetadot) or "push_force" (N, one tick)
    value: float

    def __post_init__(self):
        if self.kind not in ("tilt_rate", "push_force"):
            raise ScenarioError(f"unknown disturbance kind {self.kind!r}")


@dataclass(frozen=True)
class ReferenceCommand:
    """Piecewise command: velocity setpoint and/or pose preset from time t."""

    t: float
    vx: float | None = None
    pose: str | None = None

    def __post_init__(self):
        if self.pose is not None and self.pose not in POSE_PRESETS:
            raise ScenarioError(
                f"unknown pose preset {self.pose!r}; have {sorted(POSE_PRESETS)}"
            )


@dataclass(frozen=True)
class DofLock:
    side: str
    joint: str
    hold_angle_deg: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise ScenarioError(f"unknown side {self.side!r}")
        if self.joint not in LOCKABLE_JOINTS:
            raise ScenarioError(
                f"joint {self.joint!r} is not lockable; hip joints only"
            )

    @property
    def hold_angle(self) -> float:
        return math.radians(self.hold_angle_deg)

    @property
    def name(self) -> str:
        return f"{self.side}.{self.joint}"


@dataclass(frozen=True)
class ModeSwitch:
    t: float
    controller: str

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {self.controller!r}")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    initial_state: PendulumState = PendulumState()
    pose: str = "straight"
    controller: str = "lqr"
    policy_file: str | None = None
    duration_s: float = 10.0
    seed: int = 0
    truth_feed: bool = False
    noise: NoiseModel = field(default_factory=NoiseModel)
    disturbances: tuple[Disturbance, ...] = ()
    locks: tuple[DofLock, ...] = ()
    references: tuple[ReferenceCommand, ...] = ()
    switches: tuple[ModeSwitch, ...] = ()

    def validated(self, limits: JointLimits | None = None) -> "Scenario":
        limits = limits or JointLimits()
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be > 0")
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {self.controller!r}")
        if self.pose not in POSE_PRESETS:
            raise ScenarioError(f"unknown pose preset {self.pose!r}")
        needs_policy = self.controller == "policy" or any(
            s.controller == "policy" for s in self.switches
        )
        if needs_policy and not self.policy_file:
            raise ScenarioError("scenario uses the policy controller but no policy_file")
        if not self.initial_state.is_finite():
            raise ScenarioError("initial state must be finite")
        if abs(self.initial_state.theta) >= math.pi:
            raise ScenarioError("initial tilt must lie inside (-pi, pi)")
        for d in self.disturbances:
            if not 0.0 <= d.t < self.duration_s:
                raise ScenarioError(
                    f"disturbance at t={d.t} outside [0, {self.duration_s})"
                )
        for s in self.switches:
            if not 0.0 <= s.t < self.duration_s:
                raise ScenarioError(
                    f"mode switch at t={s.t} outside [0, {self.duration_s})"
                )
        for lock in self.locks:
            lo, hi = limits.range_rad(lock.joint)
            if not lo <= lock.hold_angle <= hi:
                raise ScenarioError(
                    f"lock {lock.name} hold angle {lock.hold_angle_deg} deg "
                    f"outside limits"
                )
        return self

    def with_locks(self, locks: tuple[DofLock, ...]) -> "Scenario":
        return replace(self, locks=locks)


def lock_mask(names: str) -> tuple[DofLock, ...]:
    """Parse a compact mask spec into locks at hold angle 0.

    "none" is empty; "all" locks all six hip joints; otherwise a
    "+"-separated list of entries like "left.hip_roll" or "hip_roll"
    (which locks the joint on both sides).
    """
    names = names.strip()
    if names in ("", "none"):
        return ()
    if names == "all":
        return tuple(
            DofLock(side, joint, 0.0) for side in SIDES for joint in LOCKABLE_JOINTS
        )
    locks = []
    for entry in names.split("+"):
        entry = entry.strip()
        if "." in entry:
            side, joint = entry.split(".", 1)
            locks.append(DofLock(side, joint, 0.0))
        else:
            for side in SIDES:
                locks.append(DofLock(side, entry, 0.0))
    return tuple(locks)


def mask_name(locks: tuple[DofLock, ...]) -> str:
    if not locks:
        return "none"
    return "+".join(sorted(lock.name for lock in locks))


# ---------------------------------------------------------------------------
# YAML loading
# ---------------------------------------------------------------------------

def _parse_state(doc: dict) -> PendulumState:
    return PendulumState(
        x=float(doc.get("x", 0.0)),
        xdot=float(doc.get("xdot", 0.0)),
        theta=float(doc.get("theta", 0.0)),
        thetadot=float(doc.get("thetadot", 0.0)),
    )


def parse_scenario(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document is not a mapping")
    known = {
        "name", "initial_state", "pose", "controller", "policy_file",
        "duration_s", "seed", "truth_feed", "noise", "disturbances",
        "locks", "references", "switches",
    }
    unknown = set(doc) - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")

    noise_doc = doc.get("noise") or {}
    noise = NoiseModel(
        gyro_sigma=float(noise_doc.get("gyro_sigma", 0.0)),
        gyro_bias=float(noise_doc.get("gyro_bias", 0.0)),
        tilt_sigma=float(noise_doc.get("tilt_sigma", 0.0)),
        encoder_quantum=float(noise_doc.get("encoder_quantum", 0.0)),
    )
    disturbances = tuple(
        Disturbance(t=float(d["t"]), kind=str(d["kind"]), value=float(d["value"]))
        for d in doc.get("disturbances") or ()
    )
    locks = []
    for side, joints in (doc.get("locks") or {}).items():
        for joint, angle_deg in (joints or {}).items():
            locks.append(DofLock(side, joint, float(angle_deg)))
    references = tuple(
        ReferenceCommand(
            t=float(r["t"]),
            vx=None if r.get("vx") is None else float(r["vx"]),
            pose=r.get("pose"),
        )
        for r in doc.get("references") or ()
    )
    switches = tuple(
        ModeSwitch(t=float(s["t"]), controller=str(s["controller"]))
        for s in doc.get("switches") or ()
    )
    return Scenario(
        name=str(doc.get("name", name)),
        initial_state=_parse_state(doc.get("initial_state") or {}),
        pose=str(doc.get("pose", "straight")),
        controller=str(doc.get("controller", "lqr")),
        policy_file=doc.get("policy_file"),
        duration_s=float(doc.get("duration_s", 10.0)),
        seed=int(doc.get("seed", 0)),
        truth_feed=bool(doc.get("truth_feed", False)),
        noise=noise,
        disturbances=disturbances,
        locks=tuple(locks),
        references=references,
        switches=switches,
    )


def _packaged_scenarios() -> dict[str, str]:
    base = resources.files("wipsim").joinpath("data/scenarios")
    return {p.name.removesuffix(".yaml"): p.read_text() for p in base.iterdir()
            if p.name.endswith(".yaml")}


def scenario_presets() -> list[str]:
    return sorted(_packaged_scenarios())


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a YAML file path or a packaged preset name."""
    path = Path(source)
    if path.exists():
        with open(path) as fh:
            doc = yaml.safe_load(fh)
        return parse_scenario(doc, name=path.stem).validated()
    presets = _packaged_scenarios()
    if str(source) in presets:
        return parse_scenario(yaml.safe_load(presets[str(source)]), name=str(source)).validated()
    raise ScenarioError(
        f"scenario not found: no file at '{source}' and no preset of that "
        f"name (have {scenario_presets()})"
    )
