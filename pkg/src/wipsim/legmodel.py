"""10-DOF leg chain: joint limits, forward kinematics, pendulum reduction.

Each leg is a serial chain base -> hip (yaw -> roll -> pitch) -> knee (pitch)
-> wheel axle. Right-leg roll and yaw axes are mirrored so that identical
numbers on both sides describe a mirror-symmetric pose and one set of joint
limits applies to both legs.

Conventions: base frame x forward, y left, z up, origin at the hip line.
All angles zero means straight legs with the wheel axles directly below the
hips. Positive hip pitch swings the thigh backward (range [-60, 0] deg puts
flexion forward); positive knee pitch folds the calf backward under the body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DegeneratePoseError, JointLimitError

SIDES = ("left", "right")
HIP_JOINTS = ("hip_roll", "hip_pitch", "hip_yaw")
LIMITED_JOINTS = ("hip_roll", "hip_pitch", "hip_yaw", "knee_pitch")
JOINT_NAMES = LIMITED_JOINTS + ("wheel",)

# Below this pendulum length the reduced model loses tilt authority and the
# 2x2 mass matrix of the planar dynamics becomes ill-conditioned.
MIN_PENDULUM_LENGTH = 1e-3


@dataclass(frozen=True)
class LegJoints:
    """Five joint values for one leg: angles in rad, or rates in rad/s."""

    hip_roll: float = 0.0
    hip_pitch: float = 0.0
    hip_yaw: float = 0.0
    knee_pitch: float = 0.0
    wheel: float = 0.0

    def value(self, joint: str) -> float:
        return getattr(self, joint)

    def with_values(self, **values: float) -> "LegJoints":
        return replace(self, **values)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class JointConfiguration:
    """Angles and angular rates of all ten joints."""

    left: LegJoints = LegJoints()
    right: LegJoints = LegJoints()
    left_rates: LegJoints = LegJoints()
    right_rates: LegJoints = LegJoints()

    def joints(self, side: str) -> LegJoints:
        return self.left if side == "left" else self.right

    def rates(self, side: str) -> LegJoints:
        return self.left_rates if side == "left" else self.right_rates

    def relabeled(self) -> "JointConfiguration":
        """Swap the left and right legs."""
        return JointConfiguration(
            left=self.right,
            right=self.left,
            left_rates=self.right_rates,
            right_rates=self.left_rates,
        )

    def pose_key(self, quantum: float = 1e-3) -> tuple[float, ...]:
        """Hip and knee angles rounded to `quantum` rad; wheel spin excluded."""
        key = []
        for side in SIDES:
            leg = self.joints(side)
            key.extend(
                round(leg.value(j) / quantum) * quantum for j in LIMITED_JOINTS
            )
        return tuple(key)

    @staticmethod
    def symmetric(
        hip_roll: float = 0.0,
        hip_pitch: float = 0.0,
        hip_yaw: float = 0.0,
        knee_pitch: float = 0.0,
    ) -> "JointConfiguration":
        """Mirror-symmetric pose: same numbers on both (mirrored) legs."""
        leg = LegJoints(hip_roll, hip_pitch, hip_yaw, knee_pitch)
        return JointConfiguration(left=leg, right=leg)


@dataclass(frozen=True)
class JointLimits:
    """Per-joint angle range in degrees, boundary inclusive.

    Defaults are the robot's mechanical ranges; the wheel spins freely.
    """

    hip_roll: tuple[float, float] = (-20.0, 5.0)
    hip_pitch: tuple[float, float] = (-60.0, 0.0)
    hip_yaw: tuple[float, float] = (-5.0, 5.0)
    knee_pitch: tuple[float, float] = (0.0, 120.0)

    def __post_init__(self):
        for joint in LIMITED_JOINTS:
            lo, hi = getattr(self, joint)
            if not lo < hi:
                raise ConfigError(f"joint limit {joint}: min {lo} must be < max {hi}")

    def range_rad(self, joint: str) -> tuple[float, float]:
        lo, hi = getattr(self, joint)
        return math.radians(lo), math.radians(hi)


@dataclass(frozen=True)
class LimitViolation:
    side: str
    joint: str
    value: float
    lower: float  # rad
    upper: float  # rad

    @property
    def violated_bound(self) -> float:
        if not math.isfinite(self.value):
            return math.nan
        return self.lower if self.value < self.lower else self.upper

    def describe(self) -> str:
        return (
            f"{self.side}.{self.joint}={self.value:.6g} rad outside "
            f"[{self.lower:.6g}, {self.upper:.6g}] rad"
        )


def validate(
    config: JointConfiguration, limits: JointLimits | None = None
) -> list[LimitViolation]:
    """Check every joint against its range; an empty list means valid.

    Rates have no range but must be finite; a non-finite rate is reported
    with infinite bounds so the report stays uniform.
    """
    limits = limits or JointLimits()
    violations = []
    for side in SIDES:
        leg = config.joints(side)
        for joint in LIMITED_JOINTS:
            lo, hi = limits.range_rad(joint)
            v = leg.value(joint)
            if not (lo <= v <= hi):
                violations.append(LimitViolation(side, joint, v, lo, hi))
        if not math.isfinite(leg.wheel):
            violations.append(
                LimitViolation(side, "wheel", leg.wheel, -math.inf, math.inf)
            )
        rates = config.rates(side)
        for joint in JOINT_NAMES:
            r = rates.value(joint)
            if not math.isfinite(r):
                violations.append(
                    LimitViolation(side, joint + "_rate", r, -math.inf, math.inf)
                )
    return violations


@dataclass(frozen=True)
class LinkParams:
    """Mass/geometry of the chain. Wheel fields are per wheel; the reduction
    lumps both wheels."""

    base_mass: float
    base_com_height: float  # base COM offset above the hip line, m
    hip_mass: float
    thigh_mass: float
    thigh_length: float
    calf_mass: float
    calf_length: float
    wheel_mass: float
    wheel_radius: float
    wheel_spin_inertia: float  # about the axle
    gravity: float = 9.81

    def __post_init__(self):
        positive = (
            "base_mass",
            "hip_mass",
            "thigh_mass",
            "thigh_length",
            "calf_mass",
            "calf_length",
            "wheel_mass",
            "wheel_radius",
            "wheel_spin_inertia",
            "gravity",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"link parameter {name} must be > 0")


@dataclass(frozen=True)
class PendulumParams:
    """Equivalent planar wheeled-inverted-pendulum quantities.

    `wheel_mass` and `wheel_inertia` are two-wheel totals. `body_inertia`
    is taken about the body COM, about the axle-parallel axis, so the tilt
    row of the dynamics uses the parallel-axis form
    body_mass * com_distance^2 + body_inertia.
    """

    body_mass: float
    wheel_mass: float
    body_inertia: float
    wheel_inertia: float
    com_distance: float
    wheel_radius: float
    gravity: float

    def __post_init__(self):
        if not self.body_mass > 0:
            raise ConfigError("body_mass must be > 0")
        if not self.com_distance > 0:
            raise ConfigError("com_distance must be > 0")
        if self.body_inertia < 0:
            raise ConfigError("body_inertia must be >= 0")
        for name in ("wheel_mass", "wheel_inertia", "wheel_radius", "gravity"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")


@dataclass(frozen=True)
class Frame:
    """Position and orientation of a chain link in the base frame."""

    position: np.ndarray  # (3,)
    rotation: np.ndarray  # (3, 3)


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(
    config: JointConfiguration,
    links: LinkParams,
    limits: JointLimits | None = None,
) -> dict[str, dict[str, Frame]]:
    """Frames of hip, thigh, calf and wheel axle for each leg, base frame.

    Frame origins sit at the proximal joint of each link except the wheel
    axle, whose origin is the axle point itself. Orientation accumulates
    along the chain; the wheel's own spin does not rotate the axle frame.
    """
    violations = validate(config, limits)
    if violations:
        detail = "; ".join(v.describe() for v in violations)
        raise JointLimitError(f"configuration outside joint limits: {detail}")

    out: dict[str, dict[str, Frame]] = {}
    origin = np.zeros(3)
    for side in SIDES:
        leg = config.joints(side)
        # negative roll splays the leg outward on both sides
        mirror = -1.0 if side == "left" else 1.0
        r_hip = _rot_z(mirror * leg.hip_yaw) @ _rot_x(mirror * leg.hip_roll)
        r_thigh = r_hip @ _rot_y(leg.hip_pitch)
        p_knee = r_thigh @ np.array([0.0, 0.0, -links.thigh_length])
        r_calf = r_thigh @ _rot_y(leg.knee_pitch)
        p_axle = p_knee + r_calf @ np.array([0.0, 0.0, -links.calf_length])
        out[side] = {
            "hip": Frame(origin.copy(), r_hip),
            "thigh": Frame(origin.copy(), r_thigh),
            "calf": Frame(p_knee, r_calf),
            "wheel_axle": Frame(p_axle, r_calf),
        }
    return out


def reduce_to_pendulum(
    config: JointConfiguration,
    links: LinkParams,
    limits: JointLimits | None = None,
) -> PendulumParams:
    """Collapse the pose into equivalent planar pendulum parameters.

    Links are treated as point masses at their midpoints plus base and hip
    point masses; everything above the wheel axles aggregates into one body.
    The COM offset from the axle midpoint is projected into the sagittal
    (x-z) plane, and the body inertia is accumulated about the axle-parallel
    axis through the COM.
    """
    frames = forward_kinematics(config, links, limits)

    masses: list[tuple[float, np.ndarray]] = [
        (links.base_mass, np.array([0.0, 0.0, links.base_com_height]))
    ]
    axles = []
    for side in SIDES:
        p_knee = frames[side]["calf"].position
        p_axle = frames[side]["wheel_axle"].position
        masses.append((links.hip_mass, np.zeros(3)))
        masses.append((links.thigh_mass, p_knee / 2.0))
        masses.append((links.calf_mass, (p_knee + p_axle) / 2.0))
        axles.append(p_axle)
    axle_mid = (axles[0] + axles[1]) / 2.0

    body_mass = sum(m for m, _ in masses)
    com = sum(m * p for m, p in masses) / body_mass

    dx, dz = com[0] - axle_mid[0], com[2] - axle_mid[2]
    com_distance = math.hypot(dx, dz)
    if com_distance < MIN_PENDULUM_LENGTH:
        raise DegeneratePoseError(
            f"pendulum length {com_distance:.3e} m below floor "
            f"{MIN_PENDULUM_LENGTH:g} m; pose has no tilt authority"
        )

    body_inertia = sum(
        m * ((p[0] - com[0]) ** 2 + (p[2] - com[2]) ** 2) for m, p in masses
    )
    return PendulumParams(
        body_mass=body_mass,
        wheel_mass=2.0 * links.wheel_mass,
        body_inertia=body_inertia,
        wheel_inertia=2.0 * links.wheel_spin_inertia,
        com_distance=com_distance,
        wheel_radius=links.wheel_radius,
        gravity=links.gravity,
    )


# ---------------------------------------------------------------------------
# Configuration file loading
# ---------------------------------------------------------------------------

def _require(mapping: dict, key: str, context: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key '{key}' under '{context}'")
    return mapping[key]


def _number(mapping: dict, key: str, context: str) -> float:
    v = _require(mapping, key, context)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"'{context}.{key}' must be a number, got {v!r}")
    return float(v)


def parse_link_config(doc: dict) -> tuple[LinkParams, JointLimits]:
    """Build LinkParams and JointLimits from a parsed config document."""
    links_doc = _require(doc, "links", "<root>")
    base = _require(links_doc, "base", "links")
    hip = _require(links_doc, "hip", "links")
    thigh = _require(links_doc, "thigh", "links")
    calf = _require(links_doc, "calf", "links")
    wheel = _require(links_doc, "wheel", "links")
    links = LinkParams(
        base_mass=_number(base, "mass_kg", "links.base"),
        base_com_height=_number(base, "com_height_m", "links.base"),
        hip_mass=_number(hip, "mass_kg", "links.hip"),
        thigh_mass=_number(thigh, "mass_kg", "links.thigh"),
        thigh_length=_number(thigh, "length_m", "links.thigh"),
        calf_mass=_number(calf, "mass_kg", "links.calf"),
        calf_length=_number(calf, "length_m", "links.calf"),
        wheel_mass=_number(wheel, "mass_kg", "links.wheel"),
        wheel_radius=_number(wheel, "radius_m", "links.wheel"),
        wheel_spin_inertia=_number(wheel, "spin_inertia_kgm2", "links.wheel"),
        gravity=_number(links_doc, "gravity_m_s2", "links"),
    )

    limits_doc = _require(doc, "joint_limits_deg", "<root>")
    ranges = {}
    for joint in LIMITED_JOINTS:
        pair = _require(limits_doc, joint, "joint_limits_deg")
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ConfigError(f"joint_limits_deg.{joint} must be [min, max]")
        ranges[joint] = (float(pair[0]), float(pair[1]))
    return links, JointLimits(**ranges)


def load_link_config(path: str | Path) -> tuple[LinkParams, JointLimits]:
    """Load link parameters and joint limits from a YAML file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"link config file not found: {path}")
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"link config {path} is not a mapping")
    return parse_link_config(doc)


def nominal_link_config() -> tuple[LinkParams, JointLimits]:
    """The packaged nominal robot description."""
    text = (
        resources.files("wipsim").joinpath("data/nominal_links.yaml").read_text()
    )
    return parse_link_config(yaml.safe_load(text))
