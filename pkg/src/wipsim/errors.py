"""Exception types shared across the suite."""


class WipsimError(Exception):
    """Base class for all wipsim errors."""


class ConfigError(WipsimError):
    """Malformed configuration file or physically invalid parameter values."""


class JointLimitError(WipsimError):
    """An operation refused a joint configuration outside its limits."""


class DegeneratePoseError(WipsimError):
    """Pose reduces to a pendulum length below the validity floor."""


class IntegrationError(WipsimError):
    """Non-finite state encountered while integrating."""


class UnstabilizableSystemError(WipsimError):
    """Riccati iteration failed to converge (no stabilizing solution)."""


class WeightError(WipsimError):
    """Cost weights violate symmetry/definiteness requirements."""


class StreamOrderError(WipsimError):
    """Sensor samples arrived out of time order."""


class ScenarioError(WipsimError):
    """Scenario description is inconsistent or incomplete."""


class TrainingDivergedError(WipsimError):
    """Training loss became non-finite; carries a diagnostic snapshot."""

    def __init__(self, message: str, snapshot: dict | None = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class ProtocolError(WipsimError):
    """Teleop stream violated the wire protocol."""


class InternalError(WipsimError):
    """Invariant that should be unreachable was violated."""
