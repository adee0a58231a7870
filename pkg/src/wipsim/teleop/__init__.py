"""WebSocket teleoperation seam."""

from .server import TeleopServer, teleop_serve
from .ws import WsConnection, accept, connect

__all__ = ["TeleopServer", "WsConnection", "accept", "connect", "teleop_serve"]
