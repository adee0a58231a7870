"""Teleop wire protocol: JSON text frames over a WebSocket.

Client to server:  {"type": "cmd", "vx": <m/s>, "yaw_rate": <rad/s>,
                    "pose": "<preset-name>" | null}
Server to client:  {"type": "role", "role": "commander" | "observer"}
                   once after connect, then
                   {"type": "state", "t": ..., "x": ..., "xdot": ...,
                    "theta": ..., "thetadot": ..., "torque": ...,
                    "joints": {"left": {...}, "right": {...}},
                    "mode": "lqr" | "policy"}  at 50 Hz, and
                   {"type": "error", "code": "<string>"} on protocol
                   violations (the session continues).

The JSON Schema files alongside this module are the normative frame
definitions; both the server and the browser client validate against them.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

FRAME_KINDS = ("cmd", "state", "error", "role")


@lru_cache(maxsize=None)
def load_schema(kind: str) -> dict:
    if kind not in FRAME_KINDS:
        raise ValueError(f"unknown frame kind {kind!r}")
    text = resources.files("wipsim").joinpath(
        f"protocol/{kind}_frame.schema.json"
    ).read_text()
    return json.loads(text)


def validate_frame(kind: str, frame: dict):
    """Raises jsonschema.ValidationError when the frame is malformed."""
    jsonschema.validate(frame, load_schema(kind))


def is_valid_frame(kind: str, frame) -> bool:
    try:
        validate_frame(kind, frame)
        return True
    except jsonschema.ValidationError:
        return False
