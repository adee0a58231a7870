"""Stability metrics: RMS aggregation and Gaussian smoothing."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError


def rms(signal) -> float:
    """Root mean square of a sampled sequence."""
    arr = np.asarray(signal, dtype=float)
    if arr.size == 0:
        raise ConfigError("rms of an empty sequence")
    return float(np.sqrt(np.mean(arr * arr)))


def gaussian_smooth(signal, sigma: float) -> np.ndarray:
    """Convolve with a truncated (+-4 sigma), renormalized Gaussian kernel.

    Near the edges the kernel is renormalized over the in-window samples,
    so constants pass through unchanged.
    """
    if sigma <= 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    arr = np.asarray(signal, dtype=float)
    radius = int(math.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    smoothed = np.convolve(arr, kernel, mode="same")
    coverage = np.convolve(np.ones_like(arr), kernel, mode="same")
    return smoothed / coverage


@dataclass(frozen=True)
class MetricsReport:
    """Stability summary of one scenario run.

    For the planar model, `rms_theta`/`rms_thetadot` play the role of the
    base-attitude RMS metrics; `rms_joint` is the joint-space playback
    deviation (RMS over time of the per-tick RMS deviation of the eight hip
    and knee joints from their commanded targets), which is where DOF locks
    show up. These are reduced-model proxies, not 3-D attitude numbers.
    """

    rms_theta: float
    rms_thetadot: float
    rms_joint: float
    fall: bool
    settling_s: float | None
    cost: float
    saturation_count: int
    duration_s: float

    def __post_init__(self):
        if self.settling_s is not None and self.settling_s > self.duration_s:
            raise ConfigError("settling time cannot exceed the run duration")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def settling_time(
    t: np.ndarray, tilt: np.ndarray, band: float = 0.01
) -> float | None:
    """Earliest time after which |tilt| stays inside the band."""
    inside = np.abs(tilt) < band
    if not inside[-1]:
        return None
    # last index where the signal is outside the band
    outside = np.nonzero(~inside)[0]
    if len(outside) == 0:
        return float(t[0])
    last_out = outside[-1]
    if last_out + 1 >= len(t):
        return None
    return float(t[last_out + 1])
