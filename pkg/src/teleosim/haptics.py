"""Force-glove intensity mapping and leader encoder quantization.

Six coin motors, one per signed cardinal axis: a positive force component
drives the + motor of that axis, a negative one the - motor, never both.
Intensity grows with force magnitude from a deadband up to saturation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MOTOR_ORDER = ("x+", "x-", "y+", "y-", "z+", "z-")


@dataclass(frozen=True)
class HapticConfig:
    f_max: float = 20.0  # N at full intensity
    deadband: float = 0.5  # N
    curve: str = "linear"  # "linear" | "sqrt"

    def __post_init__(self):
        if not self.f_max > self.deadband >= 0.0:
            raise ValueError("need f_max > deadband >= 0")
        if self.curve not in ("linear", "sqrt"):
            raise ValueError("curve must be 'linear' or 'sqrt'")

    def to_json(self) -> dict:
        return {"f_max": self.f_max, "deadband": self.deadband, "curve": self.curve}

    @staticmethod
    def from_json(doc: dict) -> "HapticConfig":
        return HapticConfig(
            f_max=float(doc.get("f_max", 20.0)),
            deadband=float(doc.get("deadband", 0.5)),
            curve=str(doc.get("curve", "linear")),
        )


@dataclass(frozen=True)
class GloveFrame:
    """Six motor intensities in [0,1], ordered (x+, x-, y+, y-, z+, z-)."""

    intensities: tuple[float, float, float, float, float, float]
    source_force: tuple[float, float, float]

    @staticmethod
    def zero() -> "GloveFrame":
        return GloveFrame(intensities=(0.0,) * 6, source_force=(0.0, 0.0, 0.0))


def _intensity(magnitude: float, cfg: HapticConfig) -> float:
    if magnitude <= cfg.deadband:
        return 0.0
    x = (magnitude - cfg.deadband) / (cfg.f_max - cfg.deadband)
    if cfg.curve == "sqrt":
        x = math.sqrt(x)
    return min(x, 1.0)


def force_to_glove(force, cfg: HapticConfig) -> GloveFrame:
    """Map an end-effector force vector to the six motor intensities."""
    f = np.asarray(force, dtype=float)
    out = [0.0] * 6
    for axis in range(3):
        level = _intensity(abs(f[axis]), cfg)
        if f[axis] > 0:
            out[2 * axis] = level
        elif f[axis] < 0:
            out[2 * axis + 1] = level
    return GloveFrame(intensities=tuple(out), source_force=(f[0], f[1], f[2]))


def quantize_encoder(angle: float, bits: int) -> float:
    """Round an angle to the nearest encoder count (2*pi / 2**bits).

    Ties round half away from zero so replays are bit-exact.
    """
    if not 1 <= bits <= 32:
        raise ValueError("bits must be in [1, 32]")
    step = 2.0 * math.pi / (1 << bits)
    return math.copysign(math.floor(abs(angle) / step + 0.5), angle) * step
