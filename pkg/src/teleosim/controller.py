"""Optimization-based joint-mirroring controller with torque compliance.

Two quadratic objectives compete: a mirroring term pulling the follower
toward the leader's joint angles, and a torque term pulling each joint away
from its measured load. A mode ratio driven by the largest joint torque
blends them, and the blended loss gradient (sign-flipped, averaged over a
short buffer, scaled by the step size) is issued as a joint velocity
command.

Torque targets are constants: the gradient of the torque term is taken with
the target held fixed, otherwise the term cancels and produces no motion.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kinematics import N_JOINTS, DHTable, Dual, fk_matrix, jacobian

# Preferred end-effector height (m) and weight of the conditioning term.
EE_HEIGHT_TARGET = 0.6
IK_WEIGHT = 100.0

MODE_RATIO_VARIANTS = ("main", "supplementary")


@dataclass
class ControllerGains:
    """Tunables: target distance, step size, torque ceiling, buffer length.

    Defaults are tuned for the bundled desk-scale world, not measured
    hardware values.
    """

    target_distance_a: float = 0.05  # rad per N*m
    step_size_s: float = 5.0
    tau_max: float = 15.0  # N*m
    buffer_size: int = 1
    spark_weight: float = 1.0
    ik_conditioning: bool = False
    mode_ratio_variant: str = "main"
    tau_min: float = 0.0  # only used by the "supplementary" mode-ratio variant

    def __post_init__(self):
        if not self.tau_max > 0:
            raise ValueError("tau_max must be > 0")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if self.step_size_s < 0:
            raise ValueError("step_size_s must be >= 0")
        if not self.spark_weight > 0:
            raise ValueError("spark_weight must be > 0")
        if self.mode_ratio_variant not in MODE_RATIO_VARIANTS:
            raise ValueError(f"mode_ratio_variant must be one of {MODE_RATIO_VARIANTS}")
        if not 0.0 <= self.tau_min < self.tau_max:
            raise ValueError("tau_min must satisfy 0 <= tau_min < tau_max")

    def to_json(self) -> dict:
        return {
            "a": self.target_distance_a,
            "s": self.step_size_s,
            "tau_max": self.tau_max,
            "buffer_size": self.buffer_size,
            "spark_weight": self.spark_weight,
            "ik_conditioning": self.ik_conditioning,
            "mode_ratio_variant": self.mode_ratio_variant,
        }

    @staticmethod
    def from_json(doc: dict) -> "ControllerGains":
        return ControllerGains(
            target_distance_a=float(doc.get("a", 0.05)),
            step_size_s=float(doc.get("s", 5.0)),
            tau_max=float(doc.get("tau_max", 15.0)),
            buffer_size=int(doc.get("buffer_size", 1)),
            spark_weight=float(doc.get("spark_weight", 1.0)),
            ik_conditioning=bool(doc.get("ik_conditioning", False)),
            mode_ratio_variant=str(doc.get("mode_ratio_variant", "main")),
            tau_min=float(doc.get("tau_min", 0.0)),
        )


@dataclass
class ControllerInput:
    """Follower joints, leader target joints, and measured joint torques."""

    theta: np.ndarray
    theta_spark: np.ndarray
    tau: np.ndarray


@dataclass
class ControllerOutput:
    joint_speeds: np.ndarray
    mode_ratio: float
    loss_value: float
    per_mode_losses: tuple[float, float, float]  # (torque, spark, ik)
    fault: Optional[str] = None


def torque_targets(theta, tau, a: float) -> np.ndarray:
    """Per-joint angle targets opposite the measured torque direction.

    Always returns plain floats: targets are constants to any downstream
    gradient, even when ``theta`` carries dual numbers.
    """
    vals = np.array([t.val if isinstance(t, Dual) else float(t) for t in theta])
    return vals - np.asarray(tau, dtype=float) * a


def torque_loss(theta, targets):
    """Sum of squared distances to the torque targets."""
    diff = theta - np.asarray(targets)
    return (diff**2).sum()


def spark_loss(theta, theta_spark, weight: float = 1.0):
    """Weighted sum of squared mirroring errors against the leader."""
    diff = theta - np.asarray(theta_spark)
    return weight * (diff**2).sum()


def ik_conditioning_loss(table: DHTable, theta):
    """Quadratic penalty on end-effector height away from the preferred value."""
    T = fk_matrix(table, theta)
    z = T[2, 3]
    return (z - EE_HEIGHT_TARGET) ** 2 * IK_WEIGHT


def mode_ratio(tau, tau_max: float, variant: str = "main", tau_min: float = 0.0) -> float:
    """Blend factor in [0, 1] from the largest absolute joint torque.

    "main" divides by the torque ceiling; "supplementary" min-max normalizes
    between tau_min and tau_max. Both clamp.
    """
    peak = float(np.max(np.abs(np.asarray(tau, dtype=float))))
    if variant == "supplementary":
        m = (peak - tau_min) / (tau_max - tau_min)
    else:
        m = peak / tau_max
    return min(max(m, 0.0), 1.0)


def combined_loss(inp: ControllerInput, gains: ControllerGains, table: DHTable, targets=None):
    """Mode-ratio blend of the torque and mirroring losses.

    The torque targets are constants of the objective: by default they are
    derived (detached) from ``inp.theta`` itself; pass ``targets`` explicitly
    to evaluate the same objective at a different joint vector, e.g. when
    finite-differencing or checking descent. Accepts Dual-valued
    ``inp.theta`` so the exact gradient is available through
    :func:`teleosim.kinematics.loss_gradient`.
    """
    m = mode_ratio(inp.tau, gains.tau_max, gains.mode_ratio_variant, gains.tau_min)
    if targets is None:
        targets = torque_targets(inp.theta, inp.tau, gains.target_distance_a)
    t = torque_loss(inp.theta, targets)
    s = spark_loss(inp.theta, inp.theta_spark, gains.spark_weight)
    total = t * m + s * (1.0 - m)
    if gains.ik_conditioning:
        total = total + ik_conditioning_loss(table, inp.theta)
    return total


def loss_report(inp: ControllerInput, gains: ControllerGains, table: DHTable):
    """(total, torque, spark, ik, mode_ratio) as plain floats."""
    m = mode_ratio(inp.tau, gains.tau_max, gains.mode_ratio_variant, gains.tau_min)
    targets = torque_targets(inp.theta, inp.tau, gains.target_distance_a)
    t = float(torque_loss(inp.theta, targets))
    s = float(spark_loss(inp.theta, inp.theta_spark, gains.spark_weight))
    ik = float(ik_conditioning_loss(table, inp.theta)) if gains.ik_conditioning else 0.0
    return t * m + s * (1.0 - m) + ik, t, s, ik, m


def combined_gradient(inp: ControllerInput, gains: ControllerGains, table: DHTable) -> np.ndarray:
    """Closed-form gradient of :func:`combined_loss` w.r.t. ``inp.theta``.

    The torque targets are held constant, so the torque term contributes
    2*a*tau; the mirroring term contributes 2*w*(theta - theta_spark); the
    height term chains through the linear z-row of the geometric Jacobian.
    """
    theta = np.asarray(inp.theta, dtype=float)
    tau = np.asarray(inp.tau, dtype=float)
    m = mode_ratio(tau, gains.tau_max, gains.mode_ratio_variant, gains.tau_min)
    g_torque = 2.0 * gains.target_distance_a * tau
    g_spark = 2.0 * gains.spark_weight * (theta - np.asarray(inp.theta_spark, dtype=float))
    grad = m * g_torque + (1.0 - m) * g_spark
    if gains.ik_conditioning:
        z = fk_matrix(table, theta)[2, 3]
        dz_dq = jacobian(table, theta)[2, :]
        grad = grad + 2.0 * IK_WEIGHT * (z - EE_HEIGHT_TARGET) * dz_dq
    return grad


class ForceController:
    """Single-arm velocity controller; owns a short gradient buffer.

    Not safe to share between threads; create one instance per arm.
    """

    def __init__(self, gains: ControllerGains, table: DHTable):
        self.gains = gains
        self.table = table
        self._buffer: deque[np.ndarray] = deque(maxlen=gains.buffer_size)

    def reset(self) -> None:
        self._buffer.clear()

    def step(self, inp: ControllerInput) -> ControllerOutput:
        """One control step: descend the blended loss, velocity-style.

        The command is the negative mean of the buffered gradients times the
        step size. A non-finite gradient zeroes the command and raises the
        fault flag instead of propagating.
        """
        total, t, s, ik, m = loss_report(inp, self.gains, self.table)
        grad = combined_gradient(inp, self.gains, self.table)
        if not np.all(np.isfinite(grad)) or not math.isfinite(total):
            return ControllerOutput(
                joint_speeds=np.zeros(N_JOINTS),
                mode_ratio=m if math.isfinite(m) else 0.0,
                loss_value=total,
                per_mode_losses=(t, s, ik),
                fault="non-finite gradient",
            )
        self._buffer.append(grad)
        mean_grad = np.mean(np.stack(self._buffer), axis=0)
        speeds = -mean_grad * self.gains.step_size_s
        return ControllerOutput(
            joint_speeds=speeds,
            mode_ratio=m,
            loss_value=total,
            per_mode_losses=(t, s, ik),
        )
