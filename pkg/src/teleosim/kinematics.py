"""DH-parameterized serial-arm kinematics for the UR5e and its scaled replica.

Forward kinematics is the ordered product of standard DH joint transforms.
Link geometry (a, d) scales uniformly through ``DHTable.scale`` while joint
offsets and twists stay fixed, so a half-scale leader and the full-scale
follower share joint space exactly.

Gradients of scalar functions of the joint vector are computed with
forward-mode dual numbers (exact to rounding), never with finite
differences; the test suite holds the finite-difference oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

N_JOINTS = 6

TWO_PI = 2.0 * math.pi


class NonFiniteGradientError(ValueError):
    """Loss or its derivative evaluated to NaN/inf at the query point."""


def wrap_angle(x: float) -> float:
    """Wrap an angle to (-pi, pi]. Used only at protocol boundaries."""
    w = math.remainder(x, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


@dataclass(frozen=True)
class DHRow:
    """One joint's DH parameters: rotation offset, link length, offset, twist."""

    theta_offset: float  # rad
    a: float  # m
    d: float  # m
    alpha: float  # rad

    def __post_init__(self):
        for name in ("theta_offset", "a", "d", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"DHRow.{name} must be finite")


@dataclass(frozen=True)
class DHTable:
    """Six DH rows plus a uniform geometric scale applied to a and d."""

    rows: tuple[DHRow, ...]
    scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        if len(self.rows) != N_JOINTS:
            raise ValueError(f"DHTable needs exactly {N_JOINTS} rows, got {len(self.rows)}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError("DHTable.scale must be a positive finite number")

    def scaled(self, factor: float) -> "DHTable":
        """Same geometry rescaled by ``factor`` relative to the current scale."""
        return DHTable(rows=self.rows, scale=self.scale * factor, name=self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "scale": self.scale,
            "rows": [[r.theta_offset, r.a, r.d, r.alpha] for r in self.rows],
        }

    @staticmethod
    def from_json(doc: dict) -> "DHTable":
        rows = tuple(DHRow(*map(float, row)) for row in doc["rows"])
        return DHTable(rows=rows, scale=float(doc.get("scale", 1.0)), name=str(doc.get("name", "")))

    @staticmethod
    def load(path: str) -> "DHTable":
        with open(path, "r", encoding="utf-8") as fh:
            return DHTable.from_json(json.load(fh))


# Canonical UR5e geometry, rows are (theta_offset, a, d, alpha).
UR5E = DHTable(
    rows=(
        DHRow(0.0, 0.0, 0.1625, math.pi / 2),
        DHRow(0.0, -0.425, 0.0, 0.0),
        DHRow(0.0, -0.3922, 0.0, 0.0),
        DHRow(0.0, 0.0, 0.1333, math.pi / 2),
        DHRow(0.0, 0.0, 0.0997, -math.pi / 2),
        DHRow(0.0, 0.0, 0.0996, 0.0),
    ),
    name="ur5e",
)

# Half-scale desk replica of the leader device.
UR5E_LEADER_HALF = DHTable(rows=UR5E.rows, scale=0.5, name="ur5e-leader-half")

PROFILES = {UR5E.name: UR5E, UR5E_LEADER_HALF.name: UR5E_LEADER_HALF}


@dataclass(frozen=True)
class Pose:
    """Rigid pose: 3-vector position and 3x3 rotation with det +1."""

    position: np.ndarray
    rotation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(position=np.zeros(3), rotation=np.eye(3))

    @staticmethod
    def from_matrix(T: np.ndarray) -> "Pose":
        return Pose(position=np.array(T[:3, 3], dtype=float), rotation=np.array(T[:3, :3], dtype=float))

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.position


class Dual:
    """Forward-mode dual number carrying a full 6-vector tangent."""

    __slots__ = ("val", "eps")

    def __init__(self, val: float, eps: np.ndarray):
        self.val = val
        self.eps = eps

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.eps - other.eps)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.val * other.eps + other.val * self.eps)
        return Dual(self.val * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.eps - self.val * inv * other.eps) * inv)
        return Dual(self.val / other, self.eps / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.eps)

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __pow__(self, n):
        if n == 2:
            return Dual(self.val * self.val, 2.0 * self.val * self.eps)
        return Dual(self.val**n, n * self.val ** (n - 1) * self.eps)

    def cos(self):
        return Dual(math.cos(self.val), -math.sin(self.val) * self.eps)

    def sin(self):
        return Dual(math.sin(self.val), math.cos(self.val) * self.eps)

    def sqrt(self):
        r = math.sqrt(self.val)
        return Dual(r, 0.5 / r * self.eps)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.eps!r})"


def _cos(x):
    return x.cos() if isinstance(x, Dual) else math.cos(x)


def _sin(x):
    return x.sin() if isinstance(x, Dual) else math.sin(x)


def dh_matrix(row: DHRow, theta, scale: float = 1.0) -> np.ndarray:
    """4x4 standard DH transform. ``theta`` may be a float or a Dual."""
    ct, st = _cos(theta), _sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    a = row.a * scale
    d = row.d * scale
    dtype = object if isinstance(theta, Dual) else float
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ],
        dtype=dtype,
    )


def joint_transform(row: DHRow, theta: float) -> Pose:
    """Pose of one joint's DH transform at the given joint angle."""
    return Pose.from_matrix(dh_matrix(row, row.theta_offset + theta))


def fk_matrix(table: DHTable, q: Sequence) -> np.ndarray:
    """End-effector transform as the ordered product of the six joint transforms.

    Accepts Dual-valued joint angles, in which case the result carries
    derivatives.
    """
    if len(q) != N_JOINTS:
        raise ValueError(f"expected {N_JOINTS} joint angles, got {len(q)}")
    T = None
    for row, qi in zip(table.rows, q):
        A = dh_matrix(row, row.theta_offset + qi, table.scale)
        T = A if T is None else T @ A
    return T


def forward_kinematics(table: DHTable, q: Sequence[float]) -> Pose:
    """End-effector pose at joint vector ``q`` (radians)."""
    return Pose.from_matrix(fk_matrix(table, [float(qi) for qi in q]))


def frame_chain(table: DHTable, q: Sequence[float]) -> list[np.ndarray]:
    """Partial transforms [I, A1, A1A2, ..., A1..A6]; base frame first."""
    T = np.eye(4)
    frames = [T]
    for row, qi in zip(table.rows, q):
        T = T @ dh_matrix(row, row.theta_offset + float(qi), table.scale)
        frames.append(T)
    return frames


def jacobian(table: DHTable, q: Sequence[float]) -> np.ndarray:
    """Geometric end-effector Jacobian, rows [linear(3); angular(3)].

    Built from joint axes and origins (cross-product form), so the contact
    force path needs no differentiation; agreement of the linear block with
    the FK derivative is covered by tests.
    """
    frames = frame_chain(table, q)
    p_ee = frames[-1][:3, 3]
    J = np.zeros((6, N_JOINTS))
    for i in range(N_JOINTS):
        z = frames[i][:3, 2]
        r = p_ee - frames[i][:3, 3]
        J[0, i] = z[1] * r[2] - z[2] * r[1]
        J[1, i] = z[2] * r[0] - z[0] * r[2]
        J[2, i] = z[0] * r[1] - z[1] * r[0]
        J[3:, i] = z
    return J


def loss_gradient(
    table: DHTable, q: Sequence[float], loss: Callable[[np.ndarray], object]
) -> np.ndarray:
    """Exact gradient of ``loss`` w.r.t. the joint vector via dual numbers.

    ``loss`` receives the joint vector as an object array of Duals and must
    be written in terms of arithmetic, cos/sin/sqrt, and ``fk_matrix``-style
    chains. A loss that ignores its input yields the zero vector.

    Raises NonFiniteGradientError when the loss value or any derivative
    component is not finite.
    """
    if len(q) != N_JOINTS:
        raise ValueError(f"expected {N_JOINTS} joint angles, got {len(q)}")
    seeds = np.eye(N_JOINTS)
    lifted = np.array([Dual(float(q[i]), seeds[i]) for i in range(N_JOINTS)], dtype=object)
    out = loss(lifted)
    if isinstance(out, Dual):
        value = out.val
        grad = np.asarray(out.eps, dtype=float)
    else:
        value = float(out)
        grad = np.zeros(N_JOINTS)
    if not (math.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteGradientError(f"non-finite loss/gradient at q={list(map(float, q))}")
    return grad
