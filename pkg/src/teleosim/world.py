"""Deterministic fixed-timestep world: two velocity-driven arms, a table
plane, graspable props, spring-damper contact, and the force e-stop latch.

There are no rigid-body dynamics. Joints integrate commanded velocities
under an acceleration cap, contact forces come from sphere penetration
against the table plane and the peer end effector, and joint torques are
the Jacobian-transpose image of the contact wrench. That is exactly the
state the compliance controller consumes (q and tau), so nothing more is
modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kinematics
from .kinematics import N_JOINTS, DHTable, Pose

DEFAULT_DT = 0.01  # 100 Hz control tick
ACCEL_LIMIT = 6.0  # rad/s^2, the speedJ acceleration argument
ESTOP_FORCE_THRESHOLD = 25.0  # N

HOME_Q = (0.0, -math.pi / 2, math.pi / 2, -math.pi / 2, -math.pi / 2, 0.0)


@dataclass
class ContactModel:
    table_height: float = 0.0
    stiffness_k: float = 3000.0  # N/m
    damping_c: float = 50.0  # N*s/m
    ee_radius: float = 0.05  # m

    def __post_init__(self):
        if self.stiffness_k <= 0 or self.damping_c < 0 or self.ee_radius <= 0:
            raise ValueError("contact model needs k > 0, c >= 0, radius > 0")

    def to_json(self) -> dict:
        return {
            "table_height": self.table_height,
            "stiffness_k": self.stiffness_k,
            "damping_c": self.damping_c,
            "ee_radius": self.ee_radius,
        }

    @staticmethod
    def from_json(doc: dict) -> "ContactModel":
        return ContactModel(
            table_height=float(doc.get("table_height", 0.0)),
            stiffness_k=float(doc.get("stiffness_k", 3000.0)),
            damping_c=float(doc.get("damping_c", 50.0)),
            ee_radius=float(doc.get("ee_radius", 0.05)),
        )


@dataclass
class GraspRule:
    """Boolean attach model: a closing gripper captures a prop in reach.

    Proximity is measured from the grip point, offset tcp_offset meters
    along the tool axis from the flange, so grasping a tabletop prop does
    not drive the end-effector sphere into the table.
    """

    attach_radius: float = 0.06
    close_threshold: float = 0.3  # aperture below this counts as closed
    open_threshold: float = 0.5  # aperture above this releases
    tcp_offset: float = 0.08  # m along the tool z-axis

    def to_json(self) -> dict:
        return {
            "attach_radius": self.attach_radius,
            "close_threshold": self.close_threshold,
            "open_threshold": self.open_threshold,
            "tcp_offset": self.tcp_offset,
        }

    @staticmethod
    def from_json(doc: dict) -> "GraspRule":
        return GraspRule(
            attach_radius=float(doc.get("attach_radius", 0.06)),
            close_threshold=float(doc.get("close_threshold", 0.3)),
            open_threshold=float(doc.get("open_threshold", 0.5)),
            tcp_offset=float(doc.get("tcp_offset", 0.08)),
        )


@dataclass
class PropConfig:
    position: tuple[float, float, float]
    radius: float = 0.02
    attach_radius: Optional[float] = None  # falls back to the grasp rule

    def to_json(self) -> dict:
        doc = {"position": list(self.position), "radius": self.radius}
        if self.attach_radius is not None:
            doc["attach_radius"] = self.attach_radius
        return doc

    @staticmethod
    def from_json(doc: dict) -> "PropConfig":
        ar = doc.get("attach_radius")
        return PropConfig(
            position=tuple(float(v) for v in doc["position"]),
            radius=float(doc.get("radius", 0.02)),
            attach_radius=None if ar is None else float(ar),
        )


@dataclass
class BasePose:
    position: tuple[float, float, float]
    yaw: float = 0.0

    def pose(self) -> Pose:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return Pose(position=np.array(self.position, dtype=float), rotation=R)

    def to_json(self) -> dict:
        return {"position": list(self.position), "yaw": self.yaw}

    @staticmethod
    def from_json(doc: dict) -> "BasePose":
        return BasePose(position=tuple(float(v) for v in doc["position"]), yaw=float(doc.get("yaw", 0.0)))


@dataclass
class WorldConfig:
    profile: str = "ur5e"
    contact: ContactModel = field(default_factory=ContactModel)
    base_poses: tuple[BasePose, BasePose] = (
        BasePose(position=(-0.6, 0.0, 0.0), yaw=math.pi),
        BasePose(position=(0.6, 0.0, 0.0), yaw=0.0),
    )
    estop_threshold: float = ESTOP_FORCE_THRESHOLD
    home_q: tuple[float, ...] = HOME_Q
    qd_limit: float = math.pi
    accel_limit: float = ACCEL_LIMIT
    dt: float = DEFAULT_DT
    home_on_reset: bool = False
    props: tuple[PropConfig, ...] = ()
    grasp: GraspRule = field(default_factory=GraspRule)

    def table(self) -> DHTable:
        return kinematics.PROFILES[self.profile]

    def to_json(self) -> dict:
        return {
            "profile": self.profile,
            "contact": self.contact.to_json(),
            "base_poses": [b.to_json() for b in self.base_poses],
            "estop_threshold": self.estop_threshold,
            "home_q": list(self.home_q),
            "qd_limit": self.qd_limit,
            "accel_limit": self.accel_limit,
            "dt": self.dt,
            "home_on_reset": self.home_on_reset,
            "props": [p.to_json() for p in self.props],
            "grasp": self.grasp.to_json(),
        }

    @staticmethod
    def from_json(doc: dict) -> "WorldConfig":
        base = WorldConfig()
        bases = doc.get("base_poses")
        props = doc.get("props", [])
        return WorldConfig(
            profile=str(doc.get("profile", base.profile)),
            contact=ContactModel.from_json(doc.get("contact", {})),
            base_poses=tuple(BasePose.from_json(b) for b in bases) if bases else base.base_poses,
            estop_threshold=float(doc.get("estop_threshold", base.estop_threshold)),
            home_q=tuple(float(v) for v in doc.get("home_q", base.home_q)),
            qd_limit=float(doc.get("qd_limit", base.qd_limit)),
            accel_limit=float(doc.get("accel_limit", base.accel_limit)),
            dt=float(doc.get("dt", base.dt)),
            home_on_reset=bool(doc.get("home_on_reset", base.home_on_reset)),
            props=tuple(PropConfig.from_json(p) for p in props),
            grasp=GraspRule.from_json(doc.get("grasp", {})),
        )


@dataclass
class EStopState:
    tripped: bool = False
    trip_force: float = 0.0
    trip_tick: int = -1
    count: int = 0


@dataclass
class ArmState:
    q: np.ndarray
    qd: np.ndarray
    gripper: float  # aperture fraction, 1 = fully open
    base_pose: Pose
    estop: EStopState = field(default_factory=EStopState)


@dataclass
class Prop:
    position: np.ndarray
    radius: float
    attach_radius: float
    attached_to: Optional[int] = None


@dataclass
class ArmCommand:
    qd: np.ndarray
    gripper: float

    @staticmethod
    def hold(gripper: float) -> "ArmCommand":
        return ArmCommand(qd=np.zeros(N_JOINTS), gripper=gripper)


@dataclass
class SenseFrame:
    """One tick's sensor snapshot: per-arm EE wrench and joint torques."""

    tick: int
    sim_time: float
    wrenches: tuple[np.ndarray, np.ndarray]  # world frame, (fx fy fz tx ty tz)
    joint_torques: tuple[np.ndarray, np.ndarray]
    estop_tripped: tuple[bool, bool]

    def to_json(self) -> dict:
        return {
            "tick": self.tick,
            "sim_time": self.sim_time,
            "wrenches": [list(map(float, w)) for w in self.wrenches],
            "joint_torques": [list(map(float, t)) for t in self.joint_torques],
            "estop_tripped": list(self.estop_tripped),
        }


def estop_check(force, threshold: float) -> bool:
    """True when the force vector's Euclidean norm exceeds the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    return float(np.linalg.norm(np.asarray(force, dtype=float))) > threshold


def plane_contact_force(p_ee, v_ee, model: ContactModel):
    """Spring-damper normal force of the EE sphere against the table plane.

    Returns (force 3-vector, penetration depth). The damper acts along the
    penetration rate and the total normal force never pulls downward.
    """
    pen = model.table_height - (p_ee[2] - model.ee_radius)
    if pen <= 0.0:
        return np.zeros(3), 0.0
    pen_rate = -v_ee[2]
    fz = max(0.0, model.stiffness_k * pen + model.damping_c * pen_rate)
    return np.array([0.0, 0.0, fz]), pen


def sphere_pair_force(pa, pb, stiffness: float, radius: float):
    """Equal-and-opposite spring forces between two overlapping EE spheres."""
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    delta = pa - pb
    dist = float(np.linalg.norm(delta))
    overlap = 2.0 * radius - dist
    if overlap <= 0.0 or dist == 0.0:
        z = np.zeros(3)
        return z, -z
    direction = delta / dist
    f = stiffness * overlap * direction
    return f, -f


def inter_arm_contact(state_a: "ArmState", state_b: "ArmState", model: ContactModel, table: DHTable):
    """Wrench pair from EE-sphere overlap between two arms (world frame).

    Forces act along the center line, equal and opposite; the contact point
    lies on that line so the torque components are exactly zero.
    """
    pa = state_a.base_pose.transform_point(kinematics.forward_kinematics(table, state_a.q).position)
    pb = state_b.base_pose.transform_point(kinematics.forward_kinematics(table, state_b.q).position)
    fa, fb = sphere_pair_force(pa, pb, model.stiffness_k, model.ee_radius)
    return np.concatenate([fa, np.zeros(3)]), np.concatenate([fb, np.zeros(3)])


class World:
    """Two arms, props, contacts, and e-stop latches behind one tick loop.

    Single-owner: exactly one caller advances :meth:`world_step`; readers
    consume the returned immutable SenseFrames.
    """

    N_ARMS = 2

    def __init__(self, config: WorldConfig):
        self.config = config
        self.table = config.table()
        self.tick = 0
        self.sim_time = 0.0
        self.arms = [
            ArmState(
                q=np.array(config.home_q, dtype=float),
                qd=np.zeros(N_JOINTS),
                gripper=1.0,
                base_pose=bp.pose(),
            )
            for bp in config.base_poses
        ]
        self.props = [
            Prop(
                position=np.array(p.position, dtype=float),
                radius=p.radius,
                attach_radius=p.attach_radius if p.attach_radius is not None else config.grasp.attach_radius,
            )
            for p in config.props
        ]

    # -- kinematic queries -------------------------------------------------

    def ee_pose(self, arm: int) -> Pose:
        local = kinematics.forward_kinematics(self.table, self.arms[arm].q)
        base = self.arms[arm].base_pose
        return Pose(
            position=base.transform_point(local.position),
            rotation=base.rotation @ local.rotation,
        )

    def world_jacobian(self, arm: int) -> np.ndarray:
        J = kinematics.jacobian(self.table, self.arms[arm].q)
        R = self.arms[arm].base_pose.rotation
        Jw = np.zeros_like(J)
        Jw[:3, :] = R @ J[:3, :]
        Jw[3:, :] = R @ J[3:, :]
        return Jw

    def ee_velocity(self, arm: int) -> np.ndarray:
        return self.world_jacobian(arm)[:3, :] @ self.arms[arm].qd

    def grip_point(self, arm: int) -> np.ndarray:
        return self.ee_pose(arm).transform_point((0.0, 0.0, self.config.grasp.tcp_offset))

    def attach_prop(self, prop_index: int, arm: int) -> None:
        """Force-attach a prop to an arm (scenario initial conditions)."""
        prop = self.props[prop_index]
        prop.attached_to = arm
        prop.position = self._held_position(arm, prop)

    def _held_position(self, arm: int, prop: Prop) -> np.ndarray:
        p = self.grip_point(arm)
        p[2] = max(p[2], self.config.contact.table_height + prop.radius)
        return p

    # -- e-stop ------------------------------------------------------------

    def estop_reset(self, arm: int) -> None:
        """Clear the latch; no-op when not tripped. The count survives."""
        state = self.arms[arm]
        if not state.estop.tripped:
            return
        state.estop.tripped = False
        if self.config.home_on_reset:
            state.q = np.array(self.config.home_q, dtype=float)
            state.qd = np.zeros(N_JOINTS)

    def any_estop(self) -> bool:
        return any(a.estop.tripped for a in self.arms)

    # -- stepping ----------------------------------------------------------

    def world_step(self, commands: list[ArmCommand], dt: Optional[float] = None) -> SenseFrame:
        """Advance one tick under per-arm velocity commands.

        Velocity setpoints are tracked under the acceleration cap, e-stopped
        arms stay frozen, contacts are evaluated at the new state, and the
        e-stop latch is checked against the resulting EE force.
        """
        dt = self.config.dt if dt is None else dt
        if dt <= 0:
            raise ValueError("dt must be > 0")
        for state, cmd in zip(self.arms, commands):
            if state.estop.tripped:
                state.qd = np.zeros(N_JOINTS)
                continue
            target = np.clip(np.asarray(cmd.qd, dtype=float), -self.config.qd_limit, self.config.qd_limit)
            dv = np.clip(target - state.qd, -self.config.accel_limit * dt, self.config.accel_limit * dt)
            state.qd = state.qd + dv
            state.q = state.q + state.qd * dt
            state.gripper = min(max(float(cmd.gripper), 0.0), 1.0)

        self._update_props()

        jacobians = [self.world_jacobian(i) for i in range(self.N_ARMS)]
        ee_p = [self.ee_pose(i).position for i in range(self.N_ARMS)]
        ee_v = [jacobians[i][:3, :] @ self.arms[i].qd for i in range(self.N_ARMS)]
        forces = [np.zeros(3) for _ in range(self.N_ARMS)]
        for i in range(self.N_ARMS):
            f_table, _ = plane_contact_force(ee_p[i], ee_v[i], self.config.contact)
            forces[i] = forces[i] + f_table
        f_ab, f_ba = sphere_pair_force(
            ee_p[0], ee_p[1], self.config.contact.stiffness_k, self.config.contact.ee_radius
        )
        forces[0] = forces[0] + f_ab
        forces[1] = forces[1] + f_ba

        wrenches = []
        torques = []
        for i in range(self.N_ARMS):
            w = np.concatenate([forces[i], np.zeros(3)])
            tau = jacobians[i].T @ w
            wrenches.append(w)
            torques.append(tau)

        self.tick += 1
        self.sim_time += dt

        for i, state in enumerate(self.arms):
            if not state.estop.tripped and estop_check(forces[i], self.config.estop_threshold):
                state.estop.tripped = True
                state.estop.trip_force = float(np.linalg.norm(forces[i]))
                state.estop.trip_tick = self.tick
                state.estop.count += 1
                state.qd = np.zeros(N_JOINTS)

        return SenseFrame(
            tick=self.tick,
            sim_time=self.sim_time,
            wrenches=(wrenches[0], wrenches[1]),
            joint_torques=(torques[0], torques[1]),
            estop_tripped=(self.arms[0].estop.tripped, self.arms[1].estop.tripped),
        )

    def _update_props(self) -> None:
        grasp = self.config.grasp
        grips = [self.grip_point(i) for i in range(self.N_ARMS)]
        for prop in self.props:
            if prop.attached_to is not None:
                holder = self.arms[prop.attached_to]
                if holder.gripper > grasp.open_threshold:
                    prop.attached_to = None
                    # released props settle straight down onto the table
                    prop.position[2] = self.config.contact.table_height + prop.radius
                else:
                    prop.position = self._held_position(prop.attached_to, prop)
        for i, state in enumerate(self.arms):
            if state.gripper >= grasp.close_threshold:
                continue
            for prop in self.props:
                if prop.attached_to == i:
                    continue
                if prop.attached_to is not None:
                    other = self.arms[prop.attached_to]
                    if other.gripper <= grasp.open_threshold:
                        continue  # still held by the other arm
                if float(np.linalg.norm(grips[i] - prop.position)) <= prop.attach_radius:
                    prop.attached_to = i
                    prop.position = self._held_position(i, prop)
                    break
