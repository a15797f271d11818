"""Leader sources, success predicates, and the bundled task scenarios.

Scenario waypoints are joint-space constants chosen so the grip point hits
the prop and goal locations exactly; props and goal regions below were
placed from those forward-kinematics positions, never the other way
around. Per-seed variation stretches segment timing, not geometry, so a
scripted press reaches the same depth on every seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .haptics import quantize_encoder
from .world import HOME_Q, ContactModel, PropConfig, World, WorldConfig

TABLE_HEIGHT = 0.25
PROP_RADIUS = 0.02


@dataclass(frozen=True)
class Waypoint:
    t: float
    q: tuple[float, ...]
    gripper: float


@dataclass
class LeaderScript:
    """Piecewise-linear joint trajectory with strictly increasing times."""

    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        times = [w.t for w in self.waypoints]
        if not times:
            raise ValueError("script needs at least one waypoint")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    def time_warped(self, jitter: float, rng: random.Random) -> "LeaderScript":
        """Rescale each segment duration by U[1-jitter, 1+jitter]."""
        if jitter <= 0.0 or len(self.waypoints) < 2:
            return self
        out = [self.waypoints[0]]
        t = self.waypoints[0].t
        for prev, cur in zip(self.waypoints, self.waypoints[1:]):
            t += (cur.t - prev.t) * rng.uniform(1.0 - jitter, 1.0 + jitter)
            out.append(replace(cur, t=t))
        return LeaderScript(waypoints=tuple(out))

    def sample(self, t: float) -> tuple[np.ndarray, float]:
        wps = self.waypoints
        if t <= wps[0].t:
            return np.array(wps[0].q), wps[0].gripper
        if t >= wps[-1].t:
            return np.array(wps[-1].q), wps[-1].gripper
        for a, b in zip(wps, wps[1:]):
            if t <= b.t:
                u = (t - a.t) / (b.t - a.t)
                q = (1.0 - u) * np.array(a.q) + u * np.array(b.q)
                g = (1.0 - u) * a.gripper + u * b.gripper
                return q, g
        return np.array(wps[-1].q), wps[-1].gripper  # unreachable

    def to_json(self) -> list:
        return [[w.t, list(w.q), w.gripper] for w in self.waypoints]

    @staticmethod
    def from_json(doc: list) -> "LeaderScript":
        return LeaderScript(
            waypoints=tuple(Waypoint(t=float(t), q=tuple(map(float, q)), gripper=float(g)) for t, q, g in doc)
        )


class ScriptedLeader:
    """Samples a per-arm script at the 30 Hz send schedule, quantized like
    the leader's magnetic encoders."""

    def __init__(self, scripts: dict[int, LeaderScript], encoder_bits: Optional[int] = 14):
        self.scripts = scripts
        self.encoder_bits = encoder_bits

    def state_at(self, arm: int, t: float) -> tuple[np.ndarray, float]:
        q, g = self.scripts[arm].sample(t)
        if self.encoder_bits:
            q = np.array([quantize_encoder(float(v), self.encoder_bits) for v in q])
        return q, g

    def arms(self) -> list[int]:
        return sorted(self.scripts)


class ReplayLeader:
    """Re-emits a recorded wire stream verbatim at its recorded times.

    Entries are consumed exactly once, in recorded order, so boundary
    timestamps cannot double-deliver across adjacent tick windows.
    """

    def __init__(self, sends: list[tuple[float, int, tuple[float, ...], float]]):
        self.sends = list(sends)
        self._cursor = 0

    def arms(self) -> list[int]:
        return sorted({arm for _, arm, _, _ in self.sends})

    def due(self, t_to: float):
        while self._cursor < len(self.sends):
            t, arm, q, g = self.sends[self._cursor]
            if t > t_to + 1e-12:
                break
            self._cursor += 1
            yield t, arm, np.array(q), g


def load_leader_stream(text: str) -> ReplayLeader:
    """Parse a JSON-lines leader stream: one ``{t, arm, q:[6], g}`` per line.

    Session logs qualify too; their send lines carry the same fields and
    everything else is skipped.
    """
    sends = []
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        if doc.get("type") not in (None, "send"):
            continue
        if not all(k in doc for k in ("t", "arm", "q", "g")):
            continue
        sends.append((float(doc["t"]), int(doc["arm"]), tuple(float(v) for v in doc["q"]), float(doc["g"])))
    if not sends:
        raise ValueError("no leader states found in the stream")
    return ReplayLeader(sends)


# -- success predicates ----------------------------------------------------


@dataclass(frozen=True)
class SuccessSpec:
    """Serializable success predicate over instantaneous world state."""

    kind: str
    prop: int = 0
    arm: int = 0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.05
    gap: float = 0.02
    require_released: bool = False

    def evaluate(self, world: World) -> bool:
        if self.kind == "immediate":
            return True
        if self.kind == "prop_in_region":
            prop = world.props[self.prop]
            if self.require_released and prop.attached_to is not None:
                return False
            return float(np.linalg.norm(prop.position - np.array(self.center))) <= self.radius
        if self.kind == "prop_attached":
            return world.props[self.prop].attached_to == self.arm
        if self.kind == "ee_gap_below":
            d = float(np.linalg.norm(world.ee_pose(0).position - world.ee_pose(1).position))
            return d - 2.0 * world.config.contact.ee_radius < self.gap
        if self.kind == "ee_in_region":
            p = world.ee_pose(self.arm).position
            return float(np.linalg.norm(p - np.array(self.center))) <= self.radius
        raise ValueError(f"unknown success kind {self.kind!r}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "prop": self.prop,
            "arm": self.arm,
            "center": list(self.center),
            "radius": self.radius,
            "gap": self.gap,
            "require_released": self.require_released,
        }

    @staticmethod
    def from_json(doc: dict) -> "SuccessSpec":
        return SuccessSpec(
            kind=str(doc["kind"]),
            prop=int(doc.get("prop", 0)),
            arm=int(doc.get("arm", 0)),
            center=tuple(float(v) for v in doc.get("center", (0, 0, 0))),
            radius=float(doc.get("radius", 0.05)),
            gap=float(doc.get("gap", 0.02)),
            require_released=bool(doc.get("require_released", False)),
        )


@dataclass
class Scenario:
    name: str
    world: WorldConfig
    scripts: dict[int, LeaderScript]
    success: SuccessSpec
    timeout: float
    tags: tuple[str, ...] = ()
    time_jitter: float = 0.0
    auto_reset_delay: float = 0.5
    initial_attach: tuple[tuple[int, int], ...] = ()  # (prop index, arm)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "world": self.world.to_json(),
            "scripts": {str(arm): s.to_json() for arm, s in self.scripts.items()},
            "success": self.success.to_json(),
            "timeout": self.timeout,
            "tags": list(self.tags),
            "time_jitter": self.time_jitter,
            "auto_reset_delay": self.auto_reset_delay,
            "initial_attach": [list(p) for p in self.initial_attach],
        }

    @staticmethod
    def from_json(doc: dict) -> "Scenario":
        return Scenario(
            name=str(doc["name"]),
            world=WorldConfig.from_json(doc["world"]),
            scripts={int(arm): LeaderScript.from_json(s) for arm, s in doc["scripts"].items()},
            success=SuccessSpec.from_json(doc["success"]),
            timeout=float(doc["timeout"]),
            tags=tuple(doc.get("tags", ())),
            time_jitter=float(doc.get("time_jitter", 0.0)),
            auto_reset_delay=float(doc.get("auto_reset_delay", 0.5)),
            initial_attach=tuple((int(p), int(a)) for p, a in doc.get("initial_attach", ())),
        )


# -- bundled scenarios -----------------------------------------------------

HOME = tuple(HOME_Q)

# joint constants solved offline for world EE / grip-point targets
PLACE_ABOVE = (-0.007028, -1.601138, 1.826667, -1.796325, -1.570796, 0.0)  # ee (-0.13, 0.13, 0.40)
PLACE_HOVER = (-0.007028, -1.535945, 1.977604, -2.012455, -1.570796, 0.0)  # ee (-0.13, 0.13, 0.32)
PLACE_PRESS = (-0.007028, -1.49315, 2.033077, -2.110723, -1.570796, 0.0)  # ee (-0.13, 0.13, 0.285)
GRASP_ABOVE = (-0.007028, -1.620322, 1.715773, -1.666247, -1.570796, 0.0)  # ee (-0.13, 0.13, 0.45)
GRASP_AT = (-0.007028, -1.565584, 1.924854, -1.930067, -1.570796, 0.0)  # ee (-0.13, 0.13, 0.35)
INSERT_WP = (-0.153116, -1.465021, 1.530147, -1.635923, -1.570796, 0.0)  # ee (-0.05, 0.05, 0.46)
PROX_A = (-0.225533, -1.462412, 1.552811, -1.661195, -1.570796, 0.0)  # ee (-0.0475, 0.01, 0.45)
PROX_B = PROX_A  # mirrored base placement gives ee (0.0475, -0.01, 0.45)
HAND_ABOVE = (-0.224036, -1.347629, 1.417448, -1.640615, -1.570796, 0.0)  # ee (0, 0, 0.45)
HAND_LOW = (-0.224036, -1.258459, 1.69926, -2.011597, -1.570796, 0.0)  # ee (0, 0, 0.30)
HAND_B_AT = (-0.224036, -1.302213, 1.620306, -1.888889, -1.570796, 0.0)  # ee (0, 0, 0.35)

PRESS_XY = (-0.13, 0.13)
GRASP_PROP = (-0.13, 0.13, TABLE_HEIGHT + PROP_RADIUS)
INSERT_GOAL = (-0.05, 0.05, 0.38)  # grip point of INSERT_WP
HAND_DROP = (0.0, 0.0, TABLE_HEIGHT + PROP_RADIUS)


def _world(props: tuple[PropConfig, ...] = (), home_on_reset: bool = False) -> WorldConfig:
    return WorldConfig(
        contact=ContactModel(table_height=TABLE_HEIGHT),
        props=props,
        home_on_reset=home_on_reset,
    )


def _park(gripper: float = 0.8) -> LeaderScript:
    return LeaderScript(waypoints=(Waypoint(0.0, HOME, gripper),))


def _script(*points: tuple[float, tuple[float, ...], float]) -> LeaderScript:
    return LeaderScript(waypoints=tuple(Waypoint(t, q, g) for t, q, g in points))


def _place() -> Scenario:
    # press a held prop 15 mm into the table, release, retract
    hold, open_ = 0.2, 0.8
    return Scenario(
        name="place",
        world=_world(
            props=(PropConfig(position=(*PRESS_XY, TABLE_HEIGHT + PROP_RADIUS), radius=PROP_RADIUS),),
            home_on_reset=True,
        ),
        scripts={
            0: _script(
                (0.0, HOME, hold),
                (1.5, PLACE_ABOVE, hold),
                (2.2, PLACE_HOVER, hold),
                (4.2, PLACE_PRESS, hold),
                (5.5, PLACE_PRESS, hold),
                (5.8, PLACE_PRESS, open_),
                (7.0, PLACE_ABOVE, open_),
            ),
            1: _park(),
        },
        success=SuccessSpec(
            kind="prop_in_region",
            prop=0,
            center=(*PRESS_XY, TABLE_HEIGHT + PROP_RADIUS),
            radius=0.05,
            require_released=True,
        ),
        timeout=12.0,
        tags=("positional-precision", "large-movements", "contact-rich"),
        time_jitter=0.05,
        initial_attach=((0, 0),),
    )


def _precision_grasp() -> Scenario:
    open_, closed = 0.8, 0.1
    return Scenario(
        name="precision-grasp",
        world=_world(
            props=(PropConfig(position=GRASP_PROP, radius=PROP_RADIUS, attach_radius=0.02),),
        ),
        scripts={
            0: _script(
                (0.0, HOME, open_),
                (1.5, GRASP_ABOVE, open_),
                (3.0, GRASP_AT, open_),
                (3.8, GRASP_AT, closed),
                (5.0, GRASP_ABOVE, closed),
            ),
            1: _park(),
        },
        success=SuccessSpec(kind="prop_attached", prop=0, arm=0),
        timeout=10.0,
        tags=("positional-precision", "rotational-precision"),
        time_jitter=0.05,
    )


def _insert() -> Scenario:
    hold = 0.2
    return Scenario(
        name="insert",
        world=_world(
            props=(PropConfig(position=GRASP_PROP, radius=PROP_RADIUS),),
        ),
        scripts={
            0: _script(
                (0.0, HOME, hold),
                (2.0, INSERT_WP, hold),
                (3.2, INSERT_WP, hold),
                (4.5, HOME, hold),
            ),
            1: _park(),
        },
        success=SuccessSpec(kind="prop_in_region", prop=0, center=INSERT_GOAL, radius=0.02),
        timeout=10.0,
        tags=("positional-precision", "rotational-precision", "large-movements"),
        time_jitter=0.05,
        initial_attach=((0, 0),),
    )


def _proximity() -> Scenario:
    return Scenario(
        name="proximity",
        world=_world(),
        scripts={
            0: _script((0.0, HOME, 0.8), (3.0, PROX_A, 0.8), (5.0, PROX_A, 0.8)),
            1: _script((0.0, HOME, 0.8), (3.0, PROX_B, 0.8), (5.0, PROX_B, 0.8)),
        },
        success=SuccessSpec(kind="ee_gap_below", gap=0.02),
        timeout=10.0,
        tags=("bimanual-collaboration", "rotational-precision"),
        time_jitter=0.05,
    )


def _handover() -> Scenario:
    hold, open_ = 0.2, 0.8
    return Scenario(
        name="handover",
        world=_world(
            props=(PropConfig(position=HAND_DROP, radius=PROP_RADIUS),),
        ),
        scripts={
            0: _script(
                (0.0, HOME, hold),
                (2.0, HAND_ABOVE, hold),
                (3.5, HAND_LOW, hold),
                (3.9, HAND_LOW, open_),
                (5.5, HOME, open_),
            ),
            1: _script(
                (0.0, HOME, open_),
                (5.5, HOME, open_),
                (7.0, HAND_ABOVE, open_),
                (8.5, HAND_B_AT, open_),
                (9.3, HAND_B_AT, hold),
                (11.0, HAND_ABOVE, hold),
            ),
        },
        success=SuccessSpec(kind="prop_attached", prop=0, arm=1),
        timeout=16.0,
        tags=("positional-precision", "bimanual-collaboration", "contact-rich"),
        time_jitter=0.05,
        initial_attach=((0, 0),),
    )


def _trivial() -> Scenario:
    return Scenario(
        name="trivial",
        world=_world(),
        scripts={0: _park(), 1: _park()},
        success=SuccessSpec(kind="immediate"),
        timeout=1.0,
        tags=(),
    )


def bundled_scenarios() -> dict[str, Scenario]:
    out = {}
    for build in (_place, _precision_grasp, _insert, _proximity, _handover, _trivial):
        sc = build()
        out[sc.name] = sc
    return out


def get_scenario(name: str) -> Scenario:
    scns = bundled_scenarios()
    if name not in scns:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(scns)}")
    return scns[name]
