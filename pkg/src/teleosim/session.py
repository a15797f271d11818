"""Session machinery: the shared control loop, the scripted session runner,
replay, and report aggregation.

The control loop wires leader messages through the simulated channel into
per-arm zero-order holds, turns held targets into velocity commands (force
controller or pure mirroring), steps the world, and ships force frames back
to the leader side where the glove mapping runs. The scripted runner adds
the 30 Hz send schedule, the e-stop auto-reset operator, the paused task
timer, and a replayable JSON-lines log. Everything is driven off the fixed
100 Hz tick with frames stamped at their exact 30 Hz schedule times, so a
(scenario, variant, seed) triple fully determines every logged byte.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .controller import ControllerGains, ControllerInput, ForceController
from .haptics import GloveFrame, HapticConfig, force_to_glove
from .link import (
    Channel,
    ChannelConfig,
    HoldState,
    MessageKind,
    ZeroOrderHold,
    channel_profile,
    event,
    follower_force,
    leader_state,
)
from .scenarios import ReplayLeader, Scenario, ScriptedLeader
from .world import ArmCommand, SenseFrame, World

VARIANTS = ("basic", "fg", "fc", "fgc")

SEND_RATE_HZ = 30.0
MICROS = 1_000_000


class ConfigMismatch(ValueError):
    """Log metadata fails its recorded configuration hash."""


@dataclass
class VariantConfig:
    mode: str

    def __post_init__(self):
        if self.mode not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def glove_enabled(self) -> bool:
        return self.mode in ("fg", "fgc")

    @property
    def force_controller_enabled(self) -> bool:
        return self.mode in ("fc", "fgc")


@dataclass
class ArmTick:
    hold: HoldState
    mode_ratio: float
    glove: GloveFrame


@dataclass
class TickOutput:
    frame: SenseFrame
    arms: list[ArmTick]
    new_estops: list[int]
    stopped_at_start: bool


class ControlLoop:
    """Link + controllers + world for one session; advanced by one owner.

    Leader input arrives through :meth:`send_leader` / :meth:`send_pedal`
    (already stamped with sim time); :meth:`tick` advances one fixed step.
    """

    def __init__(
        self,
        world: World,
        variant: VariantConfig,
        gains: ControllerGains,
        haptics: HapticConfig,
        down_cfg: ChannelConfig,
        up_cfg: ChannelConfig,
        stale_timeout: float = 0.25,
    ):
        self.world = world
        self.variant = variant
        self.gains = gains
        self.haptics = haptics
        self.down = Channel(down_cfg)
        self.up = Channel(up_cfg)
        self.holds = [ZeroOrderHold(stale_timeout=stale_timeout) for _ in range(World.N_ARMS)]
        self.controllers = [
            ForceController(gains, world.table) if variant.force_controller_enabled else None
            for _ in range(World.N_ARMS)
        ]
        # mirror gain matches the controller's pull at zero torque
        self.mirror_gain = 2.0 * gains.step_size_s
        self.last_tau = [np.zeros(6) for _ in range(World.N_ARMS)]
        self.leader_wrench = [np.zeros(6) for _ in range(World.N_ARMS)]
        self._seqs: dict[tuple[int, int], int] = {}
        self._next_force = {arm: 0.0 for arm in range(World.N_ARMS)}

    def next_seq(self, kind: MessageKind, arm: int) -> int:
        key = (int(kind), arm)
        self._seqs[key] = self._seqs.get(key, 0) + 1
        return self._seqs[key]

    def send_leader(self, arm: int, q, gripper: float, t_stamp: float) -> dict:
        """Queue a leader state frame; returns the as-sent payload values."""
        msg = leader_state(
            self.next_seq(MessageKind.LEADER_STATE, arm), int(round(t_stamp * MICROS)), arm, q, gripper
        )
        self.down.send(msg, t_stamp)
        return {"type": "send", "t": t_stamp, "arm": arm, "q": list(msg.payload.q), "g": msg.payload.gripper}

    def send_pedal(self, enabled: bool, arm: int, t_stamp: float) -> None:
        kind = MessageKind.ENABLE if enabled else MessageKind.DISABLE
        msg = event(kind, self.next_seq(kind, arm), int(round(t_stamp * MICROS)), arm)
        self.down.send(msg, t_stamp)

    def estop_reset(self, arm: int) -> None:
        self.world.estop_reset(arm)
        if self.controllers[arm] is not None:
            self.controllers[arm].reset()

    def trip_estop(self, arm: int) -> bool:
        """Manually latch an e-stop (fault injection); False if already tripped."""
        state = self.world.arms[arm]
        if state.estop.tripped:
            return False
        state.estop.tripped = True
        state.estop.trip_tick = self.world.tick
        state.estop.count += 1
        state.qd = np.zeros(6)
        return True

    def tick(self, t: float) -> TickOutput:
        world = self.world
        for msg in self.down.poll(t):
            if msg.kind in (MessageKind.LEADER_STATE, MessageKind.ENABLE, MessageKind.DISABLE):
                arm = msg.arm_id
                self.holds[arm].apply(msg, t, world.arms[arm].q, world.arms[arm].gripper)

        stopped_at_start = world.any_estop()
        commands = []
        holds: list[HoldState] = []
        modes: list[float] = []
        for arm in range(World.N_ARMS):
            state = world.arms[arm]
            hs = self.holds[arm].targets(t, state.q, state.gripper)
            if self.controllers[arm] is not None:
                out = self.controllers[arm].step(
                    ControllerInput(theta=state.q, theta_spark=hs.q, tau=self.last_tau[arm])
                )
                qd_cmd = out.joint_speeds
                mode = out.mode_ratio
            else:
                qd_cmd = self.mirror_gain * (hs.q - state.q)
                mode = 0.0
            commands.append(ArmCommand(qd=qd_cmd, gripper=hs.gripper))
            holds.append(hs)
            modes.append(mode)

        frame = world.world_step(commands)
        # Controllers consume the robot-reported (motor-side) joint torque,
        # which in statics is the negative of the external contact torque.
        self.last_tau = [-frame.joint_torques[i] for i in range(World.N_ARMS)]

        new_estops = []
        for arm in range(World.N_ARMS):
            st = world.arms[arm].estop
            if st.tripped and st.trip_tick == world.tick:
                new_estops.append(arm)
                self.up.send(
                    event(MessageKind.ESTOP_EVENT, self.next_seq(MessageKind.ESTOP_EVENT, arm), int(t * MICROS), arm),
                    t,
                )

        for arm in range(World.N_ARMS):
            while self._next_force[arm] <= t + 1e-12:
                s = self._next_force[arm]
                msg = follower_force(
                    self.next_seq(MessageKind.FOLLOWER_FORCE, arm), int(round(s * MICROS)), arm, frame.wrenches[arm]
                )
                self.up.send(msg, s)
                self._next_force[arm] += 1.0 / SEND_RATE_HZ

        for msg in self.up.poll(t):
            if msg.kind == MessageKind.FOLLOWER_FORCE:
                self.leader_wrench[msg.arm_id] = np.asarray(msg.payload.wrench, dtype=float)

        arm_ticks = []
        for arm in range(World.N_ARMS):
            if self.variant.glove_enabled:
                glove = force_to_glove(self.leader_wrench[arm][:3], self.haptics)
            else:
                glove = GloveFrame.zero()
            arm_ticks.append(ArmTick(hold=holds[arm], mode_ratio=modes[arm], glove=glove))

        return TickOutput(
            frame=frame, arms=arm_ticks, new_estops=new_estops, stopped_at_start=stopped_at_start
        )


# -- session logs ------------------------------------------------------------


@dataclass
class SessionLog:
    """Chronological meta/send/tick/end lines; append-only."""

    meta: dict
    lines: list[dict] = field(default_factory=list)
    end: Optional[dict] = None

    def sends(self) -> list[dict]:
        return [ln for ln in self.lines if ln["type"] == "send"]

    def ticks(self) -> list[dict]:
        return [ln for ln in self.lines if ln["type"] == "tick"]

    def to_jsonl(self) -> str:
        rows = [self.meta, *self.lines]
        if self.end is not None:
            rows.append(self.end)
        return "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "SessionLog":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("type") != "meta":
            raise ValueError("log must start with a meta line")
        meta = rows[0]
        end = None
        lines = []
        for row in rows[1:]:
            if row.get("type") == "end":
                end = row
            else:
                lines.append(row)
        return SessionLog(meta=meta, lines=lines, end=end)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @staticmethod
    def load(path: str) -> "SessionLog":
        with open(path, "r", encoding="utf-8") as fh:
            return SessionLog.from_jsonl(fh.read())


def config_hash(meta: dict) -> str:
    doc = {k: v for k, v in meta.items() if k not in ("config_hash", "type")}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class RunResult:
    scenario: str
    variant: str
    seed: int
    status: str  # "success" | "timeout"
    completion_time: Optional[float]
    estop_count: int
    peak_force: float
    sim_time: float
    log: SessionLog

    def metrics(self) -> dict:
        return {
            "scenario": self.scenario,
            "variant": self.variant,
            "seed": self.seed,
            "status": self.status,
            "completion_time": self.completion_time,
            "estop_count": self.estop_count,
            "peak_force": self.peak_force,
            "sim_time": self.sim_time,
        }


def _channel_config(channel: Union[str, ChannelConfig], seed: int) -> ChannelConfig:
    if isinstance(channel, ChannelConfig):
        return channel
    return channel_profile(channel, seed=seed)


def run_scenario(
    scenario: Scenario,
    variant: Union[str, VariantConfig],
    seed: int,
    channel: Union[str, ChannelConfig] = "inperson",
    gains: Optional[ControllerGains] = None,
    haptics: Optional[HapticConfig] = None,
    leader_bits: Optional[int] = 14,
    stale_timeout: float = 0.25,
    injected_estops: tuple[tuple[float, int], ...] = (),
    leader_source=None,
    tick_limit: Optional[int] = None,
) -> RunResult:
    """Run one scripted session to success or timeout, deterministically.

    The task timer pauses while any arm is e-stopped; e-stops are cleared by
    a scripted operator after the scenario's auto-reset delay. ``timeout``
    caps simulated time, while the reported completion time is task time.
    """
    if isinstance(variant, str):
        variant = VariantConfig(variant)
    gains = gains if gains is not None else ControllerGains()
    haptics = haptics if haptics is not None else HapticConfig()
    base_channel = _channel_config(channel, seed)

    meta = {
        "type": "meta",
        "version": 1,
        "scenario": scenario.to_json(),
        "variant": variant.mode,
        "seed": seed,
        "gains": gains.to_json(),
        "channel": base_channel.to_json(),
        "haptics": haptics.to_json(),
        "leader_bits": leader_bits,
        "stale_timeout": stale_timeout,
    }
    meta["config_hash"] = config_hash(meta)
    log = SessionLog(meta=meta)

    world = World(scenario.world)
    dt = scenario.world.dt

    if leader_source is None:
        scripts = {
            arm: script.time_warped(scenario.time_jitter, random.Random(f"{seed}:{arm}"))
            for arm, script in scenario.scripts.items()
        }
        leader_source = ScriptedLeader(scripts, encoder_bits=leader_bits)
    for arm, script in scenario.scripts.items():
        world.arms[arm].gripper = script.sample(0.0)[1]
    for prop_idx, arm in scenario.initial_attach:
        world.attach_prop(prop_idx, arm)

    loop = ControlLoop(
        world,
        variant,
        gains,
        haptics,
        down_cfg=ChannelConfig(**{**base_channel.to_json(), "seed": 2 * seed + 1}),
        up_cfg=ChannelConfig(**{**base_channel.to_json(), "seed": 2 * seed + 2}),
        stale_timeout=stale_timeout,
    )

    scripted = isinstance(leader_source, ScriptedLeader)
    send_arms = leader_source.arms()
    next_send = {arm: 0.0 for arm in send_arms}
    reset_due: dict[int, float] = {}
    injections = sorted(injected_estops)
    injected_idx = 0

    task_time = 0.0
    peak_force = 0.0
    completed: Optional[float] = None

    max_ticks = int(round(scenario.timeout / dt))
    if tick_limit is not None:
        max_ticks = min(max_ticks, tick_limit)

    if scenario.success.evaluate(world):
        completed = 0.0
        max_ticks = 0

    for k in range(max_ticks):
        t = k * dt
        events: list[list] = []

        for arm in list(reset_due):
            if reset_due[arm] <= t + 1e-12:
                loop.estop_reset(arm)
                del reset_due[arm]
                loop.up.send(
                    event(MessageKind.ESTOP_RESET, loop.next_seq(MessageKind.ESTOP_RESET, arm), int(t * MICROS), arm),
                    t,
                )
                events.append(["reset", arm])

        while injected_idx < len(injections) and injections[injected_idx][0] <= t + 1e-12:
            _, arm = injections[injected_idx]
            injected_idx += 1
            if loop.trip_estop(arm):
                reset_due[arm] = t + scenario.auto_reset_delay
                events.append(["estop", arm])

        if scripted:
            for arm in send_arms:
                while next_send[arm] <= t + 1e-12:
                    s = next_send[arm]
                    q, g = leader_source.state_at(arm, s)
                    log.lines.append(loop.send_leader(arm, q, g, s))
                    next_send[arm] += 1.0 / SEND_RATE_HZ
        else:
            for s, arm, q, g in leader_source.due(t):
                log.lines.append(loop.send_leader(arm, q, g, s))

        out = loop.tick(t)
        for arm in out.new_estops:
            reset_due[arm] = t + scenario.auto_reset_delay
            events.append(["estop", arm])

        if not out.stopped_at_start:
            task_time += dt
        peak_force = max(
            peak_force,
            *(float(np.linalg.norm(out.frame.wrenches[i][:3])) for i in range(World.N_ARMS)),
        )

        arms_doc = []
        for arm in range(World.N_ARMS):
            state = world.arms[arm]
            at = out.arms[arm]
            arms_doc.append(
                {
                    "q": [float(v) for v in state.q],
                    "qd": [float(v) for v in state.qd],
                    "g": state.gripper,
                    "target_q": [float(v) for v in at.hold.q],
                    "target_g": at.hold.gripper,
                    "hold": at.hold.hold,
                    "stale": at.hold.stale,
                    "enabled": at.hold.enabled,
                    "wrench": [float(v) for v in out.frame.wrenches[arm]],
                    "tau": [float(v) for v in out.frame.joint_torques[arm]],
                    "glove": list(at.glove.intensities),
                    "M": at.mode_ratio,
                    "estop": state.estop.tripped,
                    "estops": state.estop.count,
                }
            )
        log.lines.append(
            {
                "type": "tick",
                "k": k,
                "t": t,
                "running": not out.stopped_at_start,
                "task_time": task_time,
                "arms": arms_doc,
                "props": [
                    [float(p.position[0]), float(p.position[1]), float(p.position[2]),
                     -1 if p.attached_to is None else p.attached_to]
                    for p in world.props
                ],
                "events": events,
            }
        )

        if completed is None and scenario.success.evaluate(world):
            completed = task_time
            break

    status = "success" if completed is not None else "timeout"
    estop_count = sum(a.estop.count for a in world.arms)
    log.end = {
        "type": "end",
        "status": status,
        "completion_time": completed,
        "estop_count": estop_count,
        "peak_force": peak_force,
        "sim_time": world.sim_time,
        "channel": {"down": loop.down.stats.summary(), "up": loop.up.stats.summary()},
    }
    return RunResult(
        scenario=scenario.name,
        variant=variant.mode,
        seed=seed,
        status=status,
        completion_time=completed,
        estop_count=estop_count,
        peak_force=peak_force,
        sim_time=world.sim_time,
        log=log,
    )


@dataclass
class ReplayResult:
    match: bool
    first_divergence: Optional[int]  # line index into the original log
    result: RunResult


def replay(log: SessionLog) -> ReplayResult:
    """Re-simulate a recorded leader stream and compare byte-for-byte.

    The log's own configuration is used; a failed integrity hash raises
    ConfigMismatch. Truncated logs replay their prefix.
    """
    meta = log.meta
    if meta.get("config_hash") != config_hash(meta):
        raise ConfigMismatch("log metadata does not match its recorded config hash")

    scenario = Scenario.from_json(meta["scenario"])
    sends = [(s["t"], s["arm"], tuple(s["q"]), s["g"]) for s in log.sends()]
    n_ticks = len(log.ticks())
    res = run_scenario(
        scenario,
        meta["variant"],
        int(meta["seed"]),
        channel=ChannelConfig.from_json(meta["channel"]),
        gains=ControllerGains.from_json(meta["gains"]),
        haptics=HapticConfig.from_json(meta["haptics"]),
        leader_bits=meta.get("leader_bits"),
        stale_timeout=float(meta.get("stale_timeout", 0.25)),
        leader_source=ReplayLeader(sends),
        tick_limit=n_ticks,
    )

    orig = [json.dumps(ln, sort_keys=True) for ln in log.lines]
    new = [json.dumps(ln, sort_keys=True) for ln in res.log.lines]
    first_divergence = None
    for i, (a, b) in enumerate(zip(orig, new)):
        if a != b:
            first_divergence = i
            break
    match = first_divergence is None and len(new) == len(orig)
    return ReplayResult(match=match, first_divergence=first_divergence, result=res)


def report(logs: list[SessionLog]) -> list[dict]:
    """Per-variant aggregate: mean/std completion time over successes,
    timeouts counted separately, total e-stops."""
    if not logs:
        raise ValueError("report needs at least one log")
    groups: dict[str, list[SessionLog]] = {}
    for lg in logs:
        groups.setdefault(lg.meta["variant"], []).append(lg)
    rows = []
    for variant in sorted(groups):
        times = []
        estops = 0
        timeouts = 0
        for lg in groups[variant]:
            end = lg.end or {}
            estops += int(end.get("estop_count", 0))
            if end.get("status") == "success":
                times.append(float(end["completion_time"]))
            else:
                timeouts += 1
        rows.append(
            {
                "variant": variant,
                "runs": len(groups[variant]),
                "successes": len(times),
                "timeouts": timeouts,
                "mean_time": float(np.mean(times)) if times else None,
                "std_time": float(np.std(times)) if times else None,
                "estops": estops,
            }
        )
    return rows


def report_csv(rows: list[dict]) -> str:
    cols = ["variant", "runs", "successes", "timeouts", "mean_time", "std_time", "estops"]
    out = [",".join(cols)]
    for row in rows:
        out.append(",".join("" if row[c] is None else str(row[c]) for c in cols))
    return "\n".join(out) + "\n"


def format_report(rows: list[dict]) -> str:
    header = f"{'variant':<8} {'runs':>4} {'ok':>4} {'timeout':>7} {'mean(s)':>9} {'std(s)':>8} {'estops':>6}"
    lines = [header, "-" * len(header)]
    for r in rows:
        mean = "-" if r["mean_time"] is None else f"{r['mean_time']:.2f}"
        std = "-" if r["std_time"] is None else f"{r['std_time']:.2f}"
        lines.append(
            f"{r['variant']:<8} {r['runs']:>4} {r['successes']:>4} {r['timeouts']:>7} {mean:>9} {std:>8} {r['estops']:>6}"
        )
    return "\n".join(lines)
