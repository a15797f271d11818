"""Live operator session: one world ticking in (scaled) real time, fed by a
single controller client over WebSocket, observed by any number of viewers.

Client commands funnel through a queue and are applied at tick boundaries,
so the tick loop stays the world's single owner. The follower view streamed
back to clients is server truth; the browser never simulates.
"""

from __future__ import annotations

import asyncio
import contextlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..controller import ControllerGains
from ..haptics import HapticConfig
from ..link import ChannelConfig, channel_profile
from ..scenarios import Scenario, get_scenario
from ..session import ControlLoop, VariantConfig
from ..world import World

STATE_RATE_HZ = 30.0


@dataclass
class ServiceSettings:
    scenario: str = "place"
    variant: str = "fgc"
    channel: str = "inperson"
    seed: int = 0
    time_scale: float = 1.0  # >1 runs the live loop faster than wall clock
    live_enabled: bool = True
    frontend_dir: Optional[str] = None
    gains: ControllerGains = field(default_factory=ControllerGains)
    haptics: HapticConfig = field(default_factory=HapticConfig)


class LiveSession:
    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.scenario: Scenario = get_scenario(settings.scenario)
        self.variant = VariantConfig(settings.variant)
        self.world = World(self.scenario.world)
        base = channel_profile(settings.channel, seed=settings.seed)
        self.loop = ControlLoop(
            self.world,
            self.variant,
            settings.gains,
            settings.haptics,
            down_cfg=ChannelConfig(**{**base.to_json(), "seed": 2 * settings.seed + 1}),
            up_cfg=ChannelConfig(**{**base.to_json(), "seed": 2 * settings.seed + 2}),
        )
        self.commands: asyncio.Queue[dict] = asyncio.Queue()
        self.clients: set = set()
        self.controller_client = None
        self.tick_index = 0
        self._next_state = 0.0
        self._task: Optional[asyncio.Task] = None
        self.last_state: Optional[dict] = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._task = asyncio.get_running_loop().create_task(self._run())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._task

    async def _run(self) -> None:
        dt = self.scenario.world.dt
        while True:
            t = self.tick_index * dt
            self._apply_commands(t)
            out = self.loop.tick(t)
            self.tick_index += 1
            if t + 1e-12 >= self._next_state:
                self._next_state += 1.0 / STATE_RATE_HZ
                state = self._state_message(t, out)
                self.last_state = state
                await self._broadcast(state)
            await asyncio.sleep(dt / self.settings.time_scale)

    # -- command ingestion -----------------------------------------------------

    def _apply_commands(self, t: float) -> None:
        while True:
            try:
                msg = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            kind = msg.get("type")
            if kind == "leader":
                arm = int(msg["arm"])
                q = [float(v) for v in msg["q"]]
                if len(q) == 6:
                    self.loop.send_leader(arm, q, float(msg.get("g", 1.0)), t)
            elif kind == "estop_reset":
                self.loop.estop_reset(int(msg["arm"]))
            elif kind in ("enable", "disable"):
                arms = [int(msg["arm"])] if "arm" in msg else list(range(World.N_ARMS))
                for arm in arms:
                    self.loop.send_pedal(kind == "enable", arm, t)

    # -- outbound ---------------------------------------------------------------

    def hello_message(self) -> dict:
        return {
            "type": "hello",
            "scenario": self.scenario.name,
            "variant": self.variant.mode,
            "world_config": self.scenario.world.to_json(),
            "dh_table": self.world.table.to_json(),
            "dt": self.scenario.world.dt,
            "state_rate_hz": STATE_RATE_HZ,
            "send_rate_hz": 30.0,
        }

    def _state_message(self, t: float, out) -> dict:
        arms = []
        for arm in range(World.N_ARMS):
            state = self.world.arms[arm]
            at = out.arms[arm]
            arms.append(
                {
                    "q": [float(v) for v in state.q],
                    "g": state.gripper,
                    "ee_pos": [float(v) for v in self.world.ee_pose(arm).position],
                    "wrench": [float(v) for v in out.frame.wrenches[arm]],
                    "glove": list(at.glove.intensities),
                    "estop": state.estop.tripped,
                    "estops": state.estop.count,
                    "mode_ratio": at.mode_ratio,
                    "enabled": at.hold.enabled,
                }
            )
        return {
            "type": "state",
            "tick": self.world.tick,
            "t": t,
            "arms": arms,
            "props": [
                [float(p.position[0]), float(p.position[1]), float(p.position[2]),
                 -1 if p.attached_to is None else p.attached_to]
                for p in self.world.props
            ],
        }

    async def _broadcast(self, state: dict) -> None:
        dead = []
        for ws in list(self.clients):
            try:
                await ws.send_json(state)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.detach(ws)

    # -- client registry ----------------------------------------------------------

    def attach(self, ws, role: str) -> bool:
        """Register a client; False when a second controller is refused."""
        if role == "controller":
            if self.controller_client is not None:
                return False
            self.controller_client = ws
        self.clients.add(ws)
        return True

    def detach(self, ws) -> None:
        self.clients.discard(ws)
        if self.controller_client is ws:
            self.controller_client = None
