"""Leader/follower wire protocol and a deterministic simulated channel.

Frames are little-endian: magic "SP", version byte, kind byte, u32 sequence
number, u64 timestamp in simulation microseconds, arm id byte, then a
kind-specific payload. Joint angles travel as f64 (wrapped to (-pi, pi] at
this boundary), wrench components and gripper aperture as f32. Event frames
carry no payload.

The channel delays each accepted message by base latency plus seeded
uniform jitter, drops with a configured probability, and discards frames
that would arrive out of order within their (kind, arm) stream.
"""

from __future__ import annotations

import heapq
import math
import random
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Union

import numpy as np

from .kinematics import N_JOINTS, wrap_angle

MAGIC = b"SP"
VERSION = 1

_HEADER = struct.Struct("<2sBBIQB")  # magic, version, kind, seq, timestamp_us, arm_id
_LEADER_PAYLOAD = struct.Struct("<6df")  # q[6] rad, gripper
_FORCE_PAYLOAD = struct.Struct("<6f")  # fx fy fz tx ty tz

LEADER_STATE_FRAME_SIZE = _HEADER.size + _LEADER_PAYLOAD.size  # 69
FOLLOWER_FORCE_FRAME_SIZE = _HEADER.size + _FORCE_PAYLOAD.size  # 41


class MessageKind(IntEnum):
    LEADER_STATE = 1
    FOLLOWER_FORCE = 2
    ESTOP_EVENT = 3
    ESTOP_RESET = 4
    ENABLE = 5
    DISABLE = 6


EVENT_KINDS = (
    MessageKind.ESTOP_EVENT,
    MessageKind.ESTOP_RESET,
    MessageKind.ENABLE,
    MessageKind.DISABLE,
)


class FrameError(ValueError):
    """Base class for frame decode failures."""


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class TruncatedFrame(FrameError):
    """Frame shorter (or longer) than its kind requires."""


class UnknownKind(FrameError):
    pass


@dataclass(frozen=True)
class LeaderStatePayload:
    q: tuple[float, ...]  # 6 angles, wrapped to (-pi, pi]
    gripper: float  # f32-exact aperture fraction


@dataclass(frozen=True)
class FollowerForcePayload:
    wrench: tuple[float, ...]  # f32-exact (fx, fy, fz, tx, ty, tz)


Payload = Union[LeaderStatePayload, FollowerForcePayload, None]


@dataclass(frozen=True)
class LinkMessage:
    kind: MessageKind
    seq: int
    timestamp_us: int
    arm_id: int
    payload: Payload = None


def _f32(x: float) -> float:
    return float(np.float32(x))


def leader_state(seq: int, timestamp_us: int, arm_id: int, q, gripper: float) -> LinkMessage:
    """Build a LEADER_STATE frame, normalizing angles and f32-rounding the gripper."""
    qt = tuple(wrap_angle(float(v)) for v in q)
    if len(qt) != N_JOINTS:
        raise ValueError(f"expected {N_JOINTS} joint angles")
    return LinkMessage(
        kind=MessageKind.LEADER_STATE,
        seq=seq,
        timestamp_us=timestamp_us,
        arm_id=arm_id,
        payload=LeaderStatePayload(q=qt, gripper=_f32(gripper)),
    )


def follower_force(seq: int, timestamp_us: int, arm_id: int, wrench) -> LinkMessage:
    wt = tuple(_f32(v) for v in wrench)
    if len(wt) != 6:
        raise ValueError("wrench needs 6 components")
    return LinkMessage(
        kind=MessageKind.FOLLOWER_FORCE,
        seq=seq,
        timestamp_us=timestamp_us,
        arm_id=arm_id,
        payload=FollowerForcePayload(wrench=wt),
    )


def event(kind: MessageKind, seq: int, timestamp_us: int, arm_id: int) -> LinkMessage:
    if kind not in EVENT_KINDS:
        raise ValueError(f"{kind} is not an event kind")
    return LinkMessage(kind=kind, seq=seq, timestamp_us=timestamp_us, arm_id=arm_id)


def encode(msg: LinkMessage) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, int(msg.kind), msg.seq, msg.timestamp_us, msg.arm_id)
    if msg.kind == MessageKind.LEADER_STATE:
        return header + _LEADER_PAYLOAD.pack(*msg.payload.q, msg.payload.gripper)
    if msg.kind == MessageKind.FOLLOWER_FORCE:
        return header + _FORCE_PAYLOAD.pack(*msg.payload.wrench)
    return header


def decode(buf: bytes) -> LinkMessage:
    """Exact inverse of :func:`encode`; raises a specific FrameError otherwise."""
    if len(buf) < _HEADER.size:
        raise TruncatedFrame(f"frame is {len(buf)} bytes, header needs {_HEADER.size}")
    magic, version, kind_byte, seq, timestamp_us, arm_id = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    try:
        kind = MessageKind(kind_byte)
    except ValueError:
        raise UnknownKind(f"unknown message kind {kind_byte}") from None
    expected = _HEADER.size
    if kind == MessageKind.LEADER_STATE:
        expected = LEADER_STATE_FRAME_SIZE
    elif kind == MessageKind.FOLLOWER_FORCE:
        expected = FOLLOWER_FORCE_FRAME_SIZE
    if len(buf) != expected:
        raise TruncatedFrame(f"{kind.name} frame must be {expected} bytes, got {len(buf)}")
    payload: Payload = None
    if kind == MessageKind.LEADER_STATE:
        *q, gripper = _LEADER_PAYLOAD.unpack_from(buf, _HEADER.size)
        payload = LeaderStatePayload(q=tuple(q), gripper=gripper)
    elif kind == MessageKind.FOLLOWER_FORCE:
        payload = FollowerForcePayload(wrench=_FORCE_PAYLOAD.unpack_from(buf, _HEADER.size))
    return LinkMessage(kind=kind, seq=seq, timestamp_us=timestamp_us, arm_id=arm_id, payload=payload)


@dataclass
class ChannelConfig:
    base_latency_ms: float = 0.0
    jitter_ms: float = 0.0
    drop_probability: float = 0.0
    rate_hz: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.base_latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError("drop_probability must be in [0, 1)")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be > 0")

    def to_json(self) -> dict:
        return {
            "base_latency_ms": self.base_latency_ms,
            "jitter_ms": self.jitter_ms,
            "drop_probability": self.drop_probability,
            "rate_hz": self.rate_hz,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict) -> "ChannelConfig":
        return ChannelConfig(
            base_latency_ms=float(doc.get("base_latency_ms", 0.0)),
            jitter_ms=float(doc.get("jitter_ms", 0.0)),
            drop_probability=float(doc.get("drop_probability", 0.0)),
            rate_hz=float(doc.get("rate_hz", 30.0)),
            seed=int(doc.get("seed", 0)),
        )


# Named profiles; "remote" mirrors the 100 ms remote-operation latency figure.
CHANNEL_PROFILES = {
    "inperson": {"base_latency_ms": 0.0, "jitter_ms": 0.0, "drop_probability": 0.0},
    "remote": {"base_latency_ms": 100.0, "jitter_ms": 0.0, "drop_probability": 0.0},
}


def channel_profile(name: str, seed: int = 0, rate_hz: float = 30.0) -> ChannelConfig:
    if name not in CHANNEL_PROFILES:
        raise KeyError(f"unknown channel profile {name!r}; choose from {sorted(CHANNEL_PROFILES)}")
    return ChannelConfig(rate_hz=rate_hz, seed=seed, **CHANNEL_PROFILES[name])


@dataclass
class ChannelStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    discarded_stale: int = 0
    rate_limited: int = 0
    latencies: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        lat = sorted(self.latencies)

        def pct(p: float) -> float:
            if not lat:
                return 0.0
            return lat[min(len(lat) - 1, int(p * len(lat)))]

        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "discarded_stale": self.discarded_stale,
            "rate_limited": self.rate_limited,
            "mean_latency_s": sum(lat) / len(lat) if lat else 0.0,
            "p50_latency_s": pct(0.50),
            "p95_latency_s": pct(0.95),
        }


class Channel:
    """One-directional message pipe with latency, jitter, loss, and rate cap.

    Single writer, single reader; all timing is driven by the caller's
    simulation clock, so identical seeds and send schedules give identical
    delivery schedules.
    """

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.stats = ChannelStats()
        self._rng = random.Random(cfg.seed)
        self._queue: list[tuple[float, int, float, LinkMessage]] = []
        self._counter = 0
        self._last_accept: dict[tuple[int, int], float] = {}
        self._last_seq: dict[tuple[int, int], int] = {}

    def send(self, msg: LinkMessage, now: float) -> bool:
        """Accept a message at sim-time ``now``; False if rate-limited."""
        if msg.kind in (MessageKind.LEADER_STATE, MessageKind.FOLLOWER_FORCE):
            key = (int(msg.kind), msg.arm_id)
            last = self._last_accept.get(key)
            interval = 1.0 / self.cfg.rate_hz
            if last is not None and now - last < interval - 1e-9:
                self.stats.rate_limited += 1
                return False
            self._last_accept[key] = now
        self.stats.sent += 1
        if self.cfg.drop_probability > 0.0 and self._rng.random() < self.cfg.drop_probability:
            self.stats.dropped += 1
            return True
        delay = self.cfg.base_latency_ms / 1000.0
        if self.cfg.jitter_ms > 0.0:
            delay += self._rng.random() * self.cfg.jitter_ms / 1000.0
        self._counter += 1
        heapq.heappush(self._queue, (now + delay, self._counter, now, msg))
        return True

    def poll(self, now: float) -> list[LinkMessage]:
        """All messages due by ``now``, in order, stale frames discarded."""
        out: list[LinkMessage] = []
        while self._queue and self._queue[0][0] <= now + 1e-12:
            _, _, sent_at, msg = heapq.heappop(self._queue)
            key = (int(msg.kind), msg.arm_id)
            last_seq = self._last_seq.get(key)
            if last_seq is not None and msg.seq <= last_seq:
                self.stats.discarded_stale += 1
                continue
            self._last_seq[key] = msg.seq
            self.stats.delivered += 1
            self.stats.latencies.append(now - sent_at)
            out.append(msg)
        return out


@dataclass
class HoldState:
    """Follower-side joint targets between (or in absence of) link updates."""

    q: np.ndarray
    gripper: float
    enabled: bool
    stale: bool
    hold: bool  # true when the controller should command zero intent


class ZeroOrderHold:
    """Latches the latest leader state; models the enable/disable pedal.

    While disabled, targets freeze at the follower pose captured when the
    pedal opened; leader states received in that window are ignored. After
    ``stale_timeout`` seconds of link silence the hold flag is raised.
    """

    def __init__(self, stale_timeout: float = 0.25):
        self.stale_timeout = stale_timeout
        self.enabled = True
        self._q: Optional[np.ndarray] = None
        self._gripper = 0.0
        self._last_update: Optional[float] = None

    def apply(self, msg: LinkMessage, now: float, follower_q, follower_gripper: float) -> None:
        if msg.kind == MessageKind.LEADER_STATE:
            if self.enabled:
                self._q = np.asarray(msg.payload.q, dtype=float)
                self._gripper = float(msg.payload.gripper)
                self._last_update = now
        elif msg.kind == MessageKind.DISABLE:
            self.enabled = False
            self._q = np.asarray(follower_q, dtype=float).copy()
            self._gripper = float(follower_gripper)
            self._last_update = now
        elif msg.kind == MessageKind.ENABLE:
            self.enabled = True
            self._last_update = now

    def targets(self, now: float, follower_q, follower_gripper: float) -> HoldState:
        fq = np.asarray(follower_q, dtype=float)
        if self._q is None:
            return HoldState(q=fq.copy(), gripper=float(follower_gripper), enabled=self.enabled, stale=False, hold=True)
        stale = (
            self.enabled
            and self._last_update is not None
            and now - self._last_update > self.stale_timeout + 1e-12
        )
        if stale:
            return HoldState(q=fq.copy(), gripper=self._gripper, enabled=self.enabled, stale=True, hold=True)
        return HoldState(q=self._q.copy(), gripper=self._gripper, enabled=self.enabled, stale=False, hold=False)
