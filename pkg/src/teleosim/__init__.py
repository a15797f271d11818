"""Desk-scale bimanual teleoperation stack over a simulated UR5e world.

Scaled-DH kinematics, an optimization-based force-compliance controller, a
force-glove haptic mapping, a 30 Hz leader/follower wire protocol with a
simulated channel, a deterministic two-arm world, and a session service
with scripted scenarios, replayable logs, and a live operator WebSocket.
"""

from . import controller, haptics, kinematics, link, scenarios, session, world

__version__ = "0.1.0"

__all__ = [
    "controller",
    "haptics",
    "kinematics",
    "link",
    "scenarios",
    "session",
    "world",
]
