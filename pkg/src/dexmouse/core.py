"""Shared units, channel identifiers, and tick/degree conversions.

Positions on the device are integer encoder ticks, 4096 per revolution.
4096 is the unique power-of-two resolution under which the two firmware
reference points hold simultaneously: the free-motion speed threshold of
20 ticks per 10 ms cycle comes out at ~175 deg/s and the 100-tick force
dead zone at ~8.8 deg.

Axis convention: flexing a finger winds tendon onto the spool, so flexion
DECREASES the tick value. An operator flexing past a blocked robot finger
therefore yields q_robot - q_operator > 0, which is the penetration sign
the force renderer expects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

TICKS_PER_REV = 4096
DEG_PER_TICK = 360 / TICKS_PER_REV  # exact in binary floating point (45/512)

LOOP_HZ = 100
CYCLE_NS = 1_000_000_000 // LOOP_HZ

NUM_CHANNELS = 6
NUM_FE_CHANNELS = 5
AA_CHANNEL = 5

AA_RAW_MAX = 4095  # 12-bit magnetic encoder reading


class ChannelKind(enum.Enum):
    FINGER_FE = "finger_fe"
    THUMB_FE = "thumb_fe"
    THUMB_AA = "thumb_aa"


@dataclass(frozen=True)
class ChannelId:
    """One of the six device channels. Indices 0-4 are actuated flexion
    channels; index 5 is the sense-only thumb abduction channel."""

    index: int
    kind: ChannelKind

    def __post_init__(self) -> None:
        if not 0 <= self.index < NUM_CHANNELS:
            raise ValueError(f"channel index out of range: {self.index}")

    @property
    def actuated(self) -> bool:
        return self.kind is not ChannelKind.THUMB_AA


def _kind_for(index: int) -> ChannelKind:
    if index < 4:
        return ChannelKind.FINGER_FE
    if index == 4:
        return ChannelKind.THUMB_FE
    return ChannelKind.THUMB_AA


CHANNELS: tuple[ChannelId, ...] = tuple(
    ChannelId(i, _kind_for(i)) for i in range(NUM_CHANNELS)
)
FE_CHANNELS: tuple[ChannelId, ...] = CHANNELS[:NUM_FE_CHANNELS]
THUMB_AA_CHANNEL: ChannelId = CHANNELS[AA_CHANNEL]


def ticks_to_degrees(ticks: int) -> float:
    """Convert encoder ticks to degrees (exact: ticks * 360 / 4096)."""
    return ticks * 360 / TICKS_PER_REV


def degrees_to_ticks(degrees: float) -> float:
    """Inverse of :func:`ticks_to_degrees`; exact for tick-multiples."""
    return degrees * TICKS_PER_REV / 360


def ticks_per_cycle_to_deg_per_s(ticks_per_cycle: int, loop_hz: int = LOOP_HZ) -> float:
    """Convert a per-cycle tick velocity to degrees per second."""
    if loop_hz <= 0:
        raise ValueError("loop_hz must be positive")
    return ticks_per_cycle * (360 / TICKS_PER_REV) * loop_hz


def cycle_to_ns(cycle: int) -> int:
    """Session-relative timestamp (ns) of the start of control cycle *cycle*."""
    return cycle * CYCLE_NS


def clamp01(u: float) -> float:
    """Clamp a normalized flexion value into [0, 1]."""
    if u < 0.0:
        return 0.0
    if u > 1.0:
        return 1.0
    return u
