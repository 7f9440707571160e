"""Virtual target hand: the thing the operator is teleoperating.

Lives entirely in normalized flexion space (one u per actuated channel).
Each cycle it tracks the operator's retargeted flexion under a rate
limit, and an optional per-channel block — a scalar joint stop standing
in for a grasped object — caps how far it can flex. A channel is "in
contact" exactly when its commanded motion was clipped by such a block;
running into the plain u = 1 travel bound is not contact.

This closes the force-feedback loop: the session converts u_actual back
to device ticks (the robot shadow), and the firmware renders resistance
once the operator flexes past the blocked hand by more than the dead
zone. Scenarios are timed block choreographies — the shipped ones are
named after bench tasks (pick_place, peg_in_hole, hammering) purely as
free/blocked templates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from dexmouse.core import NUM_FE_CHANNELS, clamp01


class ScenarioError(ValueError):
    """Scenario file violates the schema or its invariants."""


@dataclass(frozen=True)
class ScenarioEvent:
    cycle: int
    channel: int
    block: float | None  # None removes the block

    def __post_init__(self) -> None:
        if self.cycle < 0:
            raise ScenarioError(f"event cycle must be non-negative, got {self.cycle}")
        if not 0 <= self.channel < NUM_FE_CHANNELS:
            raise ScenarioError(f"event channel out of range: {self.channel}")
        if self.block is not None and not 0.0 <= self.block <= 1.0:
            raise ScenarioError(f"block must be in [0, 1] or null, got {self.block}")


@dataclass(frozen=True)
class Scenario:
    name: str
    initial_blocks: tuple[float | None, ...] = (None,) * NUM_FE_CHANNELS
    events: tuple[ScenarioEvent, ...] = ()

    def __post_init__(self) -> None:
        if len(self.initial_blocks) != NUM_FE_CHANNELS:
            raise ScenarioError(
                f"{self.name}: need {NUM_FE_CHANNELS} initial blocks, got {len(self.initial_blocks)}"
            )
        for b in self.initial_blocks:
            if b is not None and not 0.0 <= b <= 1.0:
                raise ScenarioError(f"{self.name}: initial block out of range: {b}")
        cycles = [e.cycle for e in self.events]
        if cycles != sorted(cycles):
            raise ScenarioError(f"{self.name}: events must be sorted by cycle")
        keys = [(e.cycle, e.channel) for e in self.events]
        if len(keys) != len(set(keys)):
            raise ScenarioError(f"{self.name}: duplicate (cycle, channel) event")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "initial_blocks": list(self.initial_blocks),
            "events": [
                {"cycle": e.cycle, "channel": e.channel, "block": e.block}
                for e in self.events
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            return cls(
                name=data["name"],
                initial_blocks=tuple(data.get("initial_blocks", [None] * NUM_FE_CHANNELS)),
                events=tuple(
                    ScenarioEvent(e["cycle"], e["channel"], e.get("block"))
                    for e in data.get("events", [])
                ),
            )
        except KeyError as exc:
            raise ScenarioError(f"scenario missing required field: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
    return Scenario.from_dict(data)


@dataclass(frozen=True)
class VirtualHand:
    u_actual: tuple[float, ...]
    blocks: tuple[float | None, ...]
    contact: tuple[bool, ...]
    rate_limit: float = 0.05

    def to_dict(self) -> dict:
        return {
            "u_actual": list(self.u_actual),
            "blocks": list(self.blocks),
            "contact": list(self.contact),
            "rate_limit": self.rate_limit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VirtualHand":
        return cls(
            u_actual=tuple(data["u_actual"]),
            blocks=tuple(data["blocks"]),
            contact=tuple(bool(c) for c in data["contact"]),
            rate_limit=data["rate_limit"],
        )


def initial_hand(scenario: Scenario, rate_limit: float = 0.05) -> VirtualHand:
    """Fully extended hand with the scenario's initial blocks applied."""
    return VirtualHand(
        u_actual=(0.0,) * NUM_FE_CHANNELS,
        blocks=tuple(scenario.initial_blocks),
        contact=(False,) * NUM_FE_CHANNELS,
        rate_limit=rate_limit,
    )


def hand_step(
    hand: VirtualHand, u_target: Sequence[float]
) -> tuple[VirtualHand, tuple[bool, ...]]:
    """Advance the hand one cycle toward *u_target*.

    Per channel: move at most rate_limit toward the target, clamp into
    [0, 1], then cap at the active block. The contact flag is set exactly
    when the block did the capping.
    """
    if len(u_target) != NUM_FE_CHANNELS:
        raise ValueError(f"expected {NUM_FE_CHANNELS} targets, got {len(u_target)}")
    rate = hand.rate_limit
    us: list[float] = []
    contacts: list[bool] = []
    for ch in range(NUM_FE_CHANNELS):
        target = u_target[ch]
        if not 0.0 <= target <= 1.0:
            raise ValueError(f"target out of [0, 1] on channel {ch}: {target}")
        step = target - hand.u_actual[ch]
        if step > rate:
            step = rate
        elif step < -rate:
            step = -rate
        u = clamp01(hand.u_actual[ch] + step)
        block = hand.blocks[ch]
        if block is not None and u > block:
            u, hit = block, True
        else:
            hit = False
        us.append(u)
        contacts.append(hit)
    new = VirtualHand(tuple(us), hand.blocks, tuple(contacts), rate)
    return new, new.contact


def apply_scenario_events(hand: VirtualHand, scenario: Scenario, cycle: int) -> VirtualHand:
    """Apply every scenario event scheduled for *cycle* (before stepping).

    Setting a block below the hand's current position pushes the hand
    down to it immediately — the object displaces the finger; the
    rate-limit guarantee applies to tracking, not to scenario edits.
    """
    blocks = None
    for e in scenario.events:
        if e.cycle == cycle:
            if blocks is None:
                blocks = list(hand.blocks)
            blocks[e.channel] = e.block
        elif e.cycle > cycle:
            break
    if blocks is None:
        return hand
    us = [
        b if (b is not None and u > b) else u
        for u, b in zip(hand.u_actual, blocks)
    ]
    return VirtualHand(tuple(us), tuple(blocks), hand.contact, hand.rate_limit)
