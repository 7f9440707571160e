"""One control cycle, glued together: scenario -> firmware -> retarget ->
virtual hand -> robot shadow.

Both the live session loop and episode replay drive this exact class, so
"replay reproduces the run" reduces to "the pipeline is a deterministic
function of its inputs". Inputs are the per-cycle raw device ticks (plus
timed block edits); everything else — force commands, joint targets,
contact flags, the shadow — is derived state.

Cycle order (fixed so replays are well-defined):

1. scenario events for this cycle edit the virtual hand's blocks;
2. the firmware steps against the shadow from the *previous* cycle
   (the robot's last reported position — sensing is causal);
3. the new device state retargets to robot joint targets;
4. the virtual hand tracks the operator's normalized flexion;
5. the hand's new position becomes the shadow for the next cycle.

A pipeline can also be rebuilt mid-run from a state snapshot, which is
how an episode recorded in the middle of a long session replays without
the preceding cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

from dexmouse.core import cycle_to_ns
from dexmouse.firmware import (
    DeviceState,
    ForceFeedbackParams,
    RobotShadow,
    StepOutputs,
    firmware_step,
    initial_state,
)
from dexmouse.retarget import (
    ClampDiagnostics,
    HandProfile,
    RobotJointTargets,
    inverse_map,
    normalized_fe,
    retarget_all,
)
from dexmouse.simhand import (
    Scenario,
    VirtualHand,
    apply_scenario_events,
    hand_step,
    initial_hand,
)


@dataclass(frozen=True)
class StepResult:
    cycle: int
    state: DeviceState
    outputs: StepOutputs
    targets: RobotJointTargets
    hand: VirtualHand
    contacts: tuple[bool, ...]
    shadow: RobotShadow  # as used by *this* cycle's force rendering


class ControlPipeline:
    """Deterministic per-cycle state machine. Single-owner: the session
    loop (or the replayer) steps it; snapshots leave by value."""

    def __init__(
        self,
        profile: HandProfile,
        scenario: Scenario,
        params: ForceFeedbackParams,
        resume: dict | None = None,
    ) -> None:
        self.profile = profile
        self.scenario = scenario
        self.params = params
        self.clamp_diagnostics = ClampDiagnostics()
        if resume is None:
            self.state: DeviceState | None = None
            self.hand = initial_hand(scenario, profile.rate_limit)
            self.shadow = RobotShadow(inverse_map(self.hand.u_actual, profile))
        else:
            self.state = (
                DeviceState.from_dict(resume["state"]) if resume["state"] else None
            )
            self.hand = VirtualHand.from_dict(resume["hand"])
            self.shadow = RobotShadow.from_dict(resume["shadow"])

    def snapshot(self) -> dict:
        """Resume-state capsule: everything a fresh pipeline needs to
        continue from the next cycle (JSON-safe)."""
        return {
            "state": self.state.to_dict() if self.state else None,
            "hand": self.hand.to_dict(),
            "shadow": self.shadow.to_dict(),
        }

    def set_block(self, channel: int, block: float | None) -> None:
        """Manual block edit (the API's set_block command): same
        semantics as a scenario event at the current cycle."""
        if not 0 <= channel < len(self.hand.u_actual):
            raise ValueError(f"block channel out of range: {channel}")
        if block is not None and not 0.0 <= block <= 1.0:
            raise ValueError(f"block must be in [0, 1] or none, got {block}")
        blocks = list(self.hand.blocks)
        blocks[channel] = block
        us = [
            b if (b is not None and u > b) else u
            for u, b in zip(self.hand.u_actual, blocks)
        ]
        self.hand = VirtualHand(
            tuple(us), tuple(blocks), self.hand.contact, self.hand.rate_limit
        )

    def set_params(self, params: ForceFeedbackParams) -> None:
        self.params = params

    def step(self, cycle: int, fe_ticks, aa_raw: int) -> StepResult:
        """Advance one 10 ms cycle with the given raw sensor readings."""
        self.hand = apply_scenario_events(self.hand, self.scenario, cycle)
        if self.state is None:
            self.state = initial_state(fe_ticks, aa_raw)
        shadow = self.shadow
        self.state, outputs = firmware_step(
            self.state, shadow, fe_ticks, aa_raw, self.params
        )
        targets = retarget_all(
            self.state,
            self.profile,
            t=cycle_to_ns(cycle),
            diagnostics=self.clamp_diagnostics,
        )
        self.hand, contacts = hand_step(
            self.hand, normalized_fe(self.state, self.profile)
        )
        self.shadow = RobotShadow(inverse_map(self.hand.u_actual, self.profile))
        return StepResult(
            cycle=cycle,
            state=self.state,
            outputs=outputs,
            targets=targets,
            hand=self.hand,
            contacts=contacts,
            shadow=shadow,
        )
