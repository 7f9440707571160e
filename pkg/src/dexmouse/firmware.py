"""Deterministic 100 Hz control-loop logic for the five actuated channels.

Each cycle, per flexion channel: sense raw encoder ticks, estimate
velocity by one-cycle backward difference, schedule the stiffness gain
from that velocity, and render a unidirectional "virtual wall" force
against the robot shadow position. The thumb-abduction channel is
sense-only and just runs an exponential moving average over its raw
12-bit angle.

Force model (all positions in encoder ticks, flexion decreasing):

* gain scheduling — full stiffness ``k_nominal`` while the finger is in
  contact or static (``|v| <= v_th``), reduced stiffness
  ``gamma * k_nominal`` during free motion, so fast voluntary movement
  is not fought by the controller;
* force rendering — with penetration ``delta = q_robot - q_operator``
  (positive once the operator flexes past the blocked robot finger),
  the command is ``gain * delta`` clamped to ``[0, tau_max]`` when
  ``delta > epsilon``, else exactly zero. The dead zone ``epsilon``
  suppresses oscillation around the wall; the one-sidedness lets the
  operator withdraw freely.

``firmware_step`` is a pure function of (state, shadow, inputs, params):
identical inputs produce bit-identical outputs, which is what makes
recorded episodes replayable. All position/velocity math is integer; the
only floating-point state is the abduction filter, whose update is the
exact-fixed-point form ``y + alpha*(x - y)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

from dexmouse.core import AA_RAW_MAX, LOOP_HZ, NUM_FE_CHANNELS


class GainMode(enum.Enum):
    CONTACT = "contact"
    FREE_MOTION = "free_motion"


class ChannelCountError(ValueError):
    """Per-channel input arity does not match the five FE channels."""


@dataclass(frozen=True)
class ForceFeedbackParams:
    """Tunable constants of the gain scheduler and force renderer.

    Defaults are the device's shipped tuning: nominal stiffness 5.0,
    free-motion reduction 0.1, velocity threshold 20 ticks/cycle
    (~175 deg/s at 100 Hz), dead zone 100 ticks (~8.8 deg), command
    saturation 1000. ``debounce_cycles`` (default 0 = off) delays
    gain-mode switches until the new mode has persisted that many extra
    cycles; it exists for experimentation and is not part of the default
    contract.
    """

    k_nominal: float = 5.0
    gamma: float = 0.1
    v_th: int = 20
    epsilon: int = 100
    tau_max: float = 1000.0
    ema_alpha: float = 0.1
    debounce_cycles: int = 0
    loop_hz: int = LOOP_HZ

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.v_th <= 0:
            raise ValueError(f"v_th must be positive, got {self.v_th}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.tau_max <= 0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")
        if self.k_nominal < 0:
            raise ValueError(f"k_nominal must be non-negative, got {self.k_nominal}")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValueError(f"ema_alpha must be in (0, 1], got {self.ema_alpha}")
        if self.debounce_cycles < 0:
            raise ValueError(f"debounce_cycles must be non-negative, got {self.debounce_cycles}")
        if self.loop_hz <= 0:
            raise ValueError(f"loop_hz must be positive, got {self.loop_hz}")

    def to_dict(self) -> dict:
        return {
            "k_nominal": self.k_nominal,
            "gamma": self.gamma,
            "v_th": self.v_th,
            "epsilon": self.epsilon,
            "tau_max": self.tau_max,
            "ema_alpha": self.ema_alpha,
            "debounce_cycles": self.debounce_cycles,
            "loop_hz": self.loop_hz,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForceFeedbackParams":
        return cls(**data)

    def with_overrides(self, overrides: dict) -> "ForceFeedbackParams":
        unknown = set(overrides) - set(self.to_dict())
        if unknown:
            raise ValueError(f"unknown force-feedback parameters: {sorted(unknown)}")
        return replace(self, **overrides)


@dataclass(frozen=True)
class DeviceState:
    """Snapshot of the loop state after a cycle. Immutable; steps return
    fresh instances so snapshots can cross thread boundaries by value."""

    q_operator: tuple[int, ...]  # raw FE ticks, most recent sample
    v: tuple[int, ...]  # ticks/cycle, backward difference
    gain_mode: tuple[GainMode, ...]
    tau_cmd: tuple[float, ...]
    mode_pending: tuple[int, ...]  # consecutive cycles the raw mode disagreed
    aa_raw: int
    aa_filtered: float
    cycle_count: int

    def to_dict(self) -> dict:
        return {
            "q_operator": list(self.q_operator),
            "v": list(self.v),
            "gain_mode": [m.value for m in self.gain_mode],
            "tau_cmd": list(self.tau_cmd),
            "mode_pending": list(self.mode_pending),
            "aa_raw": self.aa_raw,
            "aa_filtered": self.aa_filtered,
            "cycle_count": self.cycle_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceState":
        return cls(
            q_operator=tuple(data["q_operator"]),
            v=tuple(data["v"]),
            gain_mode=tuple(GainMode(m) for m in data["gain_mode"]),
            tau_cmd=tuple(data["tau_cmd"]),
            mode_pending=tuple(data["mode_pending"]),
            aa_raw=data["aa_raw"],
            aa_filtered=data["aa_filtered"],
            cycle_count=data["cycle_count"],
        )


@dataclass(frozen=True)
class RobotShadow:
    """Robot finger positions expressed in device tick space (one per FE
    channel), zero-order held between updates."""

    q_robot: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"q_robot": list(self.q_robot)}

    @classmethod
    def from_dict(cls, data: dict) -> "RobotShadow":
        return cls(q_robot=tuple(data["q_robot"]))


@dataclass(frozen=True)
class StepOutputs:
    tau_cmd: tuple[float, ...]
    gain_mode: tuple[GainMode, ...]
    aa_filtered: float


def ema_step(y_prev: float, x: float, alpha: float) -> float:
    """One exponential-moving-average update: alpha*x + (1-alpha)*y_prev.

    Computed as ``y + alpha*(x - y)``, which is the same quantity but an
    exact fixed point in floating point: x == y returns y unchanged for
    every representable value. Alpha is validated where parameters are
    constructed, not per call.
    """
    return y_prev + alpha * (x - y_prev)


def estimate_velocity(q_now: int, q_prev: int) -> int:
    """Ticks moved since the previous cycle (backward difference)."""
    return q_now - q_prev


def scheduled_gain(v: int, p: ForceFeedbackParams) -> tuple[float, GainMode]:
    """Stiffness for the current velocity: full ``k_nominal`` at or below
    the threshold (contact/static), ``gamma * k_nominal`` above it (free
    motion). The boundary is inclusive: |v| == v_th keeps full gain."""
    if abs(v) <= p.v_th:
        return p.k_nominal, GainMode.CONTACT
    return p.gamma * p.k_nominal, GainMode.FREE_MOTION


def render_force(q_robot: int, q_operator: int, gain: float, p: ForceFeedbackParams) -> float:
    """Unidirectional virtual-wall command against penetration depth
    ``q_robot - q_operator``. Zero at or below the dead zone (strict
    ``>``); otherwise ``gain * depth`` saturated at ``tau_max``. Never
    negative: withdrawal is unresisted."""
    delta = q_robot - q_operator
    if delta <= p.epsilon:
        return 0.0
    tau = gain * delta
    if tau > p.tau_max:
        return p.tau_max
    return tau


def initial_state(fe_ticks: Sequence[int], aa_raw: int) -> DeviceState:
    """State at cycle 0, before any step has run.

    The abduction filter seeds from the first raw sample (rather than
    zero) so power-on does not fabricate a transient.
    """
    q = _check_channels(fe_ticks)
    _check_aa(aa_raw)
    zeros = (0,) * NUM_FE_CHANNELS
    return DeviceState(
        q_operator=q,
        v=zeros,
        gain_mode=(GainMode.CONTACT,) * NUM_FE_CHANNELS,
        tau_cmd=(0.0,) * NUM_FE_CHANNELS,
        mode_pending=zeros,
        aa_raw=aa_raw,
        aa_filtered=float(aa_raw),
        cycle_count=0,
    )


def firmware_step(
    state: DeviceState,
    shadow: RobotShadow,
    fe_ticks: Sequence[int],
    aa_raw: int,
    p: ForceFeedbackParams,
) -> tuple[DeviceState, StepOutputs]:
    """Advance one 10 ms control cycle.

    Per FE channel, in order: latch the new position, estimate velocity,
    schedule the gain, render force against the shadow. The abduction
    channel only filters. Pure: no hidden state, no clock access.
    """
    q_now = _check_channels(fe_ticks)
    _check_aa(aa_raw)
    if len(shadow.q_robot) != NUM_FE_CHANNELS:
        raise ChannelCountError(
            f"shadow has {len(shadow.q_robot)} channels, expected {NUM_FE_CHANNELS}"
        )

    v: list[int] = []
    modes: list[GainMode] = []
    taus: list[float] = []
    pending: list[int] = []
    for ch in range(NUM_FE_CHANNELS):
        v_ch = estimate_velocity(q_now[ch], state.q_operator[ch])
        gain, raw_mode = scheduled_gain(v_ch, p)
        if p.debounce_cycles and raw_mode is not state.gain_mode[ch]:
            # Hold the previous mode until the disagreement persists.
            n = state.mode_pending[ch] + 1
            if n > p.debounce_cycles:
                mode, n = raw_mode, 0
            else:
                mode = state.gain_mode[ch]
                gain = p.k_nominal if mode is GainMode.CONTACT else p.gamma * p.k_nominal
        else:
            mode, n = raw_mode, 0
        taus.append(render_force(shadow.q_robot[ch], q_now[ch], gain, p))
        v.append(v_ch)
        modes.append(mode)
        pending.append(n)

    filtered = ema_step(state.aa_filtered, float(aa_raw), p.ema_alpha)
    new_state = DeviceState(
        q_operator=q_now,
        v=tuple(v),
        gain_mode=tuple(modes),
        tau_cmd=tuple(taus),
        mode_pending=tuple(pending),
        aa_raw=aa_raw,
        aa_filtered=filtered,
        cycle_count=state.cycle_count + 1,
    )
    return new_state, StepOutputs(new_state.tau_cmd, new_state.gain_mode, filtered)


def _check_channels(fe_ticks: Sequence[int]) -> tuple[int, ...]:
    if len(fe_ticks) != NUM_FE_CHANNELS:
        raise ChannelCountError(
            f"got {len(fe_ticks)} FE channels, expected {NUM_FE_CHANNELS}"
        )
    return tuple(int(t) for t in fe_ticks)


def _check_aa(aa_raw: int) -> None:
    if not 0 <= aa_raw <= AA_RAW_MAX:
        raise ValueError(f"abduction raw angle out of range: {aa_raw}")
