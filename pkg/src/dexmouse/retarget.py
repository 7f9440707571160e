"""Proportional retargeting from device channels to robot hand joints.

A hand profile is written once per target robot and contains no
per-operator data. Raw channel ticks are normalized to flexion
``u in [0, 1]`` over the channel's device range, then linearly scaled
onto each mapped joint's limits, optionally weighted or inverted. The
inverse map expresses a robot finger position back in device tick space,
which is what the force renderer compares the operator against.

Normalization is the explicit intermediate: the virtual target hand
lives entirely in u-space, so ``normalize``/``inverse_map`` must be exact
inverses (up to 1-tick quantization), and endpoint fidelity is load
bearing — u = 0/1 must hit the weighted joint limits exactly, not within
float fuzz. ``map_channel`` special-cases the endpoints for that reason.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from dexmouse.core import AA_CHANNEL, NUM_CHANNELS, NUM_FE_CHANNELS, clamp01
from dexmouse.firmware import DeviceState


class ProfileError(ValueError):
    """Profile file violates the schema or its invariants."""


@dataclass(frozen=True)
class JointMap:
    joint_id: str
    theta_min: float
    theta_max: float
    weight: float = 1.0
    invert: bool = False

    def __post_init__(self) -> None:
        if not self.theta_min < self.theta_max:
            raise ProfileError(
                f"{self.joint_id}: theta_min {self.theta_min} must be < theta_max {self.theta_max}"
            )
        if not 0.0 < self.weight <= 1.0:
            raise ProfileError(f"{self.joint_id}: weight must be in (0, 1], got {self.weight}")


@dataclass(frozen=True)
class DeviceRange:
    q_min: int
    q_max: int
    flexion_decreases: bool = True

    def __post_init__(self) -> None:
        if not self.q_min < self.q_max:
            raise ProfileError(f"q_min {self.q_min} must be < q_max {self.q_max}")

    @property
    def span(self) -> int:
        return self.q_max - self.q_min


@dataclass(frozen=True)
class NeutralJoint:
    """A robot joint with no device counterpart, held at a fixed angle."""

    joint_id: str
    angle: float


@dataclass(frozen=True)
class RobotJointTargets:
    joints: tuple[tuple[str, float], ...]  # (joint_id, radians), profile order
    t: int = 0  # session-relative ns

    def as_dict(self) -> dict[str, float]:
        return dict(self.joints)

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(a for _, a in self.joints)


@dataclass
class ClampDiagnostics:
    """Counts ticks that fell outside a channel's device range (they are
    clamped, never rejected). Owned by the caller; retargeting stays pure
    apart from bumping these counters when one is passed in."""

    per_channel: list[int] = field(default_factory=lambda: [0] * NUM_CHANNELS)

    @property
    def total(self) -> int:
        return sum(self.per_channel)


@dataclass(frozen=True)
class HandProfile:
    name: str
    ranges: tuple[DeviceRange, ...]  # one per device channel
    maps: tuple[tuple[JointMap, ...], ...]  # JointMaps per device channel
    neutral: tuple[NeutralJoint, ...] = ()
    rate_limit: float = 0.05  # virtual-hand flexion units per cycle

    def __post_init__(self) -> None:
        if len(self.ranges) != NUM_CHANNELS or len(self.maps) != NUM_CHANNELS:
            raise ProfileError(
                f"{self.name}: profile must cover all {NUM_CHANNELS} device channels"
            )
        for ch in range(NUM_FE_CHANNELS):
            if not self.maps[ch]:
                raise ProfileError(f"{self.name}: FE channel {ch} has no joint maps")
        seen: set[str] = set()
        for jid in self.joint_ids:
            if jid in seen:
                raise ProfileError(f"{self.name}: joint '{jid}' mapped more than once")
            seen.add(jid)
        if not 0.0 < self.rate_limit <= 1.0:
            raise ProfileError(f"{self.name}: rate_limit must be in (0, 1]")

    @property
    def joint_ids(self) -> tuple[str, ...]:
        """Output joint order: channel maps in channel order, then the
        neutral joints, exactly as declared in the profile file."""
        ids = [m.joint_id for channel in self.maps for m in channel]
        ids.extend(n.joint_id for n in self.neutral)
        return tuple(ids)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rate_limit": self.rate_limit,
            "channels": [
                {
                    "q_min": rng.q_min,
                    "q_max": rng.q_max,
                    "flexion_decreases": rng.flexion_decreases,
                    "maps": [
                        {
                            "joint_id": m.joint_id,
                            "theta_min": m.theta_min,
                            "theta_max": m.theta_max,
                            "weight": m.weight,
                            "invert": m.invert,
                        }
                        for m in maps
                    ],
                }
                for rng, maps in zip(self.ranges, self.maps)
            ],
            "neutral_joints": [
                {"joint_id": n.joint_id, "angle": n.angle} for n in self.neutral
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HandProfile":
        try:
            channels = data["channels"]
            ranges = tuple(
                DeviceRange(ch["q_min"], ch["q_max"], ch.get("flexion_decreases", True))
                for ch in channels
            )
            maps = tuple(
                tuple(
                    JointMap(
                        m["joint_id"],
                        m["theta_min"],
                        m["theta_max"],
                        m.get("weight", 1.0),
                        m.get("invert", False),
                    )
                    for m in ch.get("maps", [])
                )
                for ch in channels
            )
            neutral = tuple(
                NeutralJoint(n["joint_id"], n["angle"])
                for n in data.get("neutral_joints", [])
            )
            return cls(
                name=data["name"],
                ranges=ranges,
                maps=maps,
                neutral=neutral,
                rate_limit=data.get("rate_limit", 0.05),
            )
        except KeyError as exc:
            raise ProfileError(f"profile missing required field: {exc}") from exc

    def content_hash(self) -> str:
        """Stable digest of the profile content (not the file bytes), so
        episode headers can pin the exact mapping they were recorded with."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_profile(path: str | Path) -> HandProfile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProfileError(f"cannot load profile {path}: {exc}") from exc
    profile = HandProfile.from_dict(data)
    return profile


def normalize(q: float, rng: DeviceRange) -> float:
    """Map ticks to flexion u in [0, 1]; out-of-range input clamps."""
    if rng.flexion_decreases:
        u = (rng.q_max - q) / rng.span
    else:
        u = (q - rng.q_min) / rng.span
    return clamp01(u)


def map_channel(u: float, maps: Sequence[JointMap]) -> tuple[float, ...]:
    """Scale flexion u onto every mapped joint's limits.

    theta = theta_min + weight * u' * (theta_max - theta_min), with
    u' = 1-u when inverted. The u' extremes return the weighted limits
    exactly (w=1, u'=1 gives theta_max itself, not a rounded neighbour);
    interior points are clamped so limits can never be exceeded.
    """
    out = []
    for m in maps:
        t = m.weight * ((1.0 - u) if m.invert else u)
        if t <= 0.0:
            theta = m.theta_min
        elif t >= 1.0:
            theta = m.theta_max
        else:
            theta = m.theta_min + t * (m.theta_max - m.theta_min)
            if theta > m.theta_max:
                theta = m.theta_max
            elif theta < m.theta_min:
                theta = m.theta_min
        out.append(theta)
    return tuple(out)


def retarget_all(
    state: DeviceState,
    profile: HandProfile,
    t: int = 0,
    diagnostics: ClampDiagnostics | None = None,
) -> RobotJointTargets:
    """Retarget a full device snapshot to robot joint targets.

    FE channels go through normalize + map_channel on their raw ticks;
    the abduction channel uses the filtered value over its range. Output
    order is the profile's declaration order; neutral joints follow at
    their configured angles.
    """
    joints: list[tuple[str, float]] = []
    for ch in range(NUM_CHANNELS):
        maps = profile.maps[ch]
        rng = profile.ranges[ch]
        value: float = state.aa_filtered if ch == AA_CHANNEL else state.q_operator[ch]
        if diagnostics is not None and not rng.q_min <= value <= rng.q_max:
            diagnostics.per_channel[ch] += 1
        u = normalize(value, rng)
        joints.extend(zip((m.joint_id for m in maps), map_channel(u, maps)))
    joints.extend((n.joint_id, n.angle) for n in profile.neutral)
    return RobotJointTargets(joints=tuple(joints), t=t)


def inverse_map(u_robot: Sequence[float], profile: HandProfile) -> tuple[int, ...]:
    """Express per-FE-channel robot flexion back as device ticks.

    Exact inverse of :func:`normalize` on the same range, quantized to
    integer ticks (so a round trip moves u by at most one tick's worth).
    """
    if len(u_robot) != NUM_FE_CHANNELS:
        raise ValueError(f"expected {NUM_FE_CHANNELS} FE values, got {len(u_robot)}")
    ticks = []
    for ch, u in enumerate(u_robot):
        rng = profile.ranges[ch]
        u = clamp01(u)
        if rng.flexion_decreases:
            q = rng.q_max - u * rng.span
        else:
            q = rng.q_min + u * rng.span
        ticks.append(round(q))
    return tuple(ticks)


def normalized_fe(state: DeviceState, profile: HandProfile) -> tuple[float, ...]:
    """Operator flexion u per FE channel — the virtual hand's targets."""
    return tuple(
        normalize(state.q_operator[ch], profile.ranges[ch])
        for ch in range(NUM_FE_CHANNELS)
    )
