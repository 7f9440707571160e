"""Non-joint data streams and multi-rate time alignment.

The stack produces three native rates: the 100 Hz joint/torque loop, a
20 Hz wrist-pose stream (mocked tracker), and a 30 Hz camera stream
(frame indices only — no pixels). ``align`` resamples any set of
time-ordered streams onto a uniform grid by zero-order hold: each output
row takes, per stream, the latest sample at or before the grid time.
Rows where some stream's freshest sample is older than ``max_gap_ms``
are dropped and counted rather than interpolated — ticks and frame
indices are not meaningfully interpolable, and training consumers prefer
a gap count over fabricated data.

Everything here is pure/deterministic: the pose mock derives its whole
trajectory from (seed, path_spec), and alignment is a function of its
inputs. Timestamps are session-relative integer nanoseconds throughout.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Iterator, Mapping, Sequence

NS_PER_S = 1_000_000_000

PATH_SPECS = ("static", "circle", "sway")


class AlignmentError(ValueError):
    """A mandatory stream is empty or alignment inputs are malformed."""


@dataclass(frozen=True)
class Pose:
    """6-DoF wrist pose: position in meters, orientation as a unit
    quaternion (w, x, y, z), renormalized on construction."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]
    t: int = 0  # session-relative ns

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(c * c for c in self.orientation))
        if not math.isfinite(norm) or norm < 1e-9:
            raise ValueError(f"degenerate quaternion: {self.orientation}")
        if abs(norm - 1.0) > 1e-12:
            object.__setattr__(
                self, "orientation", tuple(c / norm for c in self.orientation)
            )

    def flat(self) -> tuple[float, ...]:
        """The 7-real wire/log payload: px, py, pz, qw, qx, qy, qz."""
        return self.position + self.orientation

    @classmethod
    def from_flat(cls, values: Sequence[float], t: int = 0) -> "Pose":
        if len(values) != 7:
            raise ValueError(f"pose payload must have 7 values, got {len(values)}")
        return cls(tuple(values[:3]), tuple(values[3:]), t)


IDENTITY_POSE = Pose((0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class CameraFrameRef:
    frame_index: int
    t: int

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame index must be non-negative: {self.frame_index}")


@dataclass(frozen=True)
class AlignedSample:
    """One policy-ready row: every field's source timestamp is <= t and
    within the alignment gap budget."""

    t: int
    ticks: tuple[int, ...]  # 6 device channels
    robot_targets: tuple[float, ...]
    tau_cmd: tuple[float, ...]  # 5 FE channels
    contact: tuple[bool, ...]  # 5 FE channels
    pose: tuple[float, ...]  # 7 reals
    frame_index: int


def _circle_pose(phase: float, t_s: float) -> Pose:
    # 0.1 m radius in the horizontal plane, one lap every 4 s, yaw
    # following the tangent.
    angle = phase + 2.0 * math.pi * t_s / 4.0
    half_yaw = 0.5 * (angle + math.pi / 2.0)
    return Pose(
        position=(0.1 * math.cos(angle), 0.1 * math.sin(angle), 0.0),
        orientation=(math.cos(half_yaw), 0.0, 0.0, math.sin(half_yaw)),
    )


def _sway_pose(phase: float, t_s: float) -> Pose:
    # Gentle out-of-phase sinusoids on all three axes plus a pitch rock.
    w = 2.0 * math.pi / 5.0
    half_pitch = 0.5 * 0.2 * math.sin(w * t_s + phase)
    return Pose(
        position=(
            0.05 * math.sin(w * t_s + phase),
            0.03 * math.sin(1.3 * w * t_s + phase),
            0.02 * math.sin(0.7 * w * t_s),
        ),
        orientation=(math.cos(half_pitch), 0.0, math.sin(half_pitch), 0.0),
    )


def pose_sample(seed: int, path_spec: str, k: int, rate_hz: int = 20) -> Pose:
    """The k-th pose of the mock trajectory (pure in all arguments)."""
    if path_spec not in PATH_SPECS:
        raise ValueError(f"unknown path_spec '{path_spec}' (have: {', '.join(PATH_SPECS)})")
    t_ns = k * NS_PER_S // rate_hz
    if path_spec == "static":
        pose = IDENTITY_POSE
    else:
        phase = random.Random(seed).uniform(0.0, 2.0 * math.pi)
        t_s = t_ns / NS_PER_S
        pose = _circle_pose(phase, t_s) if path_spec == "circle" else _sway_pose(phase, t_s)
    return Pose(pose.position, pose.orientation, t_ns)


def mock_pose_source(
    seed: int, rate_hz: int = 20, path_spec: str = "static"
) -> Iterator[Pose]:
    """Endless deterministic pose stream at *rate_hz*."""
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    pose_sample(seed, path_spec, 0, rate_hz)  # validate path_spec eagerly
    k = 0
    while True:
        yield pose_sample(seed, path_spec, k, rate_hz)
        k += 1


def camera_frame_index(t_ns: int, rate_hz: int = 30) -> int:
    """Index of the newest camera frame captured at or before t."""
    return t_ns * rate_hz // NS_PER_S


def grid_time(k: int, rate_hz: int) -> int:
    """k-th alignment grid time in ns (k / rate_hz, rounded down)."""
    return k * NS_PER_S // rate_hz


def align(
    streams: Mapping[str, Sequence[tuple[int, Any]]],
    rate_hz: int,
    max_gap_ms: int = 150,
) -> tuple[list[tuple[int, dict[str, Any]]], int]:
    """Zero-order-hold every stream onto the uniform grid.

    *streams* maps name -> time-ordered (t_ns, value) samples; every
    stream is mandatory. Returns (rows, dropped) where each row is
    (t, {name: value at or before t}) and *dropped* counts grid points
    omitted because some stream was missing or staler than *max_gap_ms*.
    The grid runs from t=0 through the earliest stream end — beyond
    that, rows would only ever age out.
    """
    if rate_hz <= 0:
        raise AlignmentError("rate_hz must be positive")
    if not streams:
        raise AlignmentError("no streams to align")
    for name, samples in streams.items():
        if not samples:
            raise AlignmentError(f"mandatory stream '{name}' is empty")
        times = [t for t, _ in samples]
        if times != sorted(times):
            raise AlignmentError(f"stream '{name}' is not time-ordered")

    max_gap_ns = max_gap_ms * 1_000_000
    end = min(samples[-1][0] for samples in streams.values())
    names = list(streams)
    cursors = {name: 0 for name in names}
    rows: list[tuple[int, dict[str, Any]]] = []
    dropped = 0
    k = 0
    while (t := grid_time(k, rate_hz)) <= end:
        row: dict[str, Any] = {}
        fresh = True
        for name in names:
            samples = streams[name]
            i = cursors[name]
            while i + 1 < len(samples) and samples[i + 1][0] <= t:
                i += 1
            cursors[name] = i
            t_src, value = samples[i]
            if t_src > t or t - t_src > max_gap_ns:
                fresh = False
                break
            row[name] = value
        if fresh:
            rows.append((t, row))
        else:
            dropped += 1
        k += 1
    return rows, dropped


ALIGNED_CSV_COLUMNS = (
    ["t_ns"]
    + [f"q{i}" for i in range(6)]
    + ["robot_targets"]
    + [f"tau{i}" for i in range(5)]
    + [f"contact{i}" for i in range(5)]
    + ["px", "py", "pz", "qw", "qx", "qy", "qz", "frame_index"]
)


def aligned_to_csv(samples: Sequence[AlignedSample]) -> str:
    """Render aligned samples as CSV in the documented column order.

    ``robot_targets`` is variable-arity (profile-dependent), so it is
    emitted as a single semicolon-joined field.
    """
    lines = [",".join(ALIGNED_CSV_COLUMNS)]
    for s in samples:
        fields: list[str] = [str(s.t)]
        fields += [str(q) for q in s.ticks]
        fields.append(";".join(repr(a) for a in s.robot_targets))
        fields += [repr(x) for x in s.tau_cmd]
        fields += ["1" if c else "0" for c in s.contact]
        fields += [repr(x) for x in s.pose]
        fields.append(str(s.frame_index))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"
