"""Demonstration-episode files: recording, validation, replay, statistics.

An episode is newline-delimited JSON — one header object, then one
object per record — chosen over a binary format so a crashed file is
still inspectable and append-safe. Timestamps are session-relative
integer nanoseconds; floats serialize through Python's shortest
round-trip repr, so a written record parses back to bit-identical
values. That is what lets ``replay`` demand *exact* equality: it rebuilds
the control pipeline from the header (which embeds the full profile,
scenario, parameters, and a resume snapshot when recording started
mid-session), feeds the logged raw inputs back through it, and compares
the regenerated torque/robot-target/contact streams byte for byte.

The validator is total: any byte sequence produces a violation list,
never an exception.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from dexmouse.core import CYCLE_NS, NUM_CHANNELS, NUM_FE_CHANNELS
from dexmouse.firmware import ForceFeedbackParams
from dexmouse.pipeline import ControlPipeline
from dexmouse.retarget import HandProfile
from dexmouse.simhand import Scenario
from dexmouse.streams import AlignedSample, align

SCHEMA_VERSION = 1

STREAMS = ("joints", "torque", "robot_targets", "contact", "pose", "camera", "event")

# Fixed payload arity per stream; None = profile-dependent.
_ARITY: dict[str, int | None] = {
    "joints": NUM_CHANNELS,
    "torque": NUM_FE_CHANNELS,
    "robot_targets": None,
    "contact": NUM_FE_CHANNELS,
    "pose": 7,
    "camera": 1,
    "event": 2,
}

_JSON_COMPACT = {"separators": (",", ":")}


class EpisodeFormatError(Exception):
    """Episode file cannot be read for replay/stats (validation explains why)."""


class RecordingError(Exception):
    """Durable append failed; the writer is dead and must be discarded."""


@dataclass(frozen=True)
class LogRecord:
    t: int
    stream: str
    payload: list

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.t, "stream": self.stream, "payload": self.payload},
            **_JSON_COMPACT,
        )


def make_header(
    *,
    session_id: str,
    profile: HandProfile,
    scenario: Scenario,
    params: ForceFeedbackParams,
    started_at: str,
    task: str,
    operator: str = "anon",
    start_cycle: int = 0,
    resume: dict | None = None,
    pose_source: dict | None = None,
) -> dict:
    """Episode header. Identity fields up front; the ``replay`` capsule
    embeds full profile/scenario content plus the pipeline resume
    snapshot so the file replays standalone."""
    return {
        "record": "header",
        "schema_version": SCHEMA_VERSION,
        "session_id": session_id,
        "profile": {"name": profile.name, "hash": profile.content_hash()},
        "scenario": scenario.name,
        "ff_params": params.to_dict(),
        "started_at": started_at,
        "task": task,
        "operator": operator,
        "start_cycle": start_cycle,
        "replay": {
            "profile": profile.to_dict(),
            "scenario": scenario.to_dict(),
            "resume": resume,
            "pose_source": pose_source or {},
        },
    }


class EpisodeWriter:
    """Single-writer NDJSON sink. The header is written (and flushed) at
    construction, so an append can never precede it; afterwards records
    are flushed at least every 100 ms of wall time."""

    FLUSH_INTERVAL_S = 0.1

    def __init__(self, path: str | Path, header: dict) -> None:
        import time

        self.path = Path(path)
        self._clock = time.monotonic
        self._failed = False
        try:
            self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
            self._fh.write(json.dumps(header, **_JSON_COMPACT) + "\n")
            self._fh.flush()
        except OSError as exc:
            self._failed = True
            raise RecordingError(f"cannot open episode file {path}: {exc}") from exc
        self._last_flush = self._clock()

    @property
    def failed(self) -> bool:
        return self._failed

    def append(self, record: LogRecord) -> None:
        self.append_line(record.to_json())

    def append_line(self, line: str) -> None:
        if self._failed:
            raise RecordingError("writer already failed")
        try:
            self._fh.write(line + "\n")
            now = self._clock()
            if now - self._last_flush >= self.FLUSH_INTERVAL_S:
                self._fh.flush()
                self._last_flush = now
        except (OSError, ValueError) as exc:  # ValueError: file already closed
            self._failed = True
            try:
                self._fh.close()
            except OSError:
                pass
            raise RecordingError(f"append to {self.path} failed: {exc}") from exc

    def close(self) -> None:
        if not self._failed:
            self._fh.flush()
            self._fh.close()


def read_header(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise EpisodeFormatError(f"{path}: first line is not JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("record") != "header":
        raise EpisodeFormatError(f"{path}: first record is not an episode header")
    return header


def iter_records(path: str | Path) -> Iterator[LogRecord]:
    """Strict record iteration (header skipped); malformed lines raise.
    Use :func:`validate` for forgiving inspection."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                yield LogRecord(obj["t"], obj["stream"], obj["payload"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EpisodeFormatError(f"{path}:{lineno}: bad record: {exc}") from exc


@dataclass(frozen=True)
class Violation:
    line: int
    message: str


@dataclass
class ValidationReport:
    path: str
    records: int = 0
    records_per_stream: Counter = field(default_factory=Counter)
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_payload(stream: str, payload: Any, targets_arity: int | None) -> str | None:
    if not isinstance(payload, list):
        return "payload must be an array"
    arity = _ARITY[stream] if stream != "robot_targets" else targets_arity
    if arity is not None and len(payload) != arity:
        return f"{stream} payload must have {arity} entries, got {len(payload)}"
    if stream == "joints" and not all(isinstance(v, int) for v in payload):
        return "joints payload must be integers"
    if stream in ("torque", "robot_targets", "pose") and not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in payload
    ):
        return f"{stream} payload must be numbers"
    if stream == "contact" and not all(isinstance(v, bool) for v in payload):
        return "contact payload must be booleans"
    if stream == "camera" and not (isinstance(payload[0], int) and payload[0] >= 0):
        return "camera payload must be a non-negative frame index"
    if stream == "event" and not all(isinstance(v, str) for v in payload):
        return "event payload must be [tag, text] strings"
    if stream == "pose":
        norm2 = sum(c * c for c in payload[3:])
        if abs(norm2 - 1.0) > 2e-6:
            return "pose quaternion is not unit length"
    return None


def validate(path: str | Path) -> ValidationReport:
    """Total validator: header, schema version, per-stream timestamp
    order, payload arity/shape, camera monotonicity, profile-hash
    consistency. Every problem is a line-numbered violation."""
    report = ValidationReport(path=str(path))

    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        report.violations.append(Violation(0, f"unreadable: {exc}"))
        return report

    text = raw.decode("utf-8", errors="replace")
    lines = text.split("\n")
    unterminated = lines and lines[-1] != ""
    if lines and lines[-1] == "":
        lines.pop()

    targets_arity: int | None = None
    expected_hash: str | None = None
    if not lines:
        report.violations.append(Violation(0, "empty file: missing header"))
        return report

    header: dict | None = None
    try:
        maybe = json.loads(lines[0])
        if isinstance(maybe, dict) and maybe.get("record") == "header":
            header = maybe
    except json.JSONDecodeError:
        pass
    if header is None:
        report.violations.append(Violation(1, "first record is not an episode header"))
    else:
        if header.get("schema_version") != SCHEMA_VERSION:
            report.violations.append(
                Violation(1, f"unsupported schema_version {header.get('schema_version')!r}")
            )
        profile_info = header.get("profile")
        embedded = (header.get("replay") or {}).get("profile")
        if isinstance(profile_info, dict):
            expected_hash = profile_info.get("hash")
        if embedded is not None:
            try:
                profile = HandProfile.from_dict(embedded)
                targets_arity = len(profile.joint_ids)
                if expected_hash is not None and profile.content_hash() != expected_hash:
                    report.violations.append(
                        Violation(1, "embedded profile does not match header profile hash")
                    )
            except Exception as exc:  # validator never crashes
                report.violations.append(Violation(1, f"embedded profile invalid: {exc}"))

    last_t: dict[str, int] = {}
    last_frame: int | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        partial = unterminated and lineno == len(lines)
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.violations.append(
                Violation(lineno, "partial record" if partial else "malformed JSON")
            )
            continue
        try:
            if not isinstance(obj, dict):
                report.violations.append(Violation(lineno, "record must be an object"))
                continue
            if obj.get("record") == "header":
                report.violations.append(Violation(lineno, "duplicate header"))
                continue
            t, stream, payload = obj.get("t"), obj.get("stream"), obj.get("payload")
            if not isinstance(t, int) or t < 0:
                report.violations.append(Violation(lineno, f"bad timestamp {t!r}"))
                continue
            if stream not in STREAMS:
                report.violations.append(Violation(lineno, f"unknown stream {stream!r}"))
                continue
            problem = _check_payload(stream, payload, targets_arity)
            if problem is None and stream == "robot_targets" and targets_arity is None:
                # No embedded profile: at least require a consistent arity.
                targets_arity = len(payload)
            if problem:
                report.violations.append(Violation(lineno, problem))
                continue
            if stream in last_t and t < last_t[stream]:
                report.violations.append(
                    Violation(lineno, f"{stream} timestamp went backwards ({t} < {last_t[stream]})")
                )
            last_t[stream] = t
            if stream == "camera":
                if last_frame is not None and payload[0] <= last_frame:
                    report.violations.append(
                        Violation(lineno, "camera frame_index not strictly increasing")
                    )
                last_frame = payload[0]
            report.records += 1
            report.records_per_stream[stream] += 1
        except Exception as exc:
            report.violations.append(Violation(lineno, f"unexpected: {exc}"))
    return report


@dataclass(frozen=True)
class Divergence:
    stream: str
    t: int
    logged: list
    replayed: list


@dataclass
class ReplayReport:
    path: str
    cycles: int = 0
    compared: int = 0
    divergences: list[Divergence] = field(default_factory=list)

    MAX_REPORTED = 10

    @property
    def ok(self) -> bool:
        return not self.divergences

    @property
    def first(self) -> Divergence | None:
        return self.divergences[0] if self.divergences else None


def replay(path: str | Path) -> ReplayReport:
    """Re-run the pipeline over the episode's logged raw inputs and
    compare every derived record. Bit-exact or it's a divergence."""
    header = read_header(path)
    capsule = header.get("replay") or {}
    if "profile" not in capsule or "scenario" not in capsule:
        raise EpisodeFormatError(f"{path}: header lacks the replay capsule")
    profile = HandProfile.from_dict(capsule["profile"])
    scenario = Scenario.from_dict(capsule["scenario"])
    params = ForceFeedbackParams.from_dict(header["ff_params"])
    pipeline = ControlPipeline(profile, scenario, params, resume=capsule.get("resume"))

    report = ReplayReport(path=str(path))
    logged: dict[str, list[LogRecord]] = {"torque": [], "robot_targets": [], "contact": []}
    inputs: list[LogRecord] = []
    block_events: list[tuple[int, int, float | None]] = []
    for record in iter_records(path):
        if record.stream == "joints":
            inputs.append(record)
        elif record.stream in logged:
            logged[record.stream].append(record)
        elif record.stream == "event" and record.payload[0] == "set_block":
            edit = json.loads(record.payload[1])
            block_events.append((record.t, edit["channel"], edit.get("block")))

    def diverge(stream: str, t: int, want: list, got: list) -> None:
        if len(report.divergences) < ReplayReport.MAX_REPORTED:
            report.divergences.append(Divergence(stream, t, want, got))

    next_block = 0
    for i, record in enumerate(inputs):
        while next_block < len(block_events) and block_events[next_block][0] <= record.t:
            _, channel, block = block_events[next_block]
            pipeline.set_block(channel, block)
            next_block += 1
        cycle = record.t // CYCLE_NS
        result = pipeline.step(cycle, record.payload[:5], record.payload[5])
        report.cycles += 1
        produced = {
            "torque": list(result.outputs.tau_cmd),
            "robot_targets": list(result.targets.angles),
            "contact": list(result.contacts),
        }
        for stream, got in produced.items():
            want = logged[stream]
            if i >= len(want):
                diverge(stream, record.t, [], got)
                continue
            report.compared += 1
            if want[i].payload != got or want[i].t != record.t:
                diverge(stream, record.t, want[i].payload, got)
    for stream, records in logged.items():
        for record in records[len(inputs):]:
            diverge(stream, record.t, record.payload, [])
    return report


@dataclass(frozen=True)
class EpisodeStats:
    path: str
    duration_s: float
    records_per_stream: dict[str, int]
    contact_fraction: tuple[float, ...]
    success: bool | None
    completion_time_s: float | None
    flags: tuple[str, ...] = ()

    CSV_COLUMNS = (
        "duration_s",
        "success",
        "completion_time_s",
        "joints",
        "torque",
        "robot_targets",
        "contact",
        "pose",
        "camera",
        "event",
        "contact_fraction_0",
        "contact_fraction_1",
        "contact_fraction_2",
        "contact_fraction_3",
        "contact_fraction_4",
        "flags",
    )

    def to_csv(self) -> str:
        row = [
            repr(self.duration_s),
            "" if self.success is None else str(self.success).lower(),
            "" if self.completion_time_s is None else repr(self.completion_time_s),
        ]
        row += [str(self.records_per_stream.get(s, 0)) for s in STREAMS]
        row += [repr(f) for f in self.contact_fraction]
        row.append(";".join(self.flags))
        return ",".join(self.CSV_COLUMNS) + "\n" + ",".join(row) + "\n"


def stats(path: str | Path) -> EpisodeStats:
    """Deterministic aggregation of one episode file."""
    read_header(path)  # raises if this is not an episode
    counts: Counter = Counter()
    first_t: int | None = None
    last_t = 0
    contact_true = [0] * NUM_FE_CHANNELS
    contact_rows = 0
    success: bool | None = None
    stop_t: int | None = None
    flags: list[str] = []
    for record in iter_records(path):
        counts[record.stream] += 1
        if first_t is None:
            first_t = record.t
        last_t = max(last_t, record.t)
        if record.stream == "contact":
            contact_rows += 1
            for ch, hit in enumerate(record.payload):
                contact_true[ch] += 1 if hit else 0
        elif record.stream == "event" and record.payload[0] == "record_stop":
            success = record.payload[1] == "success=true"
            stop_t = record.t

    if stop_t is None:
        flags.append("missing_end_event")
    duration_s = 0.0 if first_t is None else (last_t - first_t) / 1e9
    completion = None if stop_t is None or first_t is None else (stop_t - first_t) / 1e9
    fractions = tuple(
        (n / contact_rows) if contact_rows else 0.0 for n in contact_true
    )
    return EpisodeStats(
        path=str(path),
        duration_s=duration_s,
        records_per_stream=dict(counts),
        contact_fraction=fractions,
        success=success,
        completion_time_s=completion,
        flags=tuple(flags),
    )


def aligned_samples(
    path: str | Path, rate_hz: int = 20, max_gap_ms: int = 150
) -> tuple[list[AlignedSample], int]:
    """Episode -> policy-ready rows on a uniform grid (zero-order hold),
    plus the count of grid rows dropped for staleness."""
    streams: dict[str, list] = {s: [] for s in ("joints", "torque", "robot_targets", "contact", "pose", "camera")}
    for record in iter_records(path):
        if record.stream in streams:
            streams[record.stream].append((record.t, record.payload))
    rows, dropped = align(streams, rate_hz=rate_hz, max_gap_ms=max_gap_ms)
    samples = [
        AlignedSample(
            t=t,
            ticks=tuple(row["joints"]),
            robot_targets=tuple(row["robot_targets"]),
            tau_cmd=tuple(row["torque"]),
            contact=tuple(row["contact"]),
            pose=tuple(row["pose"]),
            frame_index=row["camera"][0],
        )
        for t, row in rows
    ]
    return samples, dropped
