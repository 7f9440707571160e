"""Live session orchestration: the 100 Hz loop that ties the virtual
operator, the simulated bus, the control pipeline, and the episode
logger together, plus the command surface the API and scripted runs
share.

Clocking comes in two flavors. ``simulated`` advances time by exactly
one 10 ms cycle per iteration and never sleeps, which makes the whole
run — bus traffic, firmware state, episode bytes — a deterministic
function of the config and input script. ``wall`` paces the same loop
against the monotonic clock with deadline scheduling and reports the
measured jitter. Nothing downstream can tell the difference; that is
the point.

Concurrency contract: this loop is the only owner of the pipeline, the
bus, and the episode writer. An API server (if any) talks to it through
bounded queues — commands in, state snapshots out — and backpressure on
the way out drops messages (counted) rather than ever stalling the
loop.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import struct
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from dexmouse.core import (
    AA_RAW_MAX,
    CYCLE_NS,
    LOOP_HZ,
    NUM_FE_CHANNELS,
    cycle_to_ns,
)
from dexmouse.episodes import EpisodeWriter, LogRecord, RecordingError, make_header
from dexmouse.firmware import ForceFeedbackParams
from dexmouse.pipeline import ControlPipeline, StepResult
from dexmouse.retarget import HandProfile, load_profile
from dexmouse.simhand import Scenario, load_scenario
from dexmouse.streams import PATH_SPECS, Pose, IDENTITY_POSE, camera_frame_index, pose_sample
from dexmouse.wire.bus import (
    BusConfig,
    BusTimeoutError,
    SimulatedBus,
    VirtualActuator,
    VirtualEncoder,
)
from dexmouse.wire.frame import BROADCAST_ID, Frame, Instruction
from dexmouse.wire.registers import GOAL_CURRENT, GOAL_POSITION, PRESENT_POSITION, RAW_ANGLE

ACTUATOR_IDS = (1, 2, 3, 4, 5)
ENCODER_ID = 6

POSE_HZ = 20
POSE_EVERY = LOOP_HZ // POSE_HZ

_I16_MIN, _I16_MAX = -(1 << 15), (1 << 15) - 1


class SessionError(Exception):
    """Configuration or orchestration failure; aborts before/outside the loop."""


@dataclass(frozen=True)
class SessionConfig:
    """Everything a run needs. All fields that influence loop behavior
    feed the config digest, so equal configs yield equal session ids
    (and, under the simulated clock, byte-identical episode bodies)."""

    profile: str
    scenario: str
    ff_overrides: dict = field(default_factory=dict)
    mode: str = "virtual"  # "virtual" | "replay"
    episode: str | None = None  # replay-mode input file
    clock: str = "simulated"  # "simulated" | "wall"
    duration_cycles: int | None = None
    api_port: int | None = None
    state_broadcast_hz: int = 20
    script: dict | None = None
    log_dir: str | None = None  # default: $DEXMOUSE_LOG_DIR, else cwd
    task: str = "freeform"
    operator: str = "anon"
    pose_seed: int = 0
    pose_path: str = "static"
    operator_lag_ms: float = 50.0
    bus: BusConfig = field(default_factory=BusConfig)

    def digest(self) -> str:
        """Hash of the deterministic config surface (ports and output
        directories excluded — they don't change what the loop computes)."""
        payload = {
            "profile": str(self.profile),
            "scenario": str(self.scenario),
            "ff_overrides": self.ff_overrides,
            "clock": self.clock,
            "duration_cycles": self.duration_cycles,
            "script": self.script,
            "task": self.task,
            "operator": self.operator,
            "pose_seed": self.pose_seed,
            "pose_path": self.pose_path,
            "operator_lag_ms": self.operator_lag_ms,
            "bus": [self.bus.latency_us, self.bus.corruption_rate, self.bus.seed,
                    self.bus.response_timeout_us],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def session_id(self) -> str:
        return self.digest()[:16]


class OperatorModel:
    """The virtual human: commanded targets reach the device through a
    first-order lag (default 50 ms time constant), so a slider jump
    produces a realistic velocity ramp instead of a teleport — the gain
    scheduler sees plausible tick rates. Channels 0-4 are FE ticks,
    channel 5 the raw abduction angle."""

    def __init__(self, profile: HandProfile, lag_ms: float, loop_hz: int = LOOP_HZ) -> None:
        self.profile = profile
        if lag_ms < 0:
            raise SessionError(f"operator lag must be non-negative, got {lag_ms}")
        dt_ms = 1000.0 / loop_hz
        self._coef = 1.0 if lag_ms == 0 else 1.0 - math.exp(-dt_ms / lag_ms)
        # Start fully open: maximum extension on every FE channel, splay centered.
        self._pos = [float(profile.ranges[c].q_max) for c in range(NUM_FE_CHANNELS)]
        self._pos.append(2048.0)
        self._target = list(self._pos)

    def _bounds(self, channel: int) -> tuple[int, int]:
        if channel < NUM_FE_CHANNELS:
            rng = self.profile.ranges[channel]
            return rng.q_min, rng.q_max
        return 0, AA_RAW_MAX

    def set_target(self, channel: int, value: float, normalized: bool = False) -> None:
        if not 0 <= channel < NUM_FE_CHANNELS + 1:
            raise ValueError(f"channel must be 0..5, got {channel}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ValueError(f"input value must be a finite number, got {value!r}")
        lo, hi = self._bounds(channel)
        if normalized:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"normalized input must be in [0, 1], got {value}")
            if channel < NUM_FE_CHANNELS and self.profile.ranges[channel].flexion_decreases:
                ticks = hi - value * (hi - lo)
            else:
                ticks = lo + value * (hi - lo)
        else:
            ticks = float(value)
        self._target[channel] = min(float(hi), max(float(lo), ticks))

    def step(self) -> tuple[list[int], int]:
        coef = self._coef
        for i, (pos, target) in enumerate(zip(self._pos, self._target)):
            self._pos[i] = pos + coef * (target - pos)
        fe = [round(p) for p in self._pos[:NUM_FE_CHANNELS]]
        return fe, round(self._pos[NUM_FE_CHANNELS])


class DeviceRig:
    """The exoskeleton as seen from the host: five actuators and one
    splay encoder on a shared half-duplex bus. The session never touches
    device registers directly — positions come back through SYNC_READ
    and commands go out through SYNC_WRITE, same as the real wire."""

    def __init__(self, bus_config: BusConfig) -> None:
        self.bus = SimulatedBus(bus_config)
        self.actuators = {i: VirtualActuator(i) for i in ACTUATOR_IDS}
        self.encoder = VirtualEncoder(ENCODER_ID)
        for device in self.actuators.values():
            self.bus.attach(device)
        self.bus.attach(self.encoder)
        self.read_failures = 0
        self._sync_read_params = (
            struct.pack("<HH", PRESENT_POSITION.address, PRESENT_POSITION.size)
            + bytes(ACTUATOR_IDS)
        )
        self._read_params = struct.pack("<HH", RAW_ANGLE.address, RAW_ANGLE.size)
        self._last_fe = [0] * NUM_FE_CHANNELS
        self._last_aa = 0

    def set_operator(self, fe_ticks, aa_raw: int) -> None:
        """Physically move the exoskeleton (device side, not wire)."""
        for channel, device_id in enumerate(ACTUATOR_IDS):
            self.actuators[device_id].set_present_position(fe_ticks[channel])
        self.encoder.set_raw_angle(aa_raw)

    def read_positions(self) -> tuple[list[int], int]:
        """One SYNC_READ for the five FE positions plus one READ for the
        splay angle. A corrupted transaction falls back to the last good
        sample — the loop must never skip a cycle waiting on the wire."""
        try:
            responses = self.bus.transact(
                Frame(BROADCAST_ID, Instruction.SYNC_READ, self._sync_read_params)
            )
            fe = [
                struct.unpack_from("<i", resp.params, 1)[0]
                for resp in sorted(responses, key=lambda r: r.id)
            ]
            self._last_fe = fe
        except BusTimeoutError:
            self.read_failures += 1
        try:
            (resp,) = self.bus.transact(Frame(ENCODER_ID, Instruction.READ, self._read_params))
            self._last_aa = struct.unpack_from("<H", resp.params, 1)[0]
        except BusTimeoutError:
            self.read_failures += 1
        return list(self._last_fe), self._last_aa

    def write_commands(self, tau_cmd, goal_ticks) -> None:
        """SYNC_WRITE the torque limits and spring anchors. Fire-and-forget
        on the wire; corrupted broadcasts are simply lost, as on hardware."""
        current = b"".join(
            bytes([device_id])
            + struct.pack("<h", min(_I16_MAX, max(_I16_MIN, round(tau_cmd[ch]))))
            for ch, device_id in enumerate(ACTUATOR_IDS)
        )
        self.bus.transact(
            Frame(
                BROADCAST_ID,
                Instruction.SYNC_WRITE,
                struct.pack("<HH", GOAL_CURRENT.address, GOAL_CURRENT.size) + current,
            )
        )
        position = b"".join(
            bytes([device_id]) + struct.pack("<i", goal_ticks[ch])
            for ch, device_id in enumerate(ACTUATOR_IDS)
        )
        self.bus.transact(
            Frame(
                BROADCAST_ID,
                Instruction.SYNC_WRITE,
                struct.pack("<HH", GOAL_POSITION.address, GOAL_POSITION.size) + position,
            )
        )


@dataclass
class ExitReport:
    session_id: str
    cycles: int = 0
    wall_time_s: float = 0.0
    stopped_by: str = "duration"
    episodes: list[str] = field(default_factory=list)
    commands_applied: int = 0
    commands_rejected: int = 0
    state_dropped: int = 0
    bus_counters: dict = field(default_factory=dict)
    read_failures: int = 0
    jitter_mean_ms: float | None = None
    jitter_max_ms: float | None = None
    recording_error: str | None = None
    replay: dict | None = None
    api_port: int | None = None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "cycles": self.cycles,
            "wall_time_s": self.wall_time_s,
            "stopped_by": self.stopped_by,
            "episodes": self.episodes,
            "commands_applied": self.commands_applied,
            "commands_rejected": self.commands_rejected,
            "state_dropped": self.state_dropped,
            "bus_counters": self.bus_counters,
            "read_failures": self.read_failures,
            "jitter_mean_ms": self.jitter_mean_ms,
            "jitter_max_ms": self.jitter_max_ms,
            "recording_error": self.recording_error,
            "replay": self.replay,
            "api_port": self.api_port,
        }


@dataclass
class _Recording:
    writer: EpisodeWriter
    path: Path
    task: str
    start_cycle: int
    last_camera_frame: int | None = None


class _Runtime:
    """Mutable loop state shared between the cycle body and command
    application. Lives entirely on the loop thread."""

    def __init__(
        self,
        config: SessionConfig,
        profile: HandProfile,
        scenario: Scenario,
        params: ForceFeedbackParams,
    ) -> None:
        self.config = config
        self.profile = profile
        self.scenario = scenario
        self.params = params
        self.pipeline = ControlPipeline(profile, scenario, params)
        self.operator = OperatorModel(profile, config.operator_lag_ms)
        self.rig = DeviceRig(config.bus)
        self.recording: _Recording | None = None
        self.cycle = 0
        self.stop_requested = False
        self.pose: Pose = IDENTITY_POSE
        self.report = ExitReport(session_id=config.session_id())

    # -- episode recording -------------------------------------------------

    def _log_dir(self) -> Path:
        base = self.config.log_dir or os.environ.get("DEXMOUSE_LOG_DIR") or "."
        path = Path(base)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def start_recording(self, task: str) -> Path:
        if self.recording is not None:
            raise ValueError("already recording")
        if not task or not isinstance(task, str):
            raise ValueError("record_start needs a non-empty task label")
        slug = re.sub(r"[^a-z0-9]+", "-", task.lower()).strip("-") or "task"
        path = self._log_dir() / (
            f"{self.report.session_id}-c{self.cycle:06d}-{slug}.ndjson"
        )
        header = make_header(
            session_id=self.report.session_id,
            profile=self.profile,
            scenario=self.scenario,
            params=self.params,
            started_at=datetime.now(timezone.utc).isoformat(),
            task=task,
            operator=self.config.operator,
            start_cycle=self.cycle,
            resume=self.pipeline.snapshot(),
            pose_source={"seed": self.config.pose_seed, "path_spec": self.config.pose_path},
        )
        writer = EpisodeWriter(path, header)
        writer.append(LogRecord(cycle_to_ns(self.cycle), "event", ["record_start", task]))
        self.recording = _Recording(writer=writer, path=path, task=task, start_cycle=self.cycle)
        return path

    def stop_recording(self, success: bool) -> Path:
        if self.recording is None:
            raise ValueError("not recording")
        rec = self.recording
        self.recording = None
        t = cycle_to_ns(max(self.cycle - 1, rec.start_cycle))
        rec.writer.append(
            LogRecord(t, "event", ["record_stop", f"success={'true' if success else 'false'}"])
        )
        rec.writer.close()
        self.report.episodes.append(str(rec.path))
        return rec.path

    def log_event(self, t: int, tag: str, text: str) -> None:
        if self.recording is not None:
            self.recording.writer.append(LogRecord(t, "event", [tag, text]))

    def abort_recording(self, error: Exception) -> None:
        """Storage failed mid-run: recording dies, the loop does not."""
        rec = self.recording
        self.recording = None
        self.report.recording_error = str(error)
        if rec is not None:
            self.report.episodes.append(str(rec.path))

    # -- command surface -----------------------------------------------------

    def apply_command(self, cmd: object) -> dict:
        """Validate and execute one CommandMessage; error replies never
        raise out of the loop."""
        try:
            reply = self._apply(cmd)
            self.report.commands_applied += 1
            return reply
        except RecordingError as exc:
            self.abort_recording(exc)
            self.report.commands_rejected += 1
            return {"type": "error", "message": f"recording failed: {exc}"}
        except (ValueError, TypeError, KeyError, OSError) as exc:
            self.report.commands_rejected += 1
            message = str(exc) or exc.__class__.__name__
            self.log_event(cycle_to_ns(self.cycle), "error", message)
            return {"type": "error", "message": message}

    def _apply(self, cmd: object) -> dict:
        if not isinstance(cmd, dict) or not isinstance(cmd.get("type"), str):
            raise ValueError("command must be an object with a string 'type'")
        kind = cmd["type"]
        if kind == "set_input":
            channel = cmd["channel"]
            if not isinstance(channel, int) or isinstance(channel, bool):
                raise ValueError("set_input channel must be an integer")
            self.operator.set_target(channel, cmd["value"], bool(cmd.get("normalized", False)))
            return {"type": "ack", "cmd": kind}
        if kind == "set_block":
            channel, value = cmd["channel"], cmd.get("value")
            if not isinstance(channel, int) or isinstance(channel, bool):
                raise ValueError("set_block channel must be an integer")
            if value is not None and (not isinstance(value, (int, float)) or isinstance(value, bool)):
                raise ValueError("set_block value must be a number or null")
            self.pipeline.set_block(channel, value)
            self.log_event(
                cycle_to_ns(self.cycle),
                "set_block",
                json.dumps({"channel": channel, "block": value}),
            )
            return {"type": "ack", "cmd": kind}
        if kind == "record_start":
            path = self.start_recording(cmd.get("task", self.config.task))
            return {"type": "ack", "cmd": kind, "path": str(path)}
        if kind == "record_stop":
            success = cmd.get("success")
            if not isinstance(success, bool):
                raise ValueError("record_stop needs success: true|false")
            path = self.stop_recording(success)
            return {"type": "ack", "cmd": kind, "path": str(path)}
        if kind == "set_params":
            overrides = cmd.get("overrides")
            if not isinstance(overrides, dict):
                raise ValueError("set_params needs an overrides object")
            if self.recording is not None:
                raise ValueError("set_params is forbidden while recording")
            self.params = self.params.with_overrides(overrides)
            self.pipeline.set_params(self.params)
            return {"type": "ack", "cmd": kind, "params": self.params.to_dict()}
        if kind == "stop":
            self.stop_requested = True
            return {"type": "ack", "cmd": kind}
        raise ValueError(f"unknown command type {kind!r}")

    # -- state broadcast -------------------------------------------------------

    def state_message(self, result: StepResult, t: int, q_operator: list[int]) -> dict:
        return {
            "type": "state",
            "t": t,
            "cycle": result.cycle,
            "q_operator": q_operator,
            "gain_mode": [mode.value for mode in result.outputs.gain_mode],
            "tau": list(result.outputs.tau_cmd),
            "u_actual": list(result.hand.u_actual),
            "contact": list(result.contacts),
            "blocks": list(result.hand.blocks),
            "robot_targets": [angle for _, angle in result.targets.joints],
            "pose": list(self.pose.flat()),
            "recording": self.recording is not None,
        }

    def hello_message(self) -> dict:
        """Static session facts a client needs once, at connect time."""
        return {
            "session_id": self.report.session_id,
            "profile": self.profile.name,
            "scenario": self.scenario.name,
            "joint_ids": list(self.profile.joint_ids),
            "channels": NUM_FE_CHANNELS + 1,
            "loop_hz": LOOP_HZ,
            "state_broadcast_hz": self.config.state_broadcast_hz,
            "params": self.params.to_dict(),
            "ranges": [
                {"q_min": rng.q_min, "q_max": rng.q_max, "flexion_decreases": rng.flexion_decreases}
                for rng in self.profile.ranges
            ],
        }


def _normalize_script(script: dict | None) -> tuple[deque, int | None]:
    """Script file shape: {"duration_cycles": N, "commands":
    [{"cycle": k, "command": {...}}, ...]}. Returns commands in stable
    (cycle, listed) order plus the scripted duration."""
    if script is None:
        return deque(), None
    if not isinstance(script, dict):
        raise SessionError("script must be a JSON object")
    duration = script.get("duration_cycles")
    if duration is not None and (not isinstance(duration, int) or duration < 0):
        raise SessionError(f"script duration_cycles must be a non-negative integer, got {duration!r}")
    entries = script.get("commands", [])
    if not isinstance(entries, list):
        raise SessionError("script commands must be an array")
    parsed = []
    for index, entry in enumerate(entries):
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("cycle"), int)
            or entry["cycle"] < 0
            or not isinstance(entry.get("command"), dict)
        ):
            raise SessionError(f"script command #{index} must be {{cycle >= 0, command object}}")
        parsed.append((entry["cycle"], index, entry["command"]))
    parsed.sort(key=lambda item: (item[0], item[1]))
    return deque(parsed), duration


def _load_fixture(kind: str, path_or_name: str):
    """Accept either a real file path or a shipped fixture name."""
    from dexmouse.assets import profile_path, scenario_path

    path = Path(path_or_name)
    if not path.exists():
        path = profile_path(path_or_name) if kind == "profile" else scenario_path(path_or_name)
    return load_profile(path) if kind == "profile" else load_scenario(path)


def run_session(config: SessionConfig, api=None, on_api=None) -> ExitReport:
    """Run one session to completion and report what happened.

    The optional ``api`` object decouples this loop from any real
    server; it must provide ``poll_commands() -> [(client, dict)]``,
    ``send_reply(client, dict)``, and ``broadcast_state(dict) -> int``
    (number of messages dropped to keep the loop unblocked). When
    ``config.api_port`` is set and no ``api`` is injected, a real
    WebSocket server is started (and ``on_api`` is called with it once
    it is listening — that is how a caller learns an ephemeral port).
    """
    if config.mode == "replay":
        return _run_replay(config)
    if config.mode != "virtual":
        raise SessionError(f"unknown session mode {config.mode!r}")
    if config.clock not in ("simulated", "wall"):
        raise SessionError(f"unknown clock {config.clock!r}")
    if config.state_broadcast_hz <= 0 or LOOP_HZ % config.state_broadcast_hz:
        raise SessionError(
            f"state_broadcast_hz must divide {LOOP_HZ}, got {config.state_broadcast_hz}"
        )
    if config.pose_path not in PATH_SPECS:
        raise SessionError(f"pose_path must be one of {PATH_SPECS}, got {config.pose_path!r}")

    try:
        profile = _load_fixture("profile", config.profile)
        scenario = _load_fixture("scenario", config.scenario)
        params = ForceFeedbackParams().with_overrides(config.ff_overrides)
    except Exception as exc:
        raise SessionError(f"invalid session config: {exc}") from exc

    script, scripted_duration = _normalize_script(config.script)
    duration = config.duration_cycles if config.duration_cycles is not None else scripted_duration
    if duration is None and config.clock == "simulated" and api is None:
        raise SessionError(
            "a simulated-clock session with no API needs duration_cycles or a scripted stop"
        )

    runtime = _Runtime(config, profile, scenario, params)
    owned_api = None
    if api is None and config.api_port is not None:
        from dexmouse.api import ApiError, ApiServer

        try:
            owned_api = ApiServer(config.api_port, runtime.hello_message())
        except ApiError as exc:
            raise SessionError(str(exc)) from exc
        api = owned_api
        runtime.report.api_port = owned_api.port
        if on_api is not None:
            on_api(owned_api)
    broadcast_every = LOOP_HZ // config.state_broadcast_hz
    wall = config.clock == "wall"
    jitter_ns: list[int] = []
    started = time.monotonic_ns()
    deadline = started
    stopped_by = "duration"

    try:
        while True:
            cycle = runtime.cycle
            if duration is not None and cycle >= duration:
                # A command scripted at cycle == duration runs after the
                # final cycle, so a script can close its recording cleanly.
                while script and script[0][0] <= duration:
                    runtime.apply_command(script.popleft()[2])
                break
            # 1. Commands: scripted first (they belong to this cycle), then live.
            while script and script[0][0] <= cycle:
                _, _, command = script.popleft()
                runtime.apply_command(command)
            if api is not None:
                for client, command in api.poll_commands():
                    api.send_reply(client, runtime.apply_command(command))
            if runtime.stop_requested:
                stopped_by = "stop_command"
                break

            # 2. The operator moves; the firmware reads it over the wire.
            fe_target, aa_target = runtime.operator.step()
            runtime.rig.set_operator(fe_target, aa_target)
            fe_ticks, aa_raw = runtime.rig.read_positions()

            # 3. One full control cycle.
            result = runtime.pipeline.step(cycle, fe_ticks, aa_raw)
            runtime.rig.write_commands(
                result.outputs.tau_cmd, runtime.pipeline.shadow.q_robot
            )

            t = cycle_to_ns(cycle)
            if cycle % POSE_EVERY == 0:
                runtime.pose = pose_sample(
                    config.pose_seed, config.pose_path, cycle // POSE_EVERY
                )

            # 4. Logging (recording failures stop the recording, not the loop).
            if runtime.recording is not None:
                rec = runtime.recording
                try:
                    writer = rec.writer
                    writer.append(LogRecord(t, "joints", list(fe_ticks) + [aa_raw]))
                    writer.append(LogRecord(t, "torque", list(result.outputs.tau_cmd)))
                    writer.append(
                        LogRecord(t, "robot_targets", [a for _, a in result.targets.joints])
                    )
                    writer.append(LogRecord(t, "contact", list(result.contacts)))
                    if cycle % POSE_EVERY == 0:
                        writer.append(LogRecord(t, "pose", list(runtime.pose.flat())))
                    frame = camera_frame_index(t)
                    if frame != rec.last_camera_frame:
                        writer.append(LogRecord(t, "camera", [frame]))
                        rec.last_camera_frame = frame
                except RecordingError as exc:
                    runtime.abort_recording(exc)

            # 5. State broadcast, non-blocking.
            if api is not None and cycle % broadcast_every == 0:
                runtime.report.state_dropped += api.broadcast_state(
                    runtime.state_message(result, t, list(fe_ticks) + [aa_raw])
                )

            # 6. Pacing.
            if wall:
                deadline += CYCLE_NS
                now = time.monotonic_ns()
                if now < deadline:
                    time.sleep((deadline - now) / 1e9)
                    now = time.monotonic_ns()
                jitter_ns.append(abs(now - deadline))
            runtime.cycle = cycle + 1
    except KeyboardInterrupt:
        stopped_by = "interrupt"
    finally:
        if runtime.recording is not None:
            try:
                runtime.recording.writer.close()
                runtime.report.episodes.append(str(runtime.recording.path))
            except OSError:
                pass
            runtime.recording = None
        if owned_api is not None:
            owned_api.close()

    report = runtime.report
    report.cycles = runtime.cycle
    report.wall_time_s = (time.monotonic_ns() - started) / 1e9
    report.stopped_by = stopped_by
    report.bus_counters = dict(runtime.rig.bus.counters)
    report.read_failures = runtime.rig.read_failures
    if jitter_ns:
        report.jitter_mean_ms = sum(jitter_ns) / len(jitter_ns) / 1e6
        report.jitter_max_ms = max(jitter_ns) / 1e6
    return report


def _run_replay(config: SessionConfig) -> ExitReport:
    from dexmouse.episodes import replay

    if not config.episode:
        raise SessionError("replay mode needs an episode file")
    result = replay(config.episode)
    report = ExitReport(session_id=config.session_id())
    report.cycles = result.cycles
    report.stopped_by = "replay_complete"
    report.replay = {
        "ok": result.ok,
        "compared": result.compared,
        "divergences": len(result.divergences),
        "first": None
        if result.first is None
        else {"stream": result.first.stream, "t": result.first.t},
    }
    return report
