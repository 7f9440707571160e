"""Simulated half-duplex multi-drop bus hosting the virtual devices.

Every transaction round-trips through real wire bytes: the request is
encoded, optionally corrupted, decoded on the device side, handled, and
each response travels back the same way. With ``corruption_rate == 0``
and a fixed seed the whole exchange is bit-deterministic.

Half-duplex means exactly one transaction in flight; callers from
multiple contexts must serialize externally (the session loop is the
single owner in practice).
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

from dexmouse.wire.frame import (
    BROADCAST_ID,
    Frame,
    Instruction,
    encode,
    parse_single,
)
from dexmouse.wire.registers import (
    ACTUATOR_TABLE,
    ENCODER_TABLE,
    STATUS_ADDRESS_ERROR,
    STATUS_OK,
    RegisterAccessError,
    RegisterFile,
)


@dataclass
class BusConfig:
    latency_us: int = 50  # per direction
    corruption_rate: float = 0.0  # per-byte bit-flip probability (test-only)
    seed: int = 0
    response_timeout_us: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ValueError("corruption_rate must be in [0, 1]")
        if self.latency_us < 0 or self.response_timeout_us <= 0:
            raise ValueError("latency budget must be non-negative")


class BusProtocolError(Exception):
    """Host violated bus usage (overlapping transaction, bad instruction)."""


class BusTimeoutError(Exception):
    """An addressed device produced no (valid) response in time."""

    def __init__(self, message: str, elapsed_us: int, partial: list[Frame]):
        super().__init__(message)
        self.elapsed_us = elapsed_us
        self.partial = partial


class VirtualDevice:
    """A bus drop with a register file."""

    def __init__(self, device_id: int, table) -> None:
        self.id = device_id
        self.registers = RegisterFile(table)

    def handle_read(self, address: int, length: int) -> tuple[int, bytes]:
        try:
            return STATUS_OK, self.registers.read(address, length)
        except RegisterAccessError:
            return STATUS_ADDRESS_ERROR, b""

    def handle_write(self, address: int, data: bytes) -> int:
        try:
            self.registers.write(address, data)
            return STATUS_OK
        except RegisterAccessError:
            return STATUS_ADDRESS_ERROR


class VirtualActuator(VirtualDevice):
    """Smart servo model: position encoder in, current/position goals out."""

    def __init__(self, device_id: int) -> None:
        super().__init__(device_id, ACTUATOR_TABLE)

    def set_present_position(self, ticks: int) -> None:
        self.registers.set("present_position", ticks)

    @property
    def goal_current(self) -> int:
        return self.registers.get("goal_current")

    @property
    def goal_position(self) -> int:
        return self.registers.get("goal_position")


class VirtualEncoder(VirtualDevice):
    """Non-contact magnetic angle encoder (12-bit) for the thumb AA joint."""

    def __init__(self, device_id: int) -> None:
        super().__init__(device_id, ENCODER_TABLE)

    def set_raw_angle(self, raw: int) -> None:
        if not 0 <= raw <= 4095:
            raise ValueError(f"raw angle out of range: {raw}")
        self.registers.set("raw_angle", raw)


class SimulatedBus:
    def __init__(self, config: BusConfig | None = None) -> None:
        self.config = config or BusConfig()
        self.devices: dict[int, VirtualDevice] = {}
        self.virtual_time_us = 0
        self.counters = {
            "transactions": 0,
            "requests_rejected": 0,  # device-side CRC rejects
            "responses_rejected": 0,  # host-side CRC rejects
            "timeouts": 0,
        }
        self._rng = random.Random(self.config.seed)
        self._in_transaction = False

    def attach(self, device: VirtualDevice) -> None:
        if device.id in self.devices:
            raise ValueError(f"duplicate device id {device.id}")
        self.devices[device.id] = device

    def _maybe_corrupt(self, raw: bytes) -> bytes:
        rate = self.config.corruption_rate
        if rate <= 0.0:
            return raw
        rng = self._rng
        out = bytearray(raw)
        for i in range(len(out)):
            if rng.random() < rate:
                out[i] ^= 1 << rng.randrange(8)
        return bytes(out)

    def transact(self, request: Frame) -> list[Frame]:
        """Run one half-duplex transaction; returns host-validated STATUS
        frames in device order. Raises BusTimeoutError if any addressed
        device fails to answer (absent, or its traffic was corrupted)."""
        if self._in_transaction:
            raise BusProtocolError("overlapping transaction on half-duplex bus")
        self._in_transaction = True
        try:
            return self._transact(request)
        finally:
            self._in_transaction = False

    def _transact(self, request: Frame) -> list[Frame]:
        self.counters["transactions"] += 1
        cfg = self.config
        raw = self._maybe_corrupt(encode(request))
        self.virtual_time_us += cfg.latency_us

        heard = parse_single(raw)
        if heard is None:
            self.counters["requests_rejected"] += 1
            responders: list[VirtualDevice] = []
            expected = 0 if request.instruction == Instruction.SYNC_WRITE else 1
        else:
            responders, expected = self._dispatch(heard)

        received: list[Frame] = []
        missing = 0
        for device in responders:
            status = self._respond(device, heard)
            raw_resp = self._maybe_corrupt(encode(status))
            self.virtual_time_us += cfg.latency_us
            frame = parse_single(raw_resp)
            if frame is None:
                self.counters["responses_rejected"] += 1
                missing += 1
            else:
                received.append(frame)

        missing += expected - len(responders)
        if missing > 0:
            self.virtual_time_us += cfg.response_timeout_us
            self.counters["timeouts"] += 1
            raise BusTimeoutError(
                f"{missing} of {expected} expected responses missing",
                elapsed_us=self.virtual_time_us,
                partial=received,
            )
        return received

    def _dispatch(self, request: Frame) -> tuple[list[VirtualDevice], int]:
        """Resolve responders; performs SYNC_WRITE/WRITE side effects."""
        instruction = request.instruction
        if instruction == Instruction.STATUS:
            raise BusProtocolError("host cannot emit STATUS frames")

        if instruction == Instruction.SYNC_WRITE:
            if request.id != BROADCAST_ID:
                raise BusProtocolError("SYNC_WRITE must be broadcast")
            address, length = struct.unpack_from("<HH", request.params)
            stride = 1 + length
            blob = request.params[4:]
            if len(blob) % stride:
                raise BusProtocolError("malformed SYNC_WRITE parameter block")
            for off in range(0, len(blob), stride):
                device = self.devices.get(blob[off])
                if device is not None:
                    device.handle_write(address, bytes(blob[off + 1 : off + stride]))
            return [], 0

        if instruction == Instruction.SYNC_READ:
            if request.id != BROADCAST_ID:
                raise BusProtocolError("SYNC_READ must be broadcast")
            ids = sorted(request.params[4:])
            devices = [self.devices[i] for i in ids if i in self.devices]
            return devices, len(ids)

        if request.id == BROADCAST_ID:
            if instruction == Instruction.PING:
                devices = [self.devices[i] for i in sorted(self.devices)]
                return devices, len(devices)
            if instruction == Instruction.WRITE:
                address = struct.unpack_from("<H", request.params)[0]
                for i in sorted(self.devices):
                    self.devices[i].handle_write(address, bytes(request.params[2:]))
                return [], 0
            raise BusProtocolError(f"instruction 0x{instruction:02x} cannot be broadcast")

        device = self.devices.get(request.id)
        return ([device] if device is not None else []), 1

    def _respond(self, device: VirtualDevice, request: Frame) -> Frame:
        instruction = request.instruction
        if instruction == Instruction.PING:
            err, payload = STATUS_OK, b""
        elif instruction == Instruction.READ:
            address, length = struct.unpack_from("<HH", request.params)
            err, payload = device.handle_read(address, length)
        elif instruction == Instruction.SYNC_READ:
            address, length = struct.unpack_from("<HH", request.params)
            err, payload = device.handle_read(address, length)
        elif instruction == Instruction.WRITE:
            address = struct.unpack_from("<H", request.params)[0]
            err, payload = device.handle_write(address, bytes(request.params[2:])), b""
        else:
            err, payload = STATUS_ADDRESS_ERROR, b""
        return Frame(
            id=device.id,
            instruction=Instruction.STATUS,
            params=bytes([err]) + payload,
        )
