"""Register model for the virtual bus devices.

Each device exposes a flat little-endian control table. Reads and writes
must fall entirely inside defined registers; anything else is an
addressable error (reported on the wire via a STATUS error byte, never a
crash). ``present_*`` registers are device-owned and read-only from the
wire; the simulation backs them directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

STATUS_OK = 0x00
STATUS_ADDRESS_ERROR = 0x01


class RegisterAccessError(Exception):
    """Access outside the defined/writable register map."""


@dataclass(frozen=True)
class RegisterDef:
    name: str
    address: int
    size: int
    signed: bool = False
    wire_writable: bool = False


TORQUE_ENABLE = RegisterDef("torque_enable", 64, 1, wire_writable=True)
GOAL_CURRENT = RegisterDef("goal_current", 102, 2, signed=True, wire_writable=True)
GOAL_POSITION = RegisterDef("goal_position", 116, 4, signed=True, wire_writable=True)
PRESENT_CURRENT = RegisterDef("present_current", 126, 2, signed=True)
PRESENT_VELOCITY = RegisterDef("present_velocity", 128, 4, signed=True)
PRESENT_POSITION = RegisterDef("present_position", 132, 4, signed=True)

# Thumb-abduction magnetic encoder: a single raw angle register (0..4095).
RAW_ANGLE = RegisterDef("raw_angle", 12, 2)

ACTUATOR_TABLE: tuple[RegisterDef, ...] = (
    TORQUE_ENABLE,
    GOAL_CURRENT,
    GOAL_POSITION,
    PRESENT_CURRENT,
    PRESENT_VELOCITY,
    PRESENT_POSITION,
)
ENCODER_TABLE: tuple[RegisterDef, ...] = (RAW_ANGLE,)


class RegisterFile:
    """Byte-addressable storage with defined/writable masks."""

    def __init__(self, table: Iterable[RegisterDef]) -> None:
        defs = tuple(table)
        size = max(d.address + d.size for d in defs)
        self._store = bytearray(size)
        self._defined = bytearray(size)
        self._writable = bytearray(size)
        self._defs = {d.name: d for d in defs}
        for d in defs:
            for a in range(d.address, d.address + d.size):
                if self._defined[a]:
                    raise ValueError(f"overlapping register at address {a}")
                self._defined[a] = 1
                self._writable[a] = 1 if d.wire_writable else 0

    def _check_span(self, address: int, length: int, mask: bytearray) -> None:
        if length <= 0 or address < 0 or address + length > len(self._store):
            raise RegisterAccessError(f"span [{address}, {address + length}) out of table")
        if not all(mask[address : address + length]):
            raise RegisterAccessError(f"span [{address}, {address + length}) not addressable")

    def read(self, address: int, length: int) -> bytes:
        self._check_span(address, length, self._defined)
        return bytes(self._store[address : address + length])

    def write(self, address: int, data: bytes, via_wire: bool = True) -> None:
        mask = self._writable if via_wire else self._defined
        self._check_span(address, len(data), mask)
        self._store[address : address + len(data)] = data

    def get(self, name: str) -> int:
        d = self._defs[name]
        return int.from_bytes(self._store[d.address : d.address + d.size], "little", signed=d.signed)

    def set(self, name: str, value: int) -> None:
        """Device-side write (bypasses the wire-writable mask)."""
        d = self._defs[name]
        self.write(d.address, value.to_bytes(d.size, "little", signed=d.signed), via_wire=False)
