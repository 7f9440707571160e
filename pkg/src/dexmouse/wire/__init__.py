"""Actuator-bus wire format and simulated half-duplex transport."""

from dexmouse.wire.bus import (
    BusConfig,
    BusTimeoutError,
    SimulatedBus,
    VirtualActuator,
    VirtualEncoder,
)
from dexmouse.wire.crc import crc16, crc_backend
from dexmouse.wire.frame import (
    BROADCAST_ID,
    DecodeDiagnostic,
    DecodeResult,
    DiagnosticKind,
    EncodeError,
    Frame,
    Instruction,
    StreamDecoder,
    decode,
    encode,
)

__all__ = [
    "BROADCAST_ID",
    "BusConfig",
    "BusTimeoutError",
    "DecodeDiagnostic",
    "DecodeResult",
    "DiagnosticKind",
    "EncodeError",
    "Frame",
    "Instruction",
    "SimulatedBus",
    "StreamDecoder",
    "VirtualActuator",
    "VirtualEncoder",
    "crc16",
    "crc_backend",
    "decode",
    "encode",
]
