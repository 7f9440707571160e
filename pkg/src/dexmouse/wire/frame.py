"""Bit-exact frame codec for the actuator bus.

Serialized layout::

    header[FF FF FD 00] | id(u8) | length(u16 LE) | instruction(u8) | params | crc(u16 LE)

``length`` counts instruction + params + crc, i.e. ``1 + len(params) + 2``.
The CRC (poly 0x8005, init 0, MSB-first) covers every byte from the first
header byte through the last param byte.

Params are not byte-stuffed: a header sequence may legitimately appear
inside params, and a CRC-valid parse always wins over resynchronization.
The decoder is incremental — bytes that could still complete a frame are
kept as residue for the next feed; everything else is consumed, with
skipped garbage reported through RESYNC diagnostics.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from dexmouse.wire.crc import crc16

HEADER = b"\xff\xff\xfd\x00"
BROADCAST_ID = 0xFE
MAX_ID = 252
MAX_PARAMS = 1024
MAX_LENGTH = 1 + MAX_PARAMS + 2
_MIN_FRAME = 7 + 3  # header + id + length field + (instruction, crc)


class Instruction(enum.IntEnum):
    PING = 0x01
    READ = 0x02
    WRITE = 0x03
    STATUS = 0x55
    SYNC_READ = 0x82
    SYNC_WRITE = 0x83


class EncodeError(ValueError):
    """Frame violates the wire layout and cannot be serialized."""


@dataclass(frozen=True)
class Frame:
    """One bus frame. ``crc`` is populated by the decoder and ignored by
    the encoder (always recomputed from content); it does not participate
    in equality."""

    id: int
    instruction: int
    params: bytes = b""
    crc: int | None = field(default=None, compare=False)


class DiagnosticKind(enum.Enum):
    CRC_MISMATCH = "crc_mismatch"
    RESYNC = "resync"
    BAD_LENGTH = "bad_length"


@dataclass(frozen=True)
class DecodeDiagnostic:
    kind: DiagnosticKind
    offset: int  # stream offset where the problem starts
    skipped: int = 0  # RESYNC: number of garbage bytes dropped
    frame_id: int | None = None
    expected_crc: int | None = None
    actual_crc: int | None = None
    length: int | None = None  # BAD_LENGTH: the implausible length field


@dataclass(frozen=True)
class DecodeResult:
    frames: list[Frame]
    diagnostics: list[DecodeDiagnostic]
    consumed: int  # bytes consumed; len(input) - consumed bytes remain as residue


def encode(frame: Frame) -> bytes:
    """Serialize *frame*, recomputing the CRC from content."""
    params = frame.params
    if len(params) > MAX_PARAMS:
        raise EncodeError(f"params too long: {len(params)} > {MAX_PARAMS}")
    if not (0 <= frame.id <= MAX_ID or frame.id == BROADCAST_ID):
        raise EncodeError(f"invalid frame id: {frame.id}")
    if not 0 <= frame.instruction <= 0xFF:
        raise EncodeError(f"invalid instruction byte: {frame.instruction}")
    body = (
        HEADER
        + struct.pack("<BHB", frame.id, 1 + len(params) + 2, frame.instruction)
        + params
    )
    return body + crc16(body).to_bytes(2, "little")


def parse_single(data: bytes) -> Frame | None:
    """Strict parse of a buffer holding exactly one well-formed frame.

    Fast path for the simulated transport, where each response is a single
    frame that is either intact or bit-corrupted. Returns None on any
    deviation; use :func:`decode` for arbitrary streams.
    """
    if len(data) < _MIN_FRAME or data[:4] != HEADER:
        return None
    length = data[5] | (data[6] << 8)
    if 7 + length != len(data):
        return None
    stored = data[-2] | (data[-1] << 8)
    if crc16(memoryview(data)[:-2]) != stored:
        return None
    return Frame(id=data[4], instruction=data[7], params=bytes(data[8:-2]), crc=stored)


def _header_prefix_len(buf: bytearray, start: int) -> int:
    """Length of the longest proper header prefix ending the buffer."""
    avail = len(buf) - start
    for k in (3, 2, 1):
        if avail >= k and buf[-k:] == HEADER[:k]:
            return k
    return 0


class StreamDecoder:
    """Incremental decoder: feed byte chunks, collect frames and diagnostics.

    Progress guarantee: every fed byte is eventually either consumed
    (frame, diagnostic, or counted garbage) or held as residue that could
    still complete a frame.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self._base = 0  # stream offset of _buf[0]
        self._skipped = 0  # garbage bytes awaiting a RESYNC diagnostic
        self._skip_start = 0

    @property
    def pending(self) -> bytes:
        """Residue: bytes held back as a potential partial frame."""
        return bytes(self._buf)

    def feed(self, data: bytes) -> tuple[list[Frame], list[DecodeDiagnostic]]:
        self._buf.extend(data)
        frames: list[Frame] = []
        diagnostics: list[DecodeDiagnostic] = []
        self._scan(frames, diagnostics)
        return frames, diagnostics

    def finalize(self) -> list[DecodeDiagnostic]:
        """Report garbage still pending a diagnostic (stream is not closed:
        residue stays, and feeding may continue)."""
        diagnostics: list[DecodeDiagnostic] = []
        self._flush_skip(diagnostics)
        return diagnostics

    def _flush_skip(self, diagnostics: list[DecodeDiagnostic]) -> None:
        if self._skipped:
            diagnostics.append(
                DecodeDiagnostic(
                    DiagnosticKind.RESYNC,
                    offset=self._skip_start,
                    skipped=self._skipped,
                )
            )
            self._skipped = 0

    def _note_skip(self, pos: int, count: int) -> None:
        if count:
            if self._skipped == 0:
                self._skip_start = self._base + pos
            self._skipped += count

    def _scan(self, frames: list[Frame], diagnostics: list[DecodeDiagnostic]) -> None:
        buf = self._buf
        pos = 0
        while True:
            i = buf.find(HEADER, pos)
            if i < 0:
                keep = _header_prefix_len(buf, pos)
                cut = len(buf) - keep
                self._note_skip(pos, cut - pos)
                pos = cut
                break
            self._note_skip(pos, i - pos)
            if len(buf) - i < 7:
                pos = i  # partial: header present, id/length not yet
                break
            length = buf[i + 5] | (buf[i + 6] << 8)
            if not 3 <= length <= MAX_LENGTH:
                # Cannot be a frame; drop the 4 header bytes and rescan.
                # (No real header can overlap them: the next candidate
                # start is at least i + 4.)
                self._flush_skip(diagnostics)
                diagnostics.append(
                    DecodeDiagnostic(
                        DiagnosticKind.BAD_LENGTH,
                        offset=self._base + i,
                        length=length,
                    )
                )
                pos = i + 4
                continue
            total = 7 + length
            if len(buf) - i < total:
                pos = i  # partial frame; wait for more bytes
                break
            self._flush_skip(diagnostics)
            body_end = i + total - 2
            computed = crc16(memoryview(buf)[i:body_end])
            stored = buf[body_end] | (buf[body_end + 1] << 8)
            if computed == stored:
                frames.append(
                    Frame(
                        id=buf[i + 4],
                        instruction=buf[i + 7],
                        params=bytes(buf[i + 8 : body_end]),
                        crc=stored,
                    )
                )
            else:
                # Framing was plausible (header + sane length), so charge
                # the whole span to this frame rather than rescanning
                # inside it.
                diagnostics.append(
                    DecodeDiagnostic(
                        DiagnosticKind.CRC_MISMATCH,
                        offset=self._base + i,
                        frame_id=buf[i + 4],
                        expected_crc=computed,
                        actual_crc=stored,
                    )
                )
            pos = i + total
        if pos:
            del buf[:pos]
            self._base += pos


def decode(data: bytes) -> DecodeResult:
    """One-shot decode of *data*: frames, diagnostics, and consumed count.

    ``consumed + len(residue) == len(data)`` always holds; the residue is
    whatever suffix could still grow into a valid frame.
    """
    decoder = StreamDecoder()
    frames, diagnostics = decoder.feed(data)
    diagnostics.extend(decoder.finalize())
    return DecodeResult(frames, diagnostics, len(data) - len(decoder.pending))
