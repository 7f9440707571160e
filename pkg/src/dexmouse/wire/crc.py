"""CRC-16 used by the bus framing: polynomial 0x8005, init 0x0000, MSB-first.

Two interchangeable backends: the compiled kernel ``dexmouse._kernels``
(built from Cython at install time) and a table-driven pure-Python
fallback. Selection happens once at import; set ``DEXMOUSE_PURE=1`` to
force the fallback, e.g. for benchmarking the two against each other.
"""

from __future__ import annotations

import os

POLYNOMIAL = 0x8005
INITIAL = 0x0000


def _build_table() -> list[int]:
    table = []
    for n in range(256):
        c = n << 8
        for _ in range(8):
            c = ((c << 1) ^ POLYNOMIAL) if c & 0x8000 else (c << 1)
        table.append(c & 0xFFFF)
    return table


_TABLE = _build_table()


def crc16_pure(data: bytes, crc: int = INITIAL) -> int:
    """Pure-Python CRC-16/0x8005 of *data*, continuing from *crc*."""
    table = _TABLE
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[((crc >> 8) ^ b) & 0xFF]
    return crc


if os.environ.get("DEXMOUSE_PURE"):
    _kernels = None
else:
    try:
        from dexmouse import _kernels  # type: ignore[attr-defined]
    except ImportError:
        _kernels = None

if _kernels is not None:
    crc16 = _kernels.crc16
else:
    crc16 = crc16_pure


def crc_backend() -> str:
    """Name of the active CRC backend ("compiled" or "pure")."""
    return "compiled" if _kernels is not None else "pure"
