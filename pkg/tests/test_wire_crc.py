"""The shipped CRC (table-driven, optionally compiled) against the
bit-by-bit reference in crc_reference.py, plus backend selection."""

import os
import random
import subprocess
import sys

from crc_reference import crc16_bitwise

from dexmouse.wire import crc
from dexmouse.wire.crc import crc16, crc16_pure

# Frozen from crc_reference.py (see its __main__ block).
GOLDEN = [
    (b"123456789", 0xFEE8),  # the published check value for this CRC variant
    (bytes.fromhex("ff ff fd 00 01 03 00 01"), 0x4E19),
    (bytes.fromhex("ff ff fd 00 01 07 00 02 84 00 04 00"), 0x151D),
    (b"", 0x0000),
    (b"\x00", 0x0000),
    (b"\xff" * 16, 0x020E),
]


def test_golden_vectors():
    for data, expect in GOLDEN:
        assert crc16(data) == expect, data.hex()
        assert crc16_pure(data) == expect, data.hex()
        assert crc16_bitwise(data) == expect, data.hex()


def test_backends_agree_on_random_data():
    rng = random.Random(0xC8C)
    for _ in range(200):
        data = rng.randbytes(rng.randrange(0, 300))
        expect = crc16_bitwise(data)
        assert crc16(data) == expect
        assert crc16_pure(data) == expect


def test_incremental_equals_one_shot():
    rng = random.Random(7)
    data = rng.randbytes(1000)
    for split in (0, 1, 137, 999, 1000):
        partial = crc16(data[:split])
        assert crc16(data[split:], partial) == crc16(data)


def test_single_bit_flips_always_detected():
    data = bytes.fromhex("ff ff fd 00 01 07 00 02 84 00 04 00")
    base = crc16(data)
    for i in range(len(data)):
        for bit in range(8):
            flipped = bytearray(data)
            flipped[i] ^= 1 << bit
            assert crc16(bytes(flipped)) != base


def test_pure_env_forces_fallback():
    probe = (
        "from dexmouse.wire.crc import crc_backend, crc16; "
        "print(crc_backend(), crc16(b'123456789'))"
    )
    out = subprocess.run(
        [sys.executable, "-c", probe],
        env={**os.environ, "DEXMOUSE_PURE": "1"},
        capture_output=True,
        text=True,
        check=True,
    ).stdout.split()
    assert out == ["pure", str(0xFEE8)]


def test_compiled_backend_present_unless_forced_off():
    # This build compiles the kernel; only the env override should disable it.
    if os.environ.get("DEXMOUSE_PURE"):
        assert crc.crc_backend() == "pure"
    else:
        assert crc.crc_backend() == "compiled"
