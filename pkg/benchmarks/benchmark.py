#!/usr/bin/env python3
"""Compare the compiled CRC kernel against the pure-Python fallback.

The backend is chosen once at import, so this script measures the
current process and then re-runs itself in a child with DEXMOUSE_PURE=1
to collect the fallback numbers. Run from the repo root:

    python3 benchmarks/benchmark.py
"""

from __future__ import annotations

import json
import os
import random
import subprocess
import sys
import time

from dexmouse.wire.crc import crc16, crc_backend
from dexmouse.wire.frame import Frame, Instruction, decode, encode

WORKLOADS = [
    ("crc 16 B (status frame)", 16, 200_000),
    ("crc 256 B (sync burst)", 256, 50_000),
    ("crc 64 kB (bulk)", 65_536, 500),
]


def _measure(fn, loops: int) -> float:
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        fn(loops)
        best = min(best, time.perf_counter() - start)
    return best


def run_suite() -> dict:
    rng = random.Random(1)
    results = {}
    for name, size, loops in WORKLOADS:
        blob = rng.randbytes(size)

        def work(n: int, blob=blob) -> None:
            for _ in range(n):
                crc16(blob)

        elapsed = _measure(work, loops)
        results[name] = (size * loops) / elapsed / 1e6  # MB/s

    stream = b"".join(
        encode(Frame(id=1 + i % 5, instruction=Instruction.STATUS, params=rng.randbytes(9)))
        for i in range(5_000)
    )

    def work_decode(n: int) -> None:
        for _ in range(n):
            decode(stream)

    elapsed = _measure(work_decode, 20)
    results["decode (frames/s)"] = 5_000 * 20 / elapsed / 1e6  # Mframes/s
    return results


def main() -> None:
    if "--json" in sys.argv:
        print(json.dumps({"backend": crc_backend(), "results": run_suite()}))
        return

    if crc_backend() != "compiled":
        print("compiled kernel not available; showing pure backend only", file=sys.stderr)

    mine = run_suite()
    env = dict(os.environ, DEXMOUSE_PURE="1")
    out = subprocess.run(
        [sys.executable, __file__, "--json"], env=env, capture_output=True, text=True, check=True
    )
    pure = json.loads(out.stdout)["results"]

    width = max(len(name) for name in mine)
    print(f"{'workload':<{width}}  {crc_backend():>14}  {'pure':>14}  speedup")
    for name, value in mine.items():
        unit = "Mf/s" if "frames" in name else "MB/s"
        ratio = value / pure[name]
        print(
            f"{name:<{width}}  {value:9.1f} {unit}  {pure[name]:9.1f} {unit}  {ratio:6.1f}x"
        )


if __name__ == "__main__":
    main()
