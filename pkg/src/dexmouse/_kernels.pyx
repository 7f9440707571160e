# cython: boundscheck=False, wraparound=False
"""Compiled hot kernel: CRC-16 (poly 0x8005, init 0, MSB-first) over byte buffers.

Semantically identical to the pure-Python implementation in
``dexmouse.wire.crc``; the bus codec checksums every byte that crosses the
simulated wire, which makes this the dominant inner loop of a session.
"""

from libc.stdint cimport uint16_t


cdef uint16_t[256] _TABLE


cdef void _build_table() noexcept:
    cdef int n, k
    cdef uint16_t c
    for n in range(256):
        c = <uint16_t> (n << 8)
        for k in range(8):
            if c & 0x8000:
                c = <uint16_t> ((c << 1) ^ 0x8005)
            else:
                c = <uint16_t> (c << 1)
        _TABLE[n] = c


_build_table()


def crc16(const unsigned char[:] data, unsigned int crc=0):
    """Return the CRC-16/0x8005 of ``data``, continuing from ``crc``."""
    cdef Py_ssize_t i, n = data.shape[0]
    cdef uint16_t c = <uint16_t> crc
    for i in range(n):
        c = <uint16_t> ((c << 8) ^ _TABLE[((c >> 8) ^ data[i]) & 0xFF])
    return c
