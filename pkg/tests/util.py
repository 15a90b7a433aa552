"""Shared test helpers: a watchdog timer and a tiny deterministic PNG writer."""
from __future__ import annotations

import signal
import struct
import zlib
from contextlib import contextmanager


@contextmanager
def time_limit(seconds: float):
    """Raise TimeoutError if the body runs longer than `seconds` (main thread only)."""

    def handler(signum, frame):
        raise TimeoutError(f"exceeded {seconds}s")

    old = signal.signal(signal.SIGALRM, handler)
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def make_png(rgb: tuple[int, int, int], marker: int = 0, size: int = 8) -> bytes:
    """A valid size x size RGB PNG; `marker` perturbs one pixel so hashes differ."""
    rows = bytearray()
    for y in range(size):
        rows.append(0)  # no filter
        for x in range(size):
            if y * size + x == marker % (size * size):
                rows.extend(((rgb[0] + 61) % 256, (rgb[1] + 73) % 256, (rgb[2] + 89) % 256))
            else:
                rows.extend(rgb)
    header = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", header)
        + _chunk(b"IDAT", zlib.compress(bytes(rows), 9))
        + _chunk(b"IEND", b"")
    )
