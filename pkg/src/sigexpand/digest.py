"""64-bit FNV-1a content digests.

The on-disk formats in this package identify their payloads with FNV-1a
(64-bit) over raw file bytes. FNV-1a was picked because it is trivially
reimplementable in any language: start from the offset basis, then for
every byte XOR it in and multiply by the prime, modulo 2**64.
"""

from __future__ import annotations

import os

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_CHUNK = 1 << 20


def fnv1a64(data: bytes, h: int = FNV64_OFFSET_BASIS) -> int:
    """FNV-1a of `data`, optionally continuing from a previous state `h`."""
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _MASK64
    return h


def fnv1a64_file(path: str | os.PathLike) -> int:
    """FNV-1a over the full content of a file, streamed in chunks."""
    h = FNV64_OFFSET_BASIS
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(_CHUNK)
            if not chunk:
                return h
            h = fnv1a64(chunk, h)


def digest_hex(value: int) -> str:
    """Render a 64-bit digest as a fixed-width lowercase hex string."""
    return f"{value:016x}"


def parse_digest(text: str) -> int:
    return int(text, 16)
