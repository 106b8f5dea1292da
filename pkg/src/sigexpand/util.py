"""Small shared helpers: deterministic rounding and atomic file writes."""

from __future__ import annotations

import math
import os


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves away from zero is not needed here:
    all call sites pass non-negative values, so halves round up."""
    return int(math.floor(x + 0.5))


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via temp file + rename so readers never observe partial files."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
