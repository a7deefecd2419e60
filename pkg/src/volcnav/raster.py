"""Shared binary raster format for terrain and planner field snapshots.

Layout: 24-byte little-endian header (magic ``VRAS``, width, height,
resolution, origin east, origin north) followed by row-major float32 cells.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"VRAS"
_HEADER = struct.Struct("<4sIIfff")

assert _HEADER.size == 24


class RasterFormatError(ValueError):
    pass


def encode_raster(grid: np.ndarray, resolution: float, origin=(0.0, 0.0)) -> bytes:
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 2:
        raise RasterFormatError("raster grid must be 2-D")
    h, w = grid.shape
    header = _HEADER.pack(MAGIC, w, h, float(resolution), float(origin[0]), float(origin[1]))
    return header + grid.tobytes(order="C")


def decode_raster(blob: bytes):
    """Return (grid, resolution, origin) from an encoded raster."""
    if len(blob) < _HEADER.size:
        raise RasterFormatError("raster blob shorter than header")
    magic, w, h, res, oe, on = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise RasterFormatError(f"bad raster magic {magic!r}")
    expected = _HEADER.size + 4 * w * h
    if len(blob) != expected:
        raise RasterFormatError(f"raster payload size {len(blob)} != expected {expected}")
    grid = np.frombuffer(blob, dtype=np.float32, offset=_HEADER.size).reshape(h, w).copy()
    return grid, res, (oe, on)


def write_raster(path, grid, resolution, origin=(0.0, 0.0)):
    Path(path).write_bytes(encode_raster(grid, resolution, origin))


def read_raster(path):
    return decode_raster(Path(path).read_bytes())
