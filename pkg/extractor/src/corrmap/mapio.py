"""Producer-side reader/writer for the binary per-patch correlation format.

A map file starts with a little-endian header: magic ``ARTC`` (4 bytes),
version u16, rows u16, cols u16, patch_size u16, reserved u16. The body is
rows*cols IEEE-754 float32 values in row-major order, one correlation in
[-1, 1] per patch. Consumers validate the same layout independently, so
anything this module writes must load unchanged on their side.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"ARTC"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHH")


class MapIOError(ValueError):
    """Raised for malformed map files or out-of-contract map data."""


@dataclass(frozen=True)
class PatchMap:
    """A rows x cols grid of per-patch correlations for one frame.

    values[r, c] belongs to the patch whose top-left pixel is
    (r * patch_size, c * patch_size).
    """

    rows: int
    cols: int
    patch_size: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.rows, self.cols):
            raise MapIOError(
                f"values shape {vals.shape} does not match grid ({self.rows}, {self.cols})"
            )
        if self.rows < 1 or self.cols < 1:
            raise MapIOError("a map needs at least one patch")
        if self.patch_size < 1:
            raise MapIOError(f"patch_size must be >= 1, got {self.patch_size}")
        if not np.all(np.isfinite(vals)):
            raise MapIOError("correlations must be finite")
        if vals.min() < -1.0 or vals.max() > 1.0:
            raise MapIOError(
                f"correlations outside [-1, 1]: min={vals.min()}, max={vals.max()}"
            )
        object.__setattr__(self, "values", vals)


def write_patch_map(path, pmap: PatchMap) -> None:
    """Write pmap to path in the shared binary format."""
    for name, value in (("rows", pmap.rows), ("cols", pmap.cols),
                        ("patch_size", pmap.patch_size)):
        if not 0 < value <= 0xFFFF:
            raise MapIOError(f"{name}={value} does not fit in u16")
    header = _HEADER.pack(MAGIC, VERSION, pmap.rows, pmap.cols, pmap.patch_size, 0)
    body = np.asarray(pmap.values, dtype="<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_patch_map(path) -> PatchMap:
    """Load a map file back, rejecting anything off-format."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise MapIOError(f"{path}: {exc.strerror or exc}") from exc
    if len(raw) < _HEADER.size:
        raise MapIOError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, rows, cols, patch_size, _reserved = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MapIOError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MapIOError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    expected = rows * cols * 4
    if len(body) != expected:
        raise MapIOError(
            f"{path}: body is {len(body)} bytes, expected {expected} for {rows}x{cols}"
        )
    values = np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)
    try:
        return PatchMap(rows, cols, patch_size, values)
    except MapIOError as exc:
        raise MapIOError(f"{path}: {exc}") from exc
