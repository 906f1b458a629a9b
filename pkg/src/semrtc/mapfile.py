"""Binary correlation-map file format shared between the simulator and map producers.

Layout (little-endian): magic ``ARTC`` (4 bytes), version u16, rows u16,
cols u16, patch_size u16, reserved u16, then rows*cols IEEE-754 float32
correlation values in row-major order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"ARTC"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHH")


class MapFormatError(ValueError):
    """Raised when a correlation-map file violates the format contract."""


@dataclass(frozen=True)
class CorrelationMap:
    """Per-patch semantic correlation grid for one frame/context.

    values[r, c] is the correlation of the patch at grid row r, column c,
    each in [-1, 1]. patch_size is the patch edge length in pixels.
    """

    rows: int
    cols: int
    patch_size: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.rows, self.cols):
            raise MapFormatError(
                f"values shape {vals.shape} != declared ({self.rows}, {self.cols})"
            )
        if self.rows < 1 or self.cols < 1:
            raise MapFormatError("map must contain at least one patch")
        if self.patch_size < 1:
            raise MapFormatError(f"patch_size must be >= 1, got {self.patch_size}")
        if not np.all(np.isfinite(vals)):
            raise MapFormatError("correlation values must be finite")
        if vals.min() < -1.0 or vals.max() > 1.0:
            raise MapFormatError(
                f"correlation values outside [-1, 1]: min={vals.min()}, max={vals.max()}"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, rho: float, rows: int = 1, cols: int = 1, patch_size: int = 64):
        return cls(rows, cols, patch_size, np.full((rows, cols), float(rho)))


def write_map(path, cmap: CorrelationMap) -> None:
    """Serialize a CorrelationMap to the binary wire format."""
    for name, value in (("rows", cmap.rows), ("cols", cmap.cols),
                        ("patch_size", cmap.patch_size)):
        if not 0 < value <= 0xFFFF:
            raise MapFormatError(f"{name}={value} does not fit in u16")
    header = _HEADER.pack(MAGIC, VERSION, cmap.rows, cmap.cols, cmap.patch_size, 0)
    body = np.asarray(cmap.values, dtype="<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_map(path) -> CorrelationMap:
    """Load and validate a correlation-map file.

    Rejects wrong magic/version, truncated bodies, and any value outside
    [-1, 1].
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise MapFormatError(f"{path}: {exc.strerror or exc}") from exc
    if len(raw) < _HEADER.size:
        raise MapFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, rows, cols, patch_size, _reserved = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MapFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MapFormatError(f"{path}: unsupported version {version}")
    expected = rows * cols * 4
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise MapFormatError(
            f"{path}: body is {len(body)} bytes, expected {expected} for {rows}x{cols}"
        )
    values = np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)
    try:
        return CorrelationMap(rows, cols, patch_size, values)
    except MapFormatError as exc:
        raise MapFormatError(f"{path}: {exc}") from exc
