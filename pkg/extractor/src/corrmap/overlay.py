"""Render a correlation map as a translucent heat layer over its frame.

The coloring is display-only: values are min-max normalized per frame so the
full gradient is always used, which makes relative structure visible but
means color is not comparable across frames. The map files themselves keep
the raw correlations.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

from .extract import load_image
from .mapio import PatchMap, read_patch_map

HEAT_ALPHA = 0.45
_COLD = np.array([16.0, 32.0, 160.0])
_HOT = np.array([255.0, 48.0, 16.0])


class OverlayError(ValueError):
    """Raised when a map and an image cannot be composited."""


def render_overlay(image: np.ndarray, pmap: PatchMap) -> np.ndarray:
    """Blend per-patch heat colors into a copy of the frame."""
    height, width = image.shape[0], image.shape[1]
    grid_rows = height // pmap.patch_size
    grid_cols = width // pmap.patch_size
    if (grid_rows, grid_cols) != (pmap.rows, pmap.cols):
        raise OverlayError(
            f"map grid {pmap.rows}x{pmap.cols} at {pmap.patch_size}px does not "
            f"match image {width}x{height} (its grid is {grid_rows}x{grid_cols})"
        )
    lo = pmap.values.min()
    hi = pmap.values.max()
    if hi > lo:
        t = (pmap.values - lo) / (hi - lo)
    else:
        t = np.full((pmap.rows, pmap.cols), 0.5)
    out = image.astype(np.float64).copy()
    size = pmap.patch_size
    for r in range(pmap.rows):
        for c in range(pmap.cols):
            heat = _COLD + t[r, c] * (_HOT - _COLD)
            cell = out[r * size:(r + 1) * size, c * size:(c + 1) * size]
            cell *= 1.0 - HEAT_ALPHA
            cell += HEAT_ALPHA * heat
    return np.clip(out + 0.5, 0.0, 255.0).astype(np.uint8)


def write_overlay(map_path, image_path, out_path) -> None:
    """Load both inputs, composite, and save a PNG."""
    pmap = read_patch_map(map_path)
    image = load_image(image_path)
    rendered = render_overlay(image, pmap)
    Image.fromarray(rendered).save(out_path, format="PNG")
