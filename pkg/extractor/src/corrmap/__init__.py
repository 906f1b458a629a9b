"""Text-image correlation map extraction for patch-level bit allocation."""

from .encoders import EMBED_DIM, ModelError, load_encoder
from .extract import ExtractionError, ExtractionJob, correlation_map, load_image, run_job
from .mapio import MapIOError, PatchMap, read_patch_map, write_patch_map
from .overlay import OverlayError, render_overlay, write_overlay

__all__ = [
    "EMBED_DIM",
    "ModelError",
    "load_encoder",
    "ExtractionError",
    "ExtractionJob",
    "correlation_map",
    "load_image",
    "run_job",
    "MapIOError",
    "PatchMap",
    "read_patch_map",
    "write_patch_map",
    "OverlayError",
    "render_overlay",
    "write_overlay",
]
