"""Turn frames plus a text context into per-patch correlation map files."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .encoders import load_encoder
from .mapio import PatchMap, write_patch_map


class ExtractionError(ValueError):
    """Raised for bad jobs: unreadable images, empty text, absurd patches."""


@dataclass
class ExtractionJob:
    """One extraction request: some frames, one text, one patch size.

    With a single input image, out names the map file to write. With
    several, out names a directory and each map is written there as
    <image stem>.corr.
    """

    images: list = field(default_factory=list)
    text: str = ""
    patch_size: int = 64
    model: str = "palette"
    out: str = "map.corr"

    def validate(self):
        if not self.images:
            raise ExtractionError("at least one input image is required")
        if not self.text.strip():
            raise ExtractionError("text must contain at least one word")
        if self.patch_size < 1:
            raise ExtractionError(f"patch_size must be >= 1, got {self.patch_size}")
        if len(self.images) > 1 and not os.path.isdir(self.out):
            raise ExtractionError(
                f"out must be an existing directory for {len(self.images)} images: {self.out}"
            )


def load_image(path) -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 RGB array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise ExtractionError(f"could not decode image {path}: {exc}") from exc


def correlation_map(image: np.ndarray, text: str, patch_size: int,
                    encoder) -> PatchMap:
    """Cosine similarity between the text and every patch of one frame.

    The grid floors the image dimensions, so trailing pixels that do not
    fill a whole patch are ignored.
    """
    height, width = image.shape[0], image.shape[1]
    if height < patch_size or width < patch_size:
        raise ExtractionError(
            f"image is {width}x{height}, smaller than one {patch_size}px patch"
        )
    text_vec = encoder.encode_text(text)
    feats = encoder.encode_patches(image, patch_size)
    rho = np.clip(feats @ text_vec, -1.0, 1.0)
    return PatchMap(feats.shape[0], feats.shape[1], patch_size, rho)


def output_path(job: ExtractionJob, image_path) -> str:
    if len(job.images) == 1:
        return job.out
    stem = os.path.splitext(os.path.basename(image_path))[0]
    return os.path.join(job.out, stem + ".corr")


def run_job(job: ExtractionJob) -> list:
    """Validate, encode, and write every map; returns the written paths."""
    job.validate()
    encoder = load_encoder(job.model)
    written = []
    for image_path in job.images:
        image = load_image(image_path)
        pmap = correlation_map(image, job.text, job.patch_size, encoder)
        target = output_path(job, image_path)
        write_patch_map(target, pmap)
        written.append(target)
    return written
