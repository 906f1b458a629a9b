"""Synthetic frames shared by the extractor tests.

Every image is drawn from a seeded generator, so the tests can assert
byte-level determinism end to end without shipping binary fixtures.
"""
import numpy as np
import pytest
from PIL import Image

# Hand-placed pixel box of the dog's head in dog_scene: the only region
# that is both brown and heavily textured. (left, top, right, bottom).
DOG_HEAD_BBOX = (272, 80, 400, 208)

DOG_QUESTION = "Is the dog erect-eared or floppy-eared?"


def dog_scene() -> np.ndarray:
    """A 448x448 test frame: grass, a smooth brown body, a furry head."""
    rng = np.random.default_rng(20240817)
    img = np.zeros((448, 448, 3))
    img[:, :] = (88, 140, 70)
    img += rng.normal(0.0, 3.0, img.shape)
    body = np.full((144, 224, 3), (122.0, 80.0, 48.0))
    body += rng.normal(0.0, 4.0, body.shape)
    img[256:400, 96:320] = body
    head = np.full((128, 128, 3), (139.0, 90.0, 43.0))
    head += rng.normal(0.0, 28.0, head.shape)
    img[80:208, 272:400] = head
    return np.clip(img, 0, 255).astype(np.uint8)


_BLOCK_COLORS = ((200, 40, 40), (40, 160, 60), (50, 90, 200), (230, 210, 60),
                 (120, 120, 120), (240, 240, 240), (25, 25, 25), (130, 85, 45))

# (height, width) per scene; mixes exact multiples of 64 with sizes that
# leave a truncated margin, down to a single-patch frame.
SCENE_SIZES = ((448, 448), (224, 224), (256, 320), (320, 256), (64, 64),
               (65, 130), (200, 136), (512, 256), (96, 160), (448, 336))


def synthetic_scene(seed: int, height: int, width: int) -> np.ndarray:
    """Blocks of assorted color and texture over a plain background."""
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width, 3))
    img[:, :] = _BLOCK_COLORS[seed % len(_BLOCK_COLORS)]
    for _ in range(6):
        top = int(rng.integers(0, max(1, height - 8)))
        left = int(rng.integers(0, max(1, width - 8)))
        h = min(int(rng.integers(8, height // 2 + 8)), height - top)
        w = min(int(rng.integers(8, width // 2 + 8)), width - left)
        color = _BLOCK_COLORS[int(rng.integers(0, len(_BLOCK_COLORS)))]
        block = np.full((h, w, 3), color, dtype=float)
        block += rng.normal(0.0, float(rng.integers(1, 30)), block.shape)
        img[top:top + h, left:left + w] = block
    return np.clip(img, 0, 255).astype(np.uint8)


def save_png(path, array: np.ndarray) -> str:
    Image.fromarray(array).save(path, format="PNG")
    return str(path)


@pytest.fixture(scope="session")
def dog_png(tmp_path_factory):
    path = tmp_path_factory.mktemp("dog") / "dog.png"
    return save_png(path, dog_scene())


@pytest.fixture(scope="session")
def scene_set(tmp_path_factory):
    """Ten PNG frames of assorted sizes as (path, height, width) rows."""
    root = tmp_path_factory.mktemp("scenes")
    rows = []
    for i, (height, width) in enumerate(SCENE_SIZES):
        path = root / f"scene{i:02d}.png"
        save_png(path, synthetic_scene(100 + i, height, width))
        rows.append((str(path), height, width))
    return rows
