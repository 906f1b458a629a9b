"""Embedding backends that turn text and image patches into unit vectors.

Two backends live here. ``palette`` is a small deterministic encoder that
grounds a fixed vocabulary of color, texture, and scene words in pixel
statistics (hue shares, edge density, brightness); it needs no weights, no
network, and gives bit-stable output, which makes it the default for
pipelines that must be reproducible. Any other model id is treated as a
CLIP-family checkpoint and resolved through transformers, which requires
the weights to be cached locally or downloadable.

Both backends expose the same two calls: encode_text(text) -> (D,) unit
vector and encode_patches(image, patch_size) -> (rows, cols, D) unit
vectors, so the extraction code upstream does not care which one it got.
"""
from __future__ import annotations

import hashlib
import re

import numpy as np

EMBED_DIM = 64

_WORD_RE = re.compile(r"[a-z]+")


class ModelError(RuntimeError):
    """Raised when an embedding backend cannot be built or used."""


def _token_vector(token: str) -> np.ndarray:
    """Deterministic unit vector for a token, derived from its hash."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(EMBED_DIM)
    return vec / np.linalg.norm(vec)


_HUE_BUCKETS = ("red", "orange", "yellow", "green", "cyan", "blue",
                "purple", "magenta")
_ATTRIBUTES = _HUE_BUCKETS + ("brown", "gray", "white", "black",
                              "busy", "smooth", "bright", "dark")

# One anchor vector per visual attribute; text and pixels meet in this basis.
_ATTR_VECS = {name: _token_vector("attr:" + name) for name in _ATTRIBUTES}

# Words the palette backend understands, mapped to the attributes they imply.
# Everything else still contributes a deterministic hash vector, so unknown
# words act as reproducible noise rather than being dropped.
_VOCAB: dict = {w: ("gray" if w == "grey" else w,)
                for w in _HUE_BUCKETS + ("brown", "gray", "grey", "white", "black")}
_VOCAB.update({
    "dog": ("brown", "busy"),
    "puppy": ("brown", "busy"),
    "head": ("brown", "busy"),
    "ear": ("brown", "busy"),
    "ears": ("brown", "busy"),
    "eared": ("brown", "busy"),
    "fur": ("busy",),
    "furry": ("busy",),
    "grass": ("green",),
    "lawn": ("green",),
    "leaf": ("green", "busy"),
    "leaves": ("green", "busy"),
    "tree": ("green", "busy"),
    "sky": ("blue",),
    "water": ("blue", "smooth"),
    "sea": ("blue",),
    "sun": ("yellow", "bright"),
    "sand": ("yellow", "smooth"),
    "fire": ("red", "bright"),
    "snow": ("white", "bright"),
    "cloud": ("white",),
    "night": ("black", "dark"),
    "shadow": ("dark",),
    "road": ("gray", "smooth"),
    "wall": ("gray", "smooth"),
    "stone": ("gray",),
    "smooth": ("smooth",),
    "flat": ("smooth",),
    "busy": ("busy",),
    "textured": ("busy",),
    "cluttered": ("busy",),
    "bright": ("bright",),
    "dark": ("dark",),
})


def _rgb_to_hsv(rgb: np.ndarray):
    """Vectorized RGB [0,1] -> (hue degrees, saturation, value)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.zeros_like(v)
    is_r = (v == r) & (c > 0)
    is_g = (v == g) & (c > 0) & ~is_r
    is_b = (c > 0) & ~is_r & ~is_g
    h[is_r] = np.mod((g - b)[is_r] / safe_c[is_r], 6.0)
    h[is_g] = (b - r)[is_g] / safe_c[is_g] + 2.0
    h[is_b] = (r - g)[is_b] / safe_c[is_b] + 4.0
    return h * 60.0, s, v


def _bucket_shares(rgb: np.ndarray) -> dict:
    """Fraction of pixels falling into each color bucket.

    Achromatic rules run first (black, white, gray), then the brown carve-out
    for dark desaturated oranges, then plain hue binning. Shares sum to 1.
    """
    h, s, v = _rgb_to_hsv(rgb)
    unassigned = np.ones(v.shape, dtype=bool)
    shares = {}

    def take(name, mask):
        mask = mask & unassigned
        shares[name] = shares.get(name, 0.0) + float(mask.mean())
        unassigned[mask] = False

    take("black", v < 0.18)
    take("white", (s < 0.14) & (v > 0.82))
    take("gray", s < 0.14)
    take("brown", (h >= 15.0) & (h < 50.0) & (v < 0.70) & (s >= 0.20))
    edges = (15.0, 50.0, 70.0, 170.0, 200.0, 260.0, 290.0, 345.0)
    take("red", (h < edges[0]) | (h >= edges[-1]))
    for name, lo, hi in zip(_HUE_BUCKETS[1:], edges, edges[1:]):
        take(name, (h >= lo) & (h < hi))
    return shares


def _edge_level(gray: np.ndarray) -> float:
    """Mean absolute neighbor difference of the grayscale crop, 0..255."""
    dx = np.abs(np.diff(gray, axis=1))
    dy = np.abs(np.diff(gray, axis=0))
    total = dx.sum() + dy.sum()
    count = dx.size + dy.size
    return float(total / count) if count else 0.0


class PaletteEncoder:
    """Deterministic pixel-statistics encoder over a grounded vocabulary."""

    name = "palette"

    def encode_text(self, text: str) -> np.ndarray:
        tokens = _WORD_RE.findall(text.lower())
        if not tokens:
            raise ModelError("text contains no words to encode")
        total = np.zeros(EMBED_DIM)
        for token in tokens:
            attrs = _VOCAB.get(token)
            if attrs is None:
                total += _token_vector("word:" + token)
            else:
                for attr in attrs:
                    total += _ATTR_VECS[attr]
        norm = np.linalg.norm(total)
        if norm == 0.0:
            raise ModelError("text embedding collapsed to zero")
        return total / norm

    def encode_patches(self, image: np.ndarray, patch_size: int) -> np.ndarray:
        rows = image.shape[0] // patch_size
        cols = image.shape[1] // patch_size
        feats = np.empty((rows, cols, EMBED_DIM))
        for r in range(rows):
            for c in range(cols):
                crop = image[r * patch_size:(r + 1) * patch_size,
                             c * patch_size:(c + 1) * patch_size]
                feats[r, c] = self._encode_crop(crop)
        return feats

    def _encode_crop(self, crop: np.ndarray) -> np.ndarray:
        rgb = crop.astype(np.float64) / 255.0
        total = np.zeros(EMBED_DIM)
        for name, share in _bucket_shares(rgb).items():
            if share > 0.0:
                total += share * _ATTR_VECS[name]
        gray = rgb.mean(axis=-1) * 255.0
        busy = min(max((_edge_level(gray) - 8.0) / 14.0, 0.0), 1.0)
        total += busy * _ATTR_VECS["busy"]
        total += (1.0 - busy) * _ATTR_VECS["smooth"]
        mean_v = float(rgb.max(axis=-1).mean())
        bright = min(max((mean_v - 0.62) / 0.25, 0.0), 1.0)
        dark = min(max((0.38 - mean_v) / 0.25, 0.0), 1.0)
        total += bright * _ATTR_VECS["bright"]
        total += dark * _ATTR_VECS["dark"]
        return total / np.linalg.norm(total)


class ClipEncoder:
    """CLIP-family checkpoint wrapped to the same two-call interface.

    Loading happens eagerly in the constructor so a missing or unreachable
    checkpoint fails up front with a ModelError instead of midway through a
    batch of frames.
    """

    def __init__(self, model_id: str):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelError(
                f"model {model_id!r} needs torch and transformers: {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id)
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelError(
                f"could not load model {model_id!r}; weights must be cached "
                f"locally or downloadable ({exc})"
            ) from exc
        self._model.eval()
        self.name = model_id

    def encode_text(self, text: str) -> np.ndarray:
        import torch

        if not text.strip():
            raise ModelError("text contains no words to encode")
        inputs = self._processor(text=[text], return_tensors="pt", padding=True)
        with torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        vec = feats[0].cpu().numpy().astype(np.float64)
        return vec / np.linalg.norm(vec)

    def encode_patches(self, image: np.ndarray, patch_size: int) -> np.ndarray:
        import torch
        from PIL import Image

        rows = image.shape[0] // patch_size
        cols = image.shape[1] // patch_size
        crops = [
            Image.fromarray(image[r * patch_size:(r + 1) * patch_size,
                                  c * patch_size:(c + 1) * patch_size])
            for r in range(rows) for c in range(cols)
        ]
        inputs = self._processor(images=crops, return_tensors="pt")
        with torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        arr = feats.cpu().numpy().astype(np.float64)
        arr /= np.linalg.norm(arr, axis=1, keepdims=True)
        return arr.reshape(rows, cols, -1)


def load_encoder(model_id: str = "palette"):
    """Build the backend for a model id; "palette" is the builtin one."""
    if model_id == "palette":
        return PaletteEncoder()
    return ClipEncoder(model_id)
