"""Unit tests for the palette backend and backend selection."""
import numpy as np
import pytest

from corrmap import encoders
from corrmap.encoders import (EMBED_DIM, ModelError, PaletteEncoder,
                              load_encoder)


def flat_crop(color, size=64) -> np.ndarray:
    return np.full((size, size, 3), color, dtype=np.uint8)


def noisy_crop(color, sigma, seed=5, size=64) -> np.ndarray:
    rng = np.random.default_rng(seed)
    arr = np.full((size, size, 3), color, dtype=float)
    arr += rng.normal(0.0, sigma, arr.shape)
    return np.clip(arr, 0, 255).astype(np.uint8)


def cos(a, b) -> float:
    return float(np.dot(a, b))


class TestTokenVectors:
    def test_unit_norm(self):
        vec = encoders._token_vector("anything")
        assert np.linalg.norm(vec) == pytest.approx(1.0)
        assert vec.shape == (EMBED_DIM,)

    def test_repeatable(self):
        first = encoders._token_vector("dog")
        second = encoders._token_vector("dog")
        assert np.array_equal(first, second), "same token, different vector"

    def test_distinct_tokens_differ(self):
        a = encoders._token_vector("dog")
        b = encoders._token_vector("cat")
        assert abs(cos(a, b)) < 0.9, f"suspiciously aligned: {cos(a, b)}"


class TestTextEncoding:
    def test_unit_norm_and_repeatable(self):
        enc = PaletteEncoder()
        first = enc.encode_text("a brown dog on green grass")
        second = enc.encode_text("a brown dog on green grass")
        assert np.linalg.norm(first) == pytest.approx(1.0)
        assert first.tobytes() == second.tobytes(), "text encoding drifted"

    def test_single_color_word_hits_its_anchor(self):
        enc = PaletteEncoder()
        vec = enc.encode_text("green")
        assert cos(vec, encoders._ATTR_VECS["green"]) == pytest.approx(1.0)

    def test_grey_is_an_alias_for_gray(self):
        enc = PaletteEncoder()
        assert np.array_equal(enc.encode_text("grey"), enc.encode_text("gray"))

    def test_unknown_words_shift_the_vector(self):
        enc = PaletteEncoder()
        plain = enc.encode_text("green")
        noisy = enc.encode_text("blorp green")
        assert not np.array_equal(plain, noisy), \
            "unknown words should contribute deterministic noise"

    def test_no_words_rejected(self):
        enc = PaletteEncoder()
        for text in ("", "   ", "42 !?"):
            with pytest.raises(ModelError):
                enc.encode_text(text)


class TestPatchFeatures:
    def test_grid_shape_and_unit_norms(self):
        enc = PaletteEncoder()
        image = np.zeros((130, 70, 3), dtype=np.uint8)
        feats = enc.encode_patches(image, 64)
        assert feats.shape == (2, 1, EMBED_DIM)
        norms = np.linalg.norm(feats, axis=-1)
        assert np.allclose(norms, 1.0), f"non-unit features: {norms}"

    def test_flat_green_scores_green_over_blue(self):
        enc = PaletteEncoder()
        vec = enc.encode_patches(flat_crop((88, 140, 70)), 64)[0, 0]
        green = cos(vec, encoders._ATTR_VECS["green"])
        blue = cos(vec, encoders._ATTR_VECS["blue"])
        assert green > 0.5, f"green share missing: {green}"
        assert green > blue + 0.3

    def test_texture_separates_flat_from_noisy(self):
        enc = PaletteEncoder()
        flat = enc.encode_patches(flat_crop((130, 85, 45)), 64)[0, 0]
        fuzzy = enc.encode_patches(noisy_crop((130, 85, 45), 28.0), 64)[0, 0]
        busy = encoders._ATTR_VECS["busy"]
        smooth = encoders._ATTR_VECS["smooth"]
        assert cos(fuzzy, busy) > cos(flat, busy) + 0.5
        assert cos(flat, smooth) > cos(flat, busy) + 0.5
        assert cos(fuzzy, busy) > cos(fuzzy, smooth) + 0.25

    def test_black_crop_reads_as_dark(self):
        enc = PaletteEncoder()
        vec = enc.encode_patches(flat_crop((5, 5, 5)), 64)[0, 0]
        assert cos(vec, encoders._ATTR_VECS["black"]) > 0.4
        assert cos(vec, encoders._ATTR_VECS["dark"]) > 0.4


class TestBackendLoader:
    def test_palette_is_builtin(self):
        enc = load_encoder("palette")
        assert isinstance(enc, PaletteEncoder)
        assert enc.name == "palette"

    def test_clip_checkpoint_unavailable_offline(self, monkeypatch):
        monkeypatch.setenv("HF_HUB_OFFLINE", "1")
        with pytest.raises(ModelError, match="openai/clip-vit-base-patch32"):
            load_encoder("openai/clip-vit-base-patch32")
