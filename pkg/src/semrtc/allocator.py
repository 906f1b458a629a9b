"""Context-aware bitrate allocation: correlation -> per-patch QP -> frame bit budget.

The quantizer mapping pushes bits toward patches that matter for the current
chat context; the rate model converts integer QP into patch bits with the
standard exponential law (rate halves every ``halving_step`` QP).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mapfile import CorrelationMap

QP_MIN = 0
QP_MAX = 51
DEFAULT_GAMMA = 3.0


class AllocationError(ValueError):
    """Domain error in allocator inputs."""


@dataclass(frozen=True)
class QPMap:
    rows: int
    cols: int
    qp: np.ndarray  # integer matrix, each entry in [0, 51]


@dataclass(frozen=True)
class RateModelParams:
    """Exponential rate-QP model: bits halve every halving_step QP above ref_qp."""

    ref_bits_per_patch: float = 2000.0
    ref_qp: int = 30
    halving_step: float = 6.0

    def __post_init__(self):
        if self.ref_bits_per_patch <= 0:
            raise AllocationError("ref_bits_per_patch must be > 0")
        if not QP_MIN <= self.ref_qp <= QP_MAX:
            raise AllocationError(f"ref_qp must be in [{QP_MIN}, {QP_MAX}]")
        if self.halving_step <= 0:
            raise AllocationError("halving_step must be > 0")


@dataclass(frozen=True)
class FrameBudget:
    """Per-patch bit allocation for one encoded frame."""

    qp_map: QPMap
    patch_bits: np.ndarray
    total_bits: float
    uniform_fallback: bool = field(default=False)  # set when no chat context was available


def cosine_similarity(a, b) -> float:
    """Cosine similarity of two feature vectors, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise AllocationError("feature vectors must be one-dimensional")
    if va.shape != vb.shape:
        raise AllocationError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise AllocationError("feature vectors must be finite")
    na = math.sqrt(float(va @ va))
    nb = math.sqrt(float(vb @ vb))
    if na == 0.0 or nb == 0.0:
        raise AllocationError("zero-norm feature vector has no direction")
    sim = float(va @ vb) / (na * nb)
    return max(-1.0, min(1.0, sim))


def qp_from_correlation(rho: float, gamma: float = DEFAULT_GAMMA) -> int:
    """Map a correlation in [-1, 1] to an integer QP in [0, 51].

    QP = 51 * (1 - ((rho + 1) / 2) ** gamma), rounded half-up. Larger gamma
    penalizes low-correlation patches harder; rho=1 always yields QP 0.
    """
    if not -1.0 <= rho <= 1.0:
        raise AllocationError(f"correlation {rho} outside [-1, 1]")
    if gamma <= 0:
        raise AllocationError(f"gamma must be > 0, got {gamma}")
    raw = QP_MAX * (1.0 - ((rho + 1.0) / 2.0) ** gamma)
    qp = math.floor(raw + 0.5)  # round half-up; codecs take integer QP
    return max(QP_MIN, min(QP_MAX, qp))


def build_qp_map(cmap: CorrelationMap, gamma: float = DEFAULT_GAMMA) -> QPMap:
    """Element-wise QP mapping over a correlation map."""
    qp = np.empty((cmap.rows, cmap.cols), dtype=np.int64)
    for r in range(cmap.rows):
        for c in range(cmap.cols):
            qp[r, c] = qp_from_correlation(float(cmap.values[r, c]), gamma)
    return QPMap(cmap.rows, cmap.cols, qp)


def patch_bits(qp: int, params: RateModelParams) -> float:
    """Bits a single patch occupies at the given QP (strictly decreasing in QP)."""
    if not QP_MIN <= qp <= QP_MAX:
        raise AllocationError(f"QP {qp} outside [{QP_MIN}, {QP_MAX}]")
    return params.ref_bits_per_patch * 2.0 ** (-(qp - params.ref_qp) / params.halving_step)


def build_frame_budget(cmap: CorrelationMap, gamma: float = DEFAULT_GAMMA,
                       params: RateModelParams = RateModelParams(),
                       uniform_fallback: bool = False) -> FrameBudget:
    """Full allocation for one frame: QP map, per-patch bits and their sum."""
    qp_map = build_qp_map(cmap, gamma)
    bits = np.empty((cmap.rows, cmap.cols), dtype=np.float64)
    for r in range(cmap.rows):
        for c in range(cmap.cols):
            bits[r, c] = patch_bits(int(qp_map.qp[r, c]), params)
    return FrameBudget(qp_map=qp_map, patch_bits=bits, total_bits=float(bits.sum()),
                       uniform_fallback=uniform_fallback)


def fallback_budget(rows: int, cols: int, patch_size: int,
                    gamma: float = DEFAULT_GAMMA,
                    params: RateModelParams = RateModelParams()) -> FrameBudget:
    """Budget for frames with no chat context: neutral rho=0 everywhere, flagged."""
    cmap = CorrelationMap.uniform(0.0, rows, cols, patch_size)
    return build_frame_budget(cmap, gamma, params, uniform_fallback=True)
