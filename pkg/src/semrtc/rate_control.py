"""Loss-resilient frame-rate selection.

Per decision epoch the controller estimates packet loss and packets-per-frame,
then picks the lowest sender frame rate (a multiple of the receiver's
inference rate) that keeps the probability of a whole sampling group arriving
incomplete below a residual epsilon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

DEFAULT_MLLM_FPS = 2.0
DEFAULT_EPSILON = 0.001
DEFAULT_R_MAX = 30.0
DEFAULT_EWMA_ALPHA = 0.3
DEFAULT_EPOCH_LEN_S = 1.0


class RateControlError(ValueError):
    """Domain error in controller inputs."""


@dataclass(frozen=True)
class LossEstimate:
    p: float  # smoothed packet loss rate in [0, 1]
    sample_count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise RateControlError(f"loss rate {self.p} outside [0, 1]")
        if self.sample_count < 0:
            raise RateControlError("sample_count must be >= 0")


class RateDecision(NamedTuple):
    rate_fps: float
    group_size: int          # frames per inference interval at the chosen rate
    satisfiable: bool        # False when even r_max cannot meet the residual


def frame_success_prob(p: float, kappa: float) -> float:
    """Probability a kappa-packet frame survives i.i.d. per-packet loss p."""
    if not 0.0 <= p <= 1.0:
        raise RateControlError(f"loss rate {p} outside [0, 1]")
    if kappa <= 0:
        raise RateControlError(f"packets per frame must be > 0, got {kappa}")
    return (1.0 - p) ** kappa


def group_success_prob(p_f: float, k: int) -> float:
    """Probability at least one of k frames is fully received."""
    if not 0.0 <= p_f <= 1.0:
        raise RateControlError(f"frame success probability {p_f} outside [0, 1]")
    if k < 1:
        raise RateControlError(f"group size must be >= 1, got {k}")
    return 1.0 - (1.0 - p_f) ** k


def select_frame_rate(p: float, kappa: float, r_m: float,
                      eps: float = DEFAULT_EPSILON,
                      r_max: float = DEFAULT_R_MAX) -> RateDecision:
    """Minimum multiple of r_m whose group success probability reaches 1 - eps.

    p=0 degenerates the closed form (ln 0 in the denominator); the limit is a
    group of one. A frame success probability of zero makes the constraint
    unsatisfiable at any rate: the cap is returned with satisfiable=False.
    """
    if not 0.0 < eps < 1.0:
        raise RateControlError(f"epsilon {eps} outside (0, 1)")
    if r_m < 1:
        raise RateControlError(f"inference rate must be >= 1, got {r_m}")
    if r_max < r_m:
        raise RateControlError(f"r_max {r_max} below inference rate {r_m}")
    k_cap = int(r_max // r_m)

    p_f = frame_success_prob(p, kappa)
    if p_f >= 1.0:
        return RateDecision(r_m, 1, True)
    if p_f <= 0.0:
        return RateDecision(r_m * k_cap, k_cap, False)

    # log1p keeps the denominator nonzero when p_f underflows toward 0
    k = max(1, math.ceil(math.log(eps) / math.log1p(-p_f)))
    if k > k_cap:
        return RateDecision(r_m * k_cap, k_cap, False)
    return RateDecision(r_m * k, k, True)


def update_loss_estimate(previous: LossEstimate, acked: int, lost: int,
                         alpha: float = DEFAULT_EWMA_ALPHA) -> LossEstimate:
    """EWMA the epoch's observed loss ratio into the running estimate.

    No feedback this epoch (acked + lost == 0) carries the estimate forward
    unchanged.
    """
    if not 0.0 <= alpha <= 1.0:
        raise RateControlError(f"alpha {alpha} outside [0, 1]")
    if acked < 0 or lost < 0:
        raise RateControlError("feedback counts must be non-negative")
    total = acked + lost
    if total == 0:
        return previous
    ratio = lost / total
    p_new = alpha * ratio + (1.0 - alpha) * previous.p
    return LossEstimate(p=min(1.0, max(0.0, p_new)),
                        sample_count=previous.sample_count + total)


def update_kappa(frame_sizes_bits, mtu_payload_bits: float) -> float:
    """Mean packets per frame over an epoch (ceiling division per frame)."""
    sizes = list(frame_sizes_bits)
    if not sizes:
        raise RateControlError("kappa update needs at least one frame")
    if mtu_payload_bits <= 0:
        raise RateControlError("MTU payload must be > 0")
    counts = [math.ceil(size / mtu_payload_bits) for size in sizes]
    if any(c < 1 for c in counts):
        raise RateControlError("frame sizes must be positive")
    return sum(counts) / len(counts)


@dataclass
class ControllerState:
    """Single-owner state machine driving per-epoch rate decisions."""

    mllm_rate: float = DEFAULT_MLLM_FPS
    epsilon: float = DEFAULT_EPSILON
    r_max: float = DEFAULT_R_MAX
    ewma_alpha: float = DEFAULT_EWMA_ALPHA
    epoch_len_s: float = DEFAULT_EPOCH_LEN_S
    kappa: float = 1.0
    loss: LossEstimate = field(default_factory=lambda: LossEstimate(0.0))
    current_rate: float = 0.0
    residual_violation: bool = False

    def __post_init__(self):
        if self.current_rate == 0.0:
            self.current_rate = self.mllm_rate
        if self.kappa < 1.0:
            raise RateControlError("kappa must be >= 1")
        if not self.mllm_rate <= self.current_rate <= self.r_max:
            raise RateControlError(
                f"rate {self.current_rate} outside [{self.mllm_rate}, {self.r_max}]")

    def on_epoch(self, acked: int, lost: int, frame_sizes_bits,
                 mtu_payload_bits: float) -> RateDecision:
        """Fold one epoch of feedback and return the new rate decision."""
        self.loss = update_loss_estimate(self.loss, acked, lost, self.ewma_alpha)
        if frame_sizes_bits:
            self.kappa = max(1.0, update_kappa(frame_sizes_bits, mtu_payload_bits))
        decision = select_frame_rate(self.loss.p, self.kappa, self.mllm_rate,
                                     self.epsilon, self.r_max)
        self.current_rate = decision.rate_fps
        self.residual_violation = not decision.satisfiable
        return decision
