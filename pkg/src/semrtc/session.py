"""One simulated sending session: link, sender, receiver, sampler, controller.

run_session wires the pieces for a single seed and returns the raw material
the metrics module aggregates. Everything is driven by one event loop; the
only randomness is the link's loss model, seeded per run.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from . import allocator
from . import mapfile
from .netem import DelayChannel, EventLoop, GilbertElliottLoss, IIDLoss, Link
from .rate_control import ControllerState
from .transport import (LossReport, MTU_PAYLOAD_BITS, Nack, Frame, Receiver,
                        Sampler, Sender)


class ConfigError(ValueError):
    """Bad scenario configuration; message names the offending field."""


@dataclass
class SessionConfig:
    # link
    bandwidth_kbps: float = 10000.0
    one_way_delay_ms: float = 30.0
    loss_rate: float = 0.0
    loss_model: str = "iid"            # "iid" | "gilbert_elliott"
    p_good_to_bad: float = 0.0
    p_bad_to_good: float = 0.0
    loss_in_bad: float = 0.0
    queue_limit_bytes: Optional[int] = None
    # controller
    mllm_rate: float = 2.0
    epsilon: float = 0.001
    r_max: float = 30.0
    ewma_alpha: float = 0.3
    epoch_len_s: float = 1.0
    adaptive_rate: bool = True
    fixed_rate_fps: Optional[float] = None
    # sampler
    substitute_age_limit_intervals: Optional[float] = 2.0
    suppress_skipped: bool = True
    # video sizing (priority: correlation budget > frame_bits > bitrate)
    bitrate_kbps: float = 2000.0
    frame_bits: Optional[float] = None
    frame_width: int = 1280
    frame_height: int = 720
    mtu_payload_bytes: int = 1400
    # allocator
    correlation_file: Optional[str] = None
    uniform_rho: Optional[float] = None
    gamma: float = allocator.DEFAULT_GAMMA
    patch_size: int = 64
    ref_bits_per_patch: float = 2000.0
    ref_qp: int = 30
    halving_step: float = 6.0
    # run
    duration_s: float = 10.0
    scenario_id: str = "default"

    def validate(self) -> None:
        if self.bandwidth_kbps <= 0:
            raise ConfigError("link.bandwidth_kbps must be > 0")
        if self.one_way_delay_ms < 0:
            raise ConfigError("link.one_way_delay_ms must be >= 0")
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ConfigError("link.loss_rate must be in [0, 1]")
        if self.loss_model not in ("iid", "gilbert_elliott"):
            raise ConfigError(f"link.loss_model unknown: {self.loss_model}")
        if self.queue_limit_bytes is not None and self.queue_limit_bytes <= 0:
            raise ConfigError("link.queue_limit_bytes must be > 0 when set")
        if self.mllm_rate < 1:
            raise ConfigError("controller.mllm_rate must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("controller.epsilon must be in (0, 1)")
        if self.r_max < self.mllm_rate:
            raise ConfigError("controller.r_max must be >= mllm_rate")
        if not 0.0 <= self.ewma_alpha <= 1.0:
            raise ConfigError("controller.ewma_alpha must be in [0, 1]")
        if self.epoch_len_s <= 0:
            raise ConfigError("controller.epoch_len_s must be > 0")
        if not self.adaptive_rate:
            rate = self.fixed_rate_fps
            if rate is None or rate <= 0:
                raise ConfigError(
                    "controller.fixed_rate_fps must be > 0 when adaptive is off")
        if (self.substitute_age_limit_intervals is not None
                and self.substitute_age_limit_intervals <= 0):
            raise ConfigError(
                "sampler.substitute_age_limit_intervals must be > 0 or unset")
        if self.bitrate_kbps <= 0:
            raise ConfigError("video.bitrate_kbps must be > 0")
        if self.frame_bits is not None and self.frame_bits <= 0:
            raise ConfigError("video.frame_bits must be > 0 when set")
        if self.mtu_payload_bytes <= 0:
            raise ConfigError("video.mtu_payload_bytes must be > 0")
        if self.uniform_rho is not None and not -1.0 <= self.uniform_rho <= 1.0:
            raise ConfigError("allocator.uniform_rho must be in [-1, 1]")
        if self.gamma <= 0:
            raise ConfigError("allocator.gamma must be > 0")
        if self.patch_size <= 0:
            raise ConfigError("allocator.patch_size must be > 0")
        if (self.uniform_rho is not None
                and (self.frame_width < self.patch_size
                     or self.frame_height < self.patch_size)):
            raise ConfigError("video frame smaller than one patch")
        if self.duration_s <= 0:
            raise ConfigError("run.duration_s must be > 0")

    @property
    def mtu_payload_bits(self) -> float:
        return self.mtu_payload_bytes * 8.0

    def rate_model(self) -> allocator.RateModelParams:
        return allocator.RateModelParams(
            ref_bits_per_patch=self.ref_bits_per_patch,
            ref_qp=self.ref_qp, halving_step=self.halving_step)


class Trace:
    """Deterministic newline-delimited event record collector."""

    def __init__(self):
        self.lines: list = []

    def add(self, time_ms: float, event: str, seq: int, frame_id: int,
            detail: str) -> None:
        self.lines.append("%.6f\t%s\t%d\t%d\t%s" %
                          (time_ms, event, seq, frame_id, detail))


@dataclass
class RunResult:
    scenario_id: str
    seed: int
    bitrate_kbps: float
    loss_rate: float
    duration_s: float
    frames_sent: int
    frame_latencies: list
    incomplete_frames: int
    sample_records: list
    sampled_frame_ids: set
    frame_bits_by_id: dict
    retransmit_bits: float
    sent_bits: float
    nacks_sent: int
    rate_timeline: list = field(default_factory=list)
    final_loss_estimate: float = 0.0
    residual_violation: bool = False
    uniform_budget_fallback: bool = False
    link_stats: object = None
    trace_lines: Optional[list] = None


def _build_loss_model(cfg: SessionConfig, rng: random.Random):
    if cfg.loss_model == "gilbert_elliott":
        return GilbertElliottLoss(cfg.loss_rate, cfg.p_good_to_bad,
                                  cfg.p_bad_to_good, cfg.loss_in_bad, rng)
    if cfg.loss_rate == 0.0:
        return None
    return IIDLoss(cfg.loss_rate, rng)


def _build_budget(cfg: SessionConfig):
    """Frame budget from the configured correlation source, or None."""
    if cfg.correlation_file is not None:
        cmap = mapfile.read_map(cfg.correlation_file)
        return allocator.build_frame_budget(cmap, cfg.gamma, cfg.rate_model())
    if cfg.uniform_rho is not None:
        rows = cfg.frame_height // cfg.patch_size
        cols = cfg.frame_width // cfg.patch_size
        cmap = mapfile.CorrelationMap.uniform(cfg.uniform_rho, rows=rows,
                                              cols=cols,
                                              patch_size=cfg.patch_size)
        return allocator.build_frame_budget(cmap, cfg.gamma, cfg.rate_model())
    return None


def run_session(cfg: SessionConfig, seed: int,
                trace_enabled: bool = False) -> RunResult:
    cfg.validate()
    loop = EventLoop()
    rng = random.Random(seed)
    trace = Trace() if trace_enabled else None

    link = Link(loop, cfg.bandwidth_kbps, cfg.one_way_delay_ms,
                loss_model=_build_loss_model(cfg, rng),
                queue_limit_bytes=cfg.queue_limit_bytes,
                observer=(None if trace is None else
                          lambda event, pkt: trace.add(
                              loop.now_ms, event, pkt.seq, pkt.frame_id,
                              "retx" if pkt.is_retransmit else "")))
    feedback = DelayChannel(loop, cfg.one_way_delay_ms)
    rtt_ms = 2.0 * cfg.one_way_delay_ms
    sample_interval_ms = 1000.0 / cfg.mllm_rate
    max_sub_age = (None if cfg.substitute_age_limit_intervals is None
                   else cfg.substitute_age_limit_intervals * sample_interval_ms)

    sampler = Sampler(loop, sample_interval_ms,
                      max_substitute_age_ms=max_sub_age, trace=trace)
    receiver = Receiver(loop, feedback, rtt_ms,
                        epoch_len_ms=cfg.epoch_len_s * 1000.0,
                        suppress_skipped=cfg.suppress_skipped,
                        sampler=sampler, trace=trace)
    link.connect(receiver.on_packet)
    sampler.on_sampled = receiver.on_frame_sampled

    budget = _build_budget(cfg)
    frame_ids = itertools.count()
    frame_bits_by_id: dict = {}

    def frame_source(capture_ts: float) -> Frame:
        if budget is not None:
            bits = budget.total_bits
        elif cfg.frame_bits is not None:
            bits = cfg.frame_bits
        else:
            bits = cfg.bitrate_kbps * 1000.0 / sender.rate_fps
        return Frame(frame_id=next(frame_ids), capture_ts=capture_ts,
                     size_bits=bits)

    def frame_sink(frame: Frame) -> None:
        frame_bits_by_id[frame.frame_id] = frame.size_bits
        sampler.register_frame(frame)

    sender = Sender(loop, link, frame_source,
                    mtu_payload_bits=cfg.mtu_payload_bits,
                    frame_sink=frame_sink, trace=trace)

    controller = ControllerState(mllm_rate=cfg.mllm_rate, epsilon=cfg.epsilon,
                                 r_max=cfg.r_max, ewma_alpha=cfg.ewma_alpha,
                                 epoch_len_s=cfg.epoch_len_s)
    rate_timeline: list = []

    def on_feedback(message, now: float) -> None:
        if isinstance(message, Nack):
            sender.on_feedback(message, now)
        elif isinstance(message, LossReport):
            sizes = sender.take_epoch_frame_sizes()
            if not cfg.adaptive_rate:
                return
            decision = controller.on_epoch(message.acked, message.lost, sizes,
                                           cfg.mtu_payload_bits)
            if decision.rate_fps != sender.rate_fps:
                rate_timeline.append((now, decision.rate_fps))
            sender.set_rate(decision.rate_fps)

    feedback.connect(on_feedback)

    duration_ms = cfg.duration_s * 1000.0
    rate0 = (controller.current_rate if cfg.adaptive_rate
             else float(cfg.fixed_rate_fps))
    rate_timeline.append((0.0, rate0))
    sender.start(rate0, duration_ms)
    receiver.start()
    sampler.start()
    loop.run_until(duration_ms)
    sampler.finalize(duration_ms)

    latencies = []
    incomplete = 0
    for frame_id in sampler.frame_order():
        info = sampler.frames[frame_id]
        if info.completion_ts is None:
            incomplete += 1
        else:
            latencies.append(info.completion_ts - info.capture_ts)

    return RunResult(
        scenario_id=cfg.scenario_id, seed=seed,
        bitrate_kbps=cfg.bitrate_kbps, loss_rate=cfg.loss_rate,
        duration_s=cfg.duration_s, frames_sent=sender.frames_sent,
        frame_latencies=latencies, incomplete_frames=incomplete,
        sample_records=list(sampler.records),
        sampled_frame_ids=set(sampler.sampled_frame_ids),
        frame_bits_by_id=dict(frame_bits_by_id),
        retransmit_bits=sender.retransmit_bits,
        sent_bits=link.stats.sent_bits, nacks_sent=receiver.nacks_sent,
        rate_timeline=rate_timeline,
        final_loss_estimate=controller.loss.p,
        residual_violation=controller.residual_violation,
        uniform_budget_fallback=(budget.uniform_fallback
                                 if budget is not None else False),
        link_stats=link.stats,
        trace_lines=(None if trace is None else list(trace.lines)))
