"""Evaluation quantities over a finished run.

Frame-latency distribution, per-sample stall accounting, and the bit cost of
frames the receiver's sampler never consumed. Percentiles use the
nearest-rank definition so identical traces aggregate identically everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

CSV_COLUMNS = ("scenario_id", "seed", "bitrate_kbps", "loss_rate",
               "frame_rate", "p50_ms", "p90_ms", "p99_ms", "mean_ms",
               "stall_mean_ms", "stall_count", "waste_fraction",
               "substitute_fraction", "expected_fraction")
CSV_HEADER = ",".join(CSV_COLUMNS)


class MetricsError(ValueError):
    pass


def nearest_rank_percentile(samples, q: float) -> float:
    """Exact nearest-rank percentile: value at index ceil(q/100 * n), 1-based."""
    if not samples:
        raise MetricsError("percentile of empty sample set")
    if not 0.0 < q <= 100.0:
        raise MetricsError(f"percentile q={q} outside (0, 100]")
    ordered = sorted(samples)
    rank = math.ceil(q / 100.0 * len(ordered))
    return ordered[max(1, rank) - 1]


def frame_latency(capture_ts: float, completion_ts: float) -> float:
    if completion_ts < capture_ts:
        raise MetricsError(
            f"completion {completion_ts} precedes capture {capture_ts}")
    return completion_ts - capture_ts


@dataclass(frozen=True)
class FrameLatencyStats:
    count: int
    incomplete_count: int
    p50_ms: float
    p90_ms: float
    p99_ms: float
    mean_ms: float

    @classmethod
    def from_samples(cls, latencies, incomplete_count: int = 0):
        if not latencies:
            return cls(0, incomplete_count, 0.0, 0.0, 0.0, 0.0)
        return cls(count=len(latencies),
                   incomplete_count=incomplete_count,
                   p50_ms=nearest_rank_percentile(latencies, 50),
                   p90_ms=nearest_rank_percentile(latencies, 90),
                   p99_ms=nearest_rank_percentile(latencies, 99),
                   mean_ms=sum(latencies) / len(latencies))


@dataclass(frozen=True)
class StallReport:
    sample_count: int
    stall_count: int
    mean_ms: float      # zeros included for samples that did not stall
    total_ms: float

    @classmethod
    def from_records(cls, records):
        waits = [r.wait_ms for r in records if r.kind == "stall"]
        total = sum(waits)
        n = len(records)
        return cls(sample_count=n, stall_count=len(waits),
                   mean_ms=(total / n) if n else 0.0, total_ms=total)


@dataclass(frozen=True)
class WasteReport:
    total_frame_bits: float
    unsampled_frame_bits: float
    waste_fraction: float
    retransmit_bits: float

    @classmethod
    def from_frames(cls, frame_bits_by_id: dict, sampled_frame_ids,
                    retransmit_bits: float = 0.0):
        total = sum(frame_bits_by_id.values())
        unsampled = sum(bits for fid, bits in frame_bits_by_id.items()
                        if fid not in sampled_frame_ids)
        fraction = (unsampled / total) if total > 0 else 0.0
        return cls(total_frame_bits=total, unsampled_frame_bits=unsampled,
                   waste_fraction=fraction, retransmit_bits=retransmit_bits)


@dataclass(frozen=True)
class RunReport:
    scenario_id: str
    seed: int
    bitrate_kbps: float
    loss_rate: float
    frame_rate: float          # frames actually sent / duration
    latency: FrameLatencyStats
    stalls: StallReport
    waste: WasteReport
    substitute_fraction: float
    expected_fraction: float
    empty: bool = False
    extras: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        cells = [self.scenario_id, str(self.seed),
                 _fmt(self.bitrate_kbps), _fmt(self.loss_rate),
                 _fmt(self.frame_rate),
                 _fmt(self.latency.p50_ms), _fmt(self.latency.p90_ms),
                 _fmt(self.latency.p99_ms), _fmt(self.latency.mean_ms),
                 _fmt(self.stalls.mean_ms), str(self.stalls.stall_count),
                 _fmt(self.waste.waste_fraction),
                 _fmt(self.substitute_fraction), _fmt(self.expected_fraction)]
        return ",".join(cells)


def _fmt(value: float) -> str:
    return "%.6f" % value


def aggregate(result) -> RunReport:
    """Fold one RunResult into the report behind a single CSV row."""
    records = result.sample_records
    n = len(records)
    substitutes = sum(1 for r in records if r.kind == "substitute")
    expected = sum(1 for r in records if r.kind == "expected")
    latency = FrameLatencyStats.from_samples(result.frame_latencies,
                                             result.incomplete_frames)
    stalls = StallReport.from_records(records)
    waste = WasteReport.from_frames(result.frame_bits_by_id,
                                    result.sampled_frame_ids,
                                    result.retransmit_bits)
    duration_s = result.duration_s
    frame_rate = (result.frames_sent / duration_s) if duration_s > 0 else 0.0
    empty = n == 0 and result.frames_sent == 0
    return RunReport(scenario_id=result.scenario_id, seed=result.seed,
                     bitrate_kbps=result.bitrate_kbps,
                     loss_rate=result.loss_rate, frame_rate=frame_rate,
                     latency=latency, stalls=stalls, waste=waste,
                     substitute_fraction=(substitutes / n) if n else 0.0,
                     expected_fraction=(expected / n) if n else 0.0,
                     empty=empty,
                     extras={"sent_bits": result.sent_bits,
                             "nacks": result.nacks_sent})
