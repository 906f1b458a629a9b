"""Percentiles, stall accounting, waste accounting, CSV formatting."""

import pytest

from semrtc.metrics import (CSV_HEADER, FrameLatencyStats, MetricsError,
                            StallReport, WasteReport, aggregate,
                            frame_latency, nearest_rank_percentile)
from semrtc.transport import SampleRecord


class TestNearestRankPercentile:
    def test_single_sample_is_every_percentile(self):
        for q in (1, 50, 90, 99, 100):
            assert nearest_rank_percentile([42.0], q) == 42.0

    def test_hand_worked_ten_samples(self):
        data = [float(v) for v in range(10, 110, 10)]  # 10, 20, ..., 100
        # rank = ceil(q/100 * 10), 1-based into the sorted list
        assert nearest_rank_percentile(data, 50) == 50.0
        assert nearest_rank_percentile(data, 90) == 90.0
        assert nearest_rank_percentile(data, 99) == 100.0
        assert nearest_rank_percentile(data, 10) == 10.0
        assert nearest_rank_percentile(data, 11) == 20.0

    def test_order_does_not_matter(self):
        data = [5.0, 1.0, 3.0, 2.0, 4.0]
        assert nearest_rank_percentile(data, 50) == 3.0

    def test_result_is_an_observed_value(self):
        data = [1.0, 2.0, 100.0]
        for q in (1, 25, 50, 75, 99, 100):
            assert nearest_rank_percentile(data, q) in data

    def test_empty_and_bad_q_rejected(self):
        with pytest.raises(MetricsError):
            nearest_rank_percentile([], 50)
        with pytest.raises(MetricsError):
            nearest_rank_percentile([1.0], 0)
        with pytest.raises(MetricsError):
            nearest_rank_percentile([1.0], 101)


class TestFrameLatency:
    def test_difference(self):
        assert frame_latency(100.0, 230.0) == 130.0

    def test_rejects_time_travel(self):
        with pytest.raises(MetricsError):
            frame_latency(100.0, 90.0)

    def test_stats_from_samples(self):
        stats = FrameLatencyStats.from_samples([130.0, 130.0, 190.0, 250.0],
                                               incomplete_count=2)
        assert stats.count == 4 and stats.incomplete_count == 2
        assert stats.p50_ms == 130.0
        assert stats.p99_ms == 250.0
        assert stats.mean_ms == pytest.approx(175.0)

    def test_empty_stats_are_zero(self):
        stats = FrameLatencyStats.from_samples([])
        assert stats.count == 0 and stats.p99_ms == 0.0


def records(*kinds_and_waits):
    out = []
    for i, (kind, wait) in enumerate(kinds_and_waits):
        out.append(SampleRecord(sample_ts=500.0 * (i + 1), kind=kind,
                                wait_ms=wait))
    return out


class TestStallReport:
    def test_mean_includes_non_stalled_samples(self):
        report = StallReport.from_records(records(
            ("expected", 0.0), ("stall", 120.0), ("expected", 0.0),
            ("substitute", 0.0)))
        assert report.sample_count == 4
        assert report.stall_count == 1
        assert report.mean_ms == pytest.approx(30.0), \
            f"mean over all samples, got {report.mean_ms}"
        assert report.total_ms == pytest.approx(120.0)

    def test_no_samples(self):
        report = StallReport.from_records([])
        assert report.mean_ms == 0.0 and report.stall_count == 0


class TestWasteReport:
    def test_fraction_of_unconsumed_bits(self):
        frame_bits = {0: 1000.0, 1: 1000.0, 2: 2000.0}
        report = WasteReport.from_frames(frame_bits, sampled_frame_ids={0, 2},
                                         retransmit_bits=500.0)
        assert report.waste_fraction == pytest.approx(0.25)
        assert report.unsampled_frame_bits == 1000.0
        assert report.retransmit_bits == 500.0

    def test_retransmits_do_not_enter_the_fraction(self):
        frame_bits = {0: 1000.0}
        report = WasteReport.from_frames(frame_bits, {0}, retransmit_bits=9999.0)
        assert report.waste_fraction == 0.0

    def test_no_frames(self):
        report = WasteReport.from_frames({}, set())
        assert report.waste_fraction == 0.0


class FakeResult:
    """Duck-typed stand-in for a finished run."""

    def __init__(self):
        self.scenario_id = "unit"
        self.seed = 7
        self.bitrate_kbps = 2000.0
        self.loss_rate = 0.05
        self.duration_s = 10.0
        self.frames_sent = 20
        self.frame_latencies = [130.0] * 19 + [600.0]
        self.incomplete_frames = 0
        self.sample_records = records(("expected", 0.0), ("expected", 0.0),
                                      ("substitute", 0.0), ("stall", 200.0))
        self.sampled_frame_ids = {0, 1, 2}
        self.frame_bits_by_id = {i: 1000.0 for i in range(20)}
        self.retransmit_bits = 3000.0
        self.sent_bits = 23000.0
        self.nacks_sent = 3


class TestAggregate:
    def test_report_fields(self):
        report = aggregate(FakeResult())
        assert report.frame_rate == pytest.approx(2.0)
        assert report.latency.p50_ms == 130.0
        assert report.latency.p99_ms == 600.0
        assert report.stalls.mean_ms == pytest.approx(50.0)
        assert report.waste.waste_fraction == pytest.approx(0.85)
        assert report.substitute_fraction == 0.25
        assert report.expected_fraction == 0.5
        assert not report.empty
        assert report.extras["nacks"] == 3

    def test_csv_row_formatting(self):
        row = aggregate(FakeResult()).csv_row()
        cells = row.split(",")
        assert len(cells) == len(CSV_HEADER.split(","))
        assert cells[0] == "unit" and cells[1] == "7"
        assert cells[2] == "2000.000000"
        assert cells[3] == "0.050000"
        assert cells[10] == "1"  # stall_count stays an integer
        assert cells[11] == "0.850000"

    def test_empty_run_flagged(self):
        result = FakeResult()
        result.frames_sent = 0
        result.frame_latencies = []
        result.sample_records = []
        result.frame_bits_by_id = {}
        result.sampled_frame_ids = set()
        report = aggregate(result)
        assert report.empty
        assert report.latency.mean_ms == 0.0
