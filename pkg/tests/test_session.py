"""End-to-end single runs: exact zero-loss values, sizing modes, determinism."""

import pytest

from semrtc.metrics import aggregate
from semrtc.session import ConfigError, SessionConfig, run_session


@pytest.fixture(scope="module")
def zero_loss():
    return run_session(SessionConfig(), seed=1)


@pytest.fixture(scope="module")
def fixed_thirty():
    cfg = SessionConfig(adaptive_rate=False, fixed_rate_fps=30.0)
    return run_session(cfg, seed=1)


@pytest.fixture(scope="module")
def adaptive_lossy():
    cfg = SessionConfig(loss_rate=0.05, frame_bits=112000.0, duration_s=30.0)
    return run_session(cfg, seed=1)


class TestZeroLossDefaults:
    """2 Mbit/s at 2 fps over a 10 Mbit/s, 30 ms link: every number is exact."""

    def test_frame_count(self, zero_loss):
        # captures at 0, 500, ..., 9500
        assert zero_loss.frames_sent == 20

    def test_sample_count(self, zero_loss):
        # samples at 500, 1000, ..., 10000 inclusive
        assert len(zero_loss.sample_records) == 20

    def test_latency_is_serialization_plus_delay(self, zero_loss):
        # 1,000,000-bit frame on a 10 Mbit/s link: 100 ms + 30 ms
        assert zero_loss.frame_latencies == [pytest.approx(130.0)] * 20
        assert zero_loss.incomplete_frames == 0

    def test_every_sample_gets_the_expected_frame(self, zero_loss):
        assert all(r.kind == "expected" for r in zero_loss.sample_records)
        assert zero_loss.sampled_frame_ids == set(range(20))

    def test_no_repair_traffic(self, zero_loss):
        assert zero_loss.nacks_sent == 0
        assert zero_loss.retransmit_bits == 0.0

    def test_rate_never_moves(self, zero_loss):
        assert zero_loss.rate_timeline == [(0.0, 2.0)]
        assert zero_loss.final_loss_estimate == 0.0

    def test_link_accounting(self, zero_loss):
        stats = zero_loss.link_stats
        assert stats.conserved()
        assert stats.lost_packets == 0 and stats.dropped_packets == 0
        assert stats.delivered_bits == pytest.approx(20 * 1_000_000.0)

    def test_aggregate_row_values(self, zero_loss):
        report = aggregate(zero_loss)
        assert report.latency.p50_ms == pytest.approx(130.0)
        assert report.latency.p99_ms == pytest.approx(130.0)
        assert report.stalls.stall_count == 0
        assert report.waste.waste_fraction == 0.0
        assert report.expected_fraction == 1.0
        assert report.frame_rate == pytest.approx(2.0)


class TestFixedThirtyFps:

    def test_waste_is_the_unsampled_share(self, fixed_thirty):
        report = aggregate(fixed_thirty)
        assert fixed_thirty.frames_sent == 300
        # 2 samples per second consume 20 of 300 equal-size frames
        assert report.waste.waste_fraction == pytest.approx(280 / 300)

    def test_small_frames_are_fast(self, fixed_thirty):
        # 66,666.7-bit frames serialize in 6.67 ms
        assert fixed_thirty.frame_latencies[0] == pytest.approx(30 + 20 / 3)

    def test_fixed_rate_skips_the_controller(self, fixed_thirty):
        assert fixed_thirty.rate_timeline == [(0.0, 30.0)]


class TestFrameSizing:
    def test_explicit_frame_bits(self):
        cfg = SessionConfig(frame_bits=50000.0, duration_s=2.0)
        result = run_session(cfg, seed=1)
        assert set(result.frame_bits_by_id.values()) == {50000.0}

    def test_bitrate_divided_by_rate(self):
        cfg = SessionConfig(bitrate_kbps=4000.0, duration_s=2.0)
        result = run_session(cfg, seed=1)
        assert set(result.frame_bits_by_id.values()) == {2_000_000.0}

    def test_uniform_correlation_budget(self):
        cfg = SessionConfig(uniform_rho=0.5, duration_s=2.0)
        result = run_session(cfg, seed=1)
        # 720x1280 at 64 px patches: 11 x 20 grid; rho 0.5, gamma 3 -> QP 29
        per_patch = 2000.0 * 2 ** ((30 - 29) / 6)
        sizes = set(result.frame_bits_by_id.values())
        assert len(sizes) == 1
        assert sizes.pop() == pytest.approx(11 * 20 * per_patch)

    def test_budget_outranks_frame_bits(self):
        cfg = SessionConfig(uniform_rho=1.0, frame_bits=50000.0, duration_s=2.0)
        result = run_session(cfg, seed=1)
        # rho 1.0 -> QP 0 -> 2000 * 2^(30/6) = 64000 bits per patch
        sizes = set(result.frame_bits_by_id.values())
        assert len(sizes) == 1
        assert sizes.pop() == pytest.approx(11 * 20 * 64000.0)

    def test_latency_floor_under_loss(self):
        cfg = SessionConfig(loss_rate=0.05, frame_bits=112000.0, duration_s=10.0)
        result = run_session(cfg, seed=1)
        assert result.frame_latencies, "no frames completed"
        assert min(result.frame_latencies) >= 41.2 - 1e-9


class TestAdaptiveUnderLoss:

    def test_estimate_tracks_true_loss(self, adaptive_lossy):
        assert 0.02 < adaptive_lossy.final_loss_estimate < 0.10

    def test_rate_rises_from_inference_floor(self, adaptive_lossy):
        rates = [rate for _, rate in adaptive_lossy.rate_timeline]
        assert rates[0] == 2.0
        assert max(rates) >= 10.0
        assert len(rates) > 1

    def test_rates_are_group_multiples_within_cap(self, adaptive_lossy):
        for _, rate in adaptive_lossy.rate_timeline:
            assert rate == pytest.approx(2.0 * round(rate / 2.0))
            assert 2.0 <= rate <= 30.0

    def test_repairs_happen(self, adaptive_lossy):
        assert adaptive_lossy.nacks_sent > 0
        assert adaptive_lossy.retransmit_bits > 0.0

    def test_accounting_never_overcounts(self, adaptive_lossy):
        # packets still in flight at the cutoff are in no bucket yet
        stats = adaptive_lossy.link_stats
        settled = (stats.delivered_packets + stats.lost_packets
                   + stats.dropped_packets)
        assert settled <= stats.sent_packets
        assert stats.sent_packets - settled < 100


class TestSuppression:
    def test_suppression_never_adds_nacks(self):
        for seed in (1, 2, 3):
            kwargs = dict(loss_rate=0.05, adaptive_rate=False,
                          fixed_rate_fps=30.0, duration_s=10.0)
            with_sup = run_session(
                SessionConfig(suppress_skipped=True, **kwargs), seed)
            without = run_session(
                SessionConfig(suppress_skipped=False, **kwargs), seed)
            assert with_sup.nacks_sent <= without.nacks_sent, f"seed {seed}"


class TestBurstyLoss:
    def test_gilbert_elliott_runs_and_loses(self):
        cfg = SessionConfig(loss_model="gilbert_elliott", loss_rate=0.0,
                            p_good_to_bad=0.05, p_bad_to_good=0.5,
                            loss_in_bad=0.5, frame_bits=112000.0,
                            duration_s=10.0)
        result = run_session(cfg, seed=1)
        stats = result.link_stats
        assert stats.lost_packets > 0
        assert (stats.delivered_packets + stats.lost_packets
                + stats.dropped_packets) <= stats.sent_packets


class TestDeterminism:
    def test_same_seed_same_row_and_trace(self):
        cfg = SessionConfig(loss_rate=0.05, frame_bits=112000.0, duration_s=10.0)
        a = run_session(cfg, seed=7, trace_enabled=True)
        b = run_session(cfg, seed=7, trace_enabled=True)
        assert aggregate(a).csv_row() == aggregate(b).csv_row()
        assert a.trace_lines == b.trace_lines

    def test_different_seed_different_trace(self):
        cfg = SessionConfig(loss_rate=0.05, frame_bits=112000.0, duration_s=10.0)
        a = run_session(cfg, seed=7, trace_enabled=True)
        b = run_session(cfg, seed=8, trace_enabled=True)
        assert a.trace_lines != b.trace_lines


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs, needle", [
        (dict(bandwidth_kbps=0.0), "bandwidth"),
        (dict(loss_rate=1.5), "loss_rate"),
        (dict(loss_model="bursty"), "loss_model"),
        (dict(epsilon=0.0), "epsilon"),
        (dict(r_max=1.0), "r_max"),
        (dict(adaptive_rate=False), "fixed_rate_fps"),
        (dict(substitute_age_limit_intervals=0.0), "substitute_age"),
        (dict(bitrate_kbps=-5.0), "bitrate"),
        (dict(uniform_rho=2.0), "uniform_rho"),
        (dict(duration_s=0.0), "duration"),
    ])
    def test_bad_field_is_named(self, kwargs, needle):
        with pytest.raises(ConfigError, match=needle):
            run_session(SessionConfig(**kwargs), seed=1)
