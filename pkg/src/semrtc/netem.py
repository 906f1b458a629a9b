"""Deterministic single-hop network emulation.

An event loop drives everything in virtual milliseconds. Ties are broken by
insertion order, so a run is a pure function of its inputs and seed. The link
serializes packets FIFO at a fixed bandwidth, applies a loss model at egress,
and delivers survivors one propagation delay later.
"""
from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled in the past."""


class EventLoop:
    def __init__(self):
        self._heap = []
        self._counter = itertools.count()
        self.now_ms = 0.0

    def schedule_at(self, time_ms: float, callback, *args) -> None:
        if time_ms < self.now_ms:
            raise SchedulingError(
                f"event at {time_ms} ms is before current time {self.now_ms} ms")
        heapq.heappush(self._heap, (time_ms, next(self._counter), callback, args))

    def schedule(self, delay_ms: float, callback, *args) -> None:
        if delay_ms < 0:
            raise SchedulingError(f"negative delay {delay_ms} ms")
        self.schedule_at(self.now_ms + delay_ms, callback, *args)

    def run_until(self, t_end_ms: float) -> None:
        """Process every event with timestamp <= t_end_ms in order."""
        while self._heap and self._heap[0][0] <= t_end_ms:
            time_ms, _, callback, args = heapq.heappop(self._heap)
            self.now_ms = time_ms
            callback(*args)
        self.now_ms = max(self.now_ms, t_end_ms)

    def pending(self) -> int:
        return len(self._heap)


class IIDLoss:
    """Independent per-packet loss with probability p."""

    def __init__(self, p: float, rng: random.Random):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"loss rate {p} outside [0, 1]")
        self.p = p
        self._rng = rng

    def drops_next(self) -> bool:
        if self.p == 0.0:
            return False
        return self._rng.random() < self.p


class GilbertElliottLoss:
    """Two-state bursty loss. Starts in the good state.

    Each packet is judged by the current state's loss probability, then the
    state transition is sampled. `p` keeps the same meaning as the i.i.d.
    model: loss probability while the channel is good.
    """

    def __init__(self, p: float, p_good_to_bad: float, p_bad_to_good: float,
                 loss_in_bad: float, rng: random.Random):
        for name, value in (("p", p), ("p_good_to_bad", p_good_to_bad),
                            ("p_bad_to_good", p_bad_to_good),
                            ("loss_in_bad", loss_in_bad)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        self.p_good = p
        self.p_bad = loss_in_bad
        self.p_g2b = p_good_to_bad
        self.p_b2g = p_bad_to_good
        self._rng = rng
        self.in_bad_state = False

    def drops_next(self) -> bool:
        loss_p = self.p_bad if self.in_bad_state else self.p_good
        dropped = self._rng.random() < loss_p if loss_p > 0.0 else False
        flip_p = self.p_b2g if self.in_bad_state else self.p_g2b
        if flip_p > 0.0 and self._rng.random() < flip_p:
            self.in_bad_state = not self.in_bad_state
        return dropped


@dataclass
class LinkStats:
    sent_packets: int = 0
    sent_bits: float = 0.0
    delivered_packets: int = 0
    delivered_bits: float = 0.0
    lost_packets: int = 0
    lost_bits: float = 0.0
    dropped_packets: int = 0
    dropped_bits: float = 0.0

    def conserved(self) -> bool:
        return (self.sent_packets ==
                self.delivered_packets + self.lost_packets + self.dropped_packets)


class Link:
    """FIFO bottleneck: serialize, maybe lose at egress, deliver after delay.

    Bandwidth is given in kbit/s, which conveniently equals bits per
    millisecond. queue_limit_bytes bounds the bits awaiting or undergoing
    serialization; an arriving packet that would overflow is dropped whole.
    None means unbounded.
    """

    def __init__(self, loop: EventLoop, bandwidth_kbps: float,
                 one_way_delay_ms: float, loss_model=None,
                 queue_limit_bytes: int | None = None, observer=None):
        if bandwidth_kbps <= 0:
            raise ValueError(f"bandwidth must be > 0, got {bandwidth_kbps}")
        if one_way_delay_ms < 0:
            raise ValueError(f"delay must be >= 0, got {one_way_delay_ms}")
        self.loop = loop
        self.bandwidth_kbps = bandwidth_kbps
        self.one_way_delay_ms = one_way_delay_ms
        self.loss_model = loss_model
        self.queue_limit_bits = (None if queue_limit_bytes is None
                                 else queue_limit_bytes * 8)
        self.sink = None
        self.observer = observer  # observer(event_name, packet) for tracing
        self.stats = LinkStats()
        self._busy_until_ms = 0.0
        self._queued_bits = 0.0

    def connect(self, sink) -> None:
        """sink(packet, arrival_ts_ms) receives every delivered packet."""
        self.sink = sink

    def serialization_ms(self, bits: float) -> float:
        return bits / self.bandwidth_kbps

    def send(self, packet) -> bool:
        """Enqueue one packet; returns False if the queue bound drops it."""
        bits = packet.bits
        if bits <= 0:
            raise ValueError(f"packet bits must be > 0, got {bits}")
        self.stats.sent_packets += 1
        self.stats.sent_bits += bits
        if (self.queue_limit_bits is not None
                and self._queued_bits + bits > self.queue_limit_bits):
            self.stats.dropped_packets += 1
            self.stats.dropped_bits += bits
            if self.observer is not None:
                self.observer("drop", packet)
            return False
        self._queued_bits += bits
        start = max(self.loop.now_ms, self._busy_until_ms)
        drain_ts = start + self.serialization_ms(bits)
        self._busy_until_ms = drain_ts
        self.loop.schedule_at(drain_ts, self._drain, packet)
        return True

    def _drain(self, packet) -> None:
        self._queued_bits -= packet.bits
        if self.loss_model is not None and self.loss_model.drops_next():
            self.stats.lost_packets += 1
            self.stats.lost_bits += packet.bits
            if self.observer is not None:
                self.observer("lose", packet)
            return
        self.loop.schedule(self.one_way_delay_ms, self._deliver, packet)

    def _deliver(self, packet) -> None:
        self.stats.delivered_packets += 1
        self.stats.delivered_bits += packet.bits
        if self.observer is not None:
            self.observer("deliver", packet)
        if self.sink is not None:
            self.sink(packet, self.loop.now_ms)


class DelayChannel:
    """Lossless fixed-delay path, used for receiver feedback."""

    def __init__(self, loop: EventLoop, delay_ms: float):
        if delay_ms < 0:
            raise ValueError(f"delay must be >= 0, got {delay_ms}")
        self.loop = loop
        self.delay_ms = delay_ms
        self.sink = None

    def connect(self, sink) -> None:
        self.sink = sink

    def send(self, message) -> None:
        self.loop.schedule(self.delay_ms, self._deliver, message)

    def _deliver(self, message) -> None:
        if self.sink is not None:
            self.sink(message, self.loop.now_ms)
