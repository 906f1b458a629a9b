"""Video transport over the emulated link.

Sender side: frame capture pacing, packetization, NACK-triggered
retransmission. Receiver side: frame assembly from packets, gap detection,
and the inference-driven sampler that consumes the newest ready frame,
falls back to the most recent complete one, or stalls until something
completes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

DEFAULT_MTU_PAYLOAD_BYTES = 1400
MTU_PAYLOAD_BITS = DEFAULT_MTU_PAYLOAD_BYTES * 8
_TIE_EPS = 1e-9  # absorbs float error in "is this timer due" comparisons


class TransportError(RuntimeError):
    """Protocol bookkeeping violated (duplicate completion, bad packet)."""


# ---------------------------------------------------------------------------
# wire types

@dataclass(frozen=True)
class Packet:
    seq: int
    frame_id: int
    index: int
    count: int
    payload_bits: float
    capture_ts: float
    send_ts: float
    is_retransmit: bool = False

    def __post_init__(self):
        if not 0 <= self.index < self.count:
            raise TransportError(
                f"packet index {self.index} outside frame of {self.count}")
        if self.payload_bits <= 0:
            raise TransportError("payload_bits must be > 0")

    @property
    def bits(self) -> float:
        return self.payload_bits


@dataclass
class Frame:
    frame_id: int
    capture_ts: float
    size_bits: float
    count: int = 0
    # completion time on a loss-free idle link; the sampler uses it to decide
    # which frame a sampling instant is entitled to expect
    nominal_ready_ts: float = 0.0
    completion_ts: Optional[float] = None


class Nack(NamedTuple):
    seq: int


class LossReport(NamedTuple):
    acked: int
    lost: int


class ExpectedFrame(NamedTuple):
    frame_id: int


class SubstituteFrame(NamedTuple):
    frame_id: int
    age_ms: float


class Stall(NamedTuple):
    wait_ms: Optional[float]  # None while unresolved


def packetize(frame: Frame, mtu_payload_bits: float, seq_start: int,
              send_ts: float) -> list:
    """Split a frame into sequential packets; the last one carries the rest."""
    if frame.size_bits <= 0:
        raise TransportError(f"frame size must be > 0, got {frame.size_bits}")
    if mtu_payload_bits <= 0:
        raise TransportError("MTU payload must be > 0")
    count = math.ceil(frame.size_bits / mtu_payload_bits)
    packets = []
    remaining = frame.size_bits
    for index in range(count):
        payload = mtu_payload_bits if index < count - 1 else remaining
        packets.append(Packet(seq=seq_start + index, frame_id=frame.frame_id,
                              index=index, count=count, payload_bits=payload,
                              capture_ts=frame.capture_ts, send_ts=send_ts))
        remaining -= payload
    return packets


# ---------------------------------------------------------------------------
# sender

class Sender:
    """Paces frame captures and answers NACKs with same-seq retransmits.

    Rate changes restart the capture phase: the next capture lands one new
    interval after the change, which keeps the schedule free of fractional
    carry-over.
    """

    def __init__(self, loop, link, frame_source, mtu_payload_bits: float = MTU_PAYLOAD_BITS,
                 frame_sink=None, trace=None):
        self.loop = loop
        self.link = link
        self.frame_source = frame_source  # frame_source(capture_ts) -> Frame
        self.frame_sink = frame_sink      # frame_sink(frame) after packetize
        self.mtu_payload_bits = mtu_payload_bits
        self.trace = trace
        self.rate_fps = 0.0
        self.end_ts = math.inf
        self.frames_sent = 0
        self.data_packets_sent = 0
        self.retransmit_packets = 0
        self.retransmit_bits = 0.0
        self.epoch_frame_sizes: list = []
        self._next_seq = 0
        self._sent_store: dict = {}
        self._capture_gen = 0

    def start(self, rate_fps: float, end_ts: float) -> None:
        if rate_fps <= 0:
            raise TransportError(f"rate must be > 0, got {rate_fps}")
        self.rate_fps = rate_fps
        self.end_ts = end_ts
        self.loop.schedule_at(self.loop.now_ms, self._capture, self._capture_gen)

    def set_rate(self, rate_fps: float) -> None:
        """Apply a new capture rate; no-op when the rate is unchanged."""
        if rate_fps <= 0:
            raise TransportError(f"rate must be > 0, got {rate_fps}")
        if rate_fps == self.rate_fps:
            return
        self.rate_fps = rate_fps
        self._capture_gen += 1
        if self.trace is not None:
            self.trace.add(self.loop.now_ms, "rate_change", -1, -1,
                           f"{rate_fps:g}")
        self.loop.schedule(1000.0 / rate_fps, self._capture, self._capture_gen)

    def _capture(self, gen: int) -> None:
        if gen != self._capture_gen:
            return  # superseded by a rate change
        now = self.loop.now_ms
        if now >= self.end_ts:
            return
        frame = self.frame_source(now)
        packets = packetize(frame, self.mtu_payload_bits, self._next_seq, now)
        self._next_seq += len(packets)
        frame.count = len(packets)
        frame.nominal_ready_ts = (now + self.link.serialization_ms(frame.size_bits)
                                  + self.link.one_way_delay_ms)
        if self.frame_sink is not None:
            self.frame_sink(frame)
        if self.trace is not None:
            self.trace.add(now, "capture", packets[0].seq, frame.frame_id,
                           f"bits={frame.size_bits:.1f} count={frame.count}")
        for pkt in packets:
            self._sent_store[pkt.seq] = pkt
            self.link.send(pkt)
        self.frames_sent += 1
        self.data_packets_sent += len(packets)
        self.epoch_frame_sizes.append(frame.size_bits)
        self.loop.schedule(1000.0 / self.rate_fps, self._capture, gen)

    def take_epoch_frame_sizes(self) -> list:
        sizes = self.epoch_frame_sizes
        self.epoch_frame_sizes = []
        return sizes

    def on_feedback(self, message, now: float) -> None:
        if isinstance(message, Nack):
            self._retransmit(message.seq, now)

    def _retransmit(self, seq: int, now: float) -> None:
        original = self._sent_store.get(seq)
        if original is None:
            return
        copy = Packet(seq=original.seq, frame_id=original.frame_id,
                      index=original.index, count=original.count,
                      payload_bits=original.payload_bits,
                      capture_ts=original.capture_ts, send_ts=now,
                      is_retransmit=True)
        self.retransmit_packets += 1
        self.retransmit_bits += copy.payload_bits
        if self.trace is not None:
            self.trace.add(now, "retransmit", seq, copy.frame_id, "")
        self.link.send(copy)


# ---------------------------------------------------------------------------
# receiver: assembly + NACK scheduling

@dataclass
class _MissingSeq:
    first_detected_ts: float
    last_nack_ts: Optional[float] = None
    rounds: int = 0


@dataclass
class _FrameAssembly:
    frame_id: int
    count: int
    base_seq: int
    capture_ts: float
    got: set = field(default_factory=set)
    completion_ts: Optional[float] = None


class Receiver:
    """Reassembles frames, NACKs seq gaps, reports per-epoch loss counts.

    A gap becomes NACK-eligible nack_delay after first detection
    (nack_delay = max(10 ms, RTT/2)) and is re-requested at most once per
    RTT. Re-request checks are spaced RTT + nack_delay apart: a repair
    needs a full RTT plus serialization to land, so checking at exactly
    RTT would re-request packets whose repair is already in flight and
    double-count them in the loss feedback. When suppression is on,
    sampling a frame abandons every missing seq older than that frame's
    first packet: the consumer has moved past them, so requesting repair
    would only add load.
    """

    def __init__(self, loop, feedback, rtt_ms: float, epoch_len_ms: float = 1000.0,
                 suppress_skipped: bool = True, sampler=None, trace=None):
        self.loop = loop
        self.feedback = feedback
        self.rtt_ms = rtt_ms
        self.nack_delay_ms = max(10.0, 0.5 * rtt_ms)
        self.renack_interval_ms = rtt_ms + self.nack_delay_ms
        self.epoch_len_ms = epoch_len_ms
        self.suppress_skipped = suppress_skipped
        self.sampler = sampler
        self.trace = trace
        self.highest_seq = -1
        self.received_seqs: set = set()
        self.missing: dict = {}
        self.frames: dict = {}
        self.duplicate_packets = 0
        self.stale_packets = 0
        self.suppressed_seqs = 0
        self.nacks_sent = 0
        self._epoch_acked = 0
        self._epoch_lost = 0
        self._suppress_below = 0

    def start(self) -> None:
        self.loop.schedule(self.epoch_len_ms, self._report_epoch)

    # -- packet path --------------------------------------------------------

    def on_packet(self, pkt: Packet, now: float):
        """Link sink. Returns the frame_id completed by this packet, if any."""
        self._epoch_acked += 1
        if pkt.seq in self.received_seqs:
            self.duplicate_packets += 1
            return None
        self.received_seqs.add(pkt.seq)
        self.missing.pop(pkt.seq, None)
        if pkt.seq > self.highest_seq + 1:
            for seq in range(self.highest_seq + 1, pkt.seq):
                if seq not in self.received_seqs and seq not in self.missing:
                    if seq < self._suppress_below:
                        continue
                    self.missing[seq] = _MissingSeq(first_detected_ts=now)
                    self.loop.schedule(self.nack_delay_ms, self._nack_check, seq)
        self.highest_seq = max(self.highest_seq, pkt.seq)
        return self._assemble(pkt, now)

    def _assemble(self, pkt: Packet, now: float):
        asm = self.frames.get(pkt.frame_id)
        if asm is None:
            asm = _FrameAssembly(frame_id=pkt.frame_id, count=pkt.count,
                                 base_seq=pkt.seq - pkt.index,
                                 capture_ts=pkt.capture_ts)
            self.frames[pkt.frame_id] = asm
        if asm.completion_ts is not None:
            self.stale_packets += 1
            return None
        asm.got.add(pkt.index)
        if len(asm.got) == asm.count:
            asm.completion_ts = now
            if self.trace is not None:
                self.trace.add(now, "frame_complete", pkt.seq, pkt.frame_id,
                               f"latency={now - asm.capture_ts:.3f}")
            if self.sampler is not None:
                self.sampler.on_frame_complete(pkt.frame_id, now)
            return pkt.frame_id
        return None

    # -- NACK path -----------------------------------------------------------

    def detect_losses(self, now: float) -> list:
        """Seqs due for a NACK round at `now`, in ascending order."""
        due = []
        for seq in sorted(self.missing):
            rec = self.missing[seq]
            aged = now - rec.first_detected_ts + _TIE_EPS >= self.nack_delay_ms
            gated = (rec.last_nack_ts is None
                     or now - rec.last_nack_ts + _TIE_EPS >= self.rtt_ms)
            if aged and gated:
                due.append(seq)
        return due

    def _nack_check(self, seq: int) -> None:
        rec = self.missing.get(seq)
        if rec is None:
            return  # arrived or suppressed in the meantime
        now = self.loop.now_ms
        aged = now - rec.first_detected_ts + _TIE_EPS >= self.nack_delay_ms
        gated = (rec.last_nack_ts is None
                 or now - rec.last_nack_ts + _TIE_EPS >= self.rtt_ms)
        if not (aged and gated):
            return
        rec.last_nack_ts = now
        rec.rounds += 1
        self.nacks_sent += 1
        self._epoch_lost += 1
        if self.trace is not None:
            self.trace.add(now, "nack", seq, -1, f"round={rec.rounds}")
        self.feedback.send(Nack(seq))
        self.loop.schedule(self.renack_interval_ms, self._nack_check, seq)

    # -- sampler feedback ----------------------------------------------------

    def on_frame_sampled(self, frame_id: int) -> None:
        """Abandon repair of anything older than the frame just consumed."""
        if not self.suppress_skipped:
            return
        asm = self.frames.get(frame_id)
        if asm is None:
            return
        cutoff = asm.base_seq
        if cutoff <= self._suppress_below:
            return
        self._suppress_below = cutoff
        for seq in [s for s in self.missing if s < cutoff]:
            del self.missing[seq]
            self.suppressed_seqs += 1

    # -- loss reporting ------------------------------------------------------

    def _report_epoch(self) -> None:
        report = LossReport(acked=self._epoch_acked, lost=self._epoch_lost)
        self._epoch_acked = 0
        self._epoch_lost = 0
        if self.trace is not None:
            self.trace.add(self.loop.now_ms, "loss_report", -1, -1,
                           f"acked={report.acked} lost={report.lost}")
        self.feedback.send(report)
        self.loop.schedule(self.epoch_len_ms, self._report_epoch)


# ---------------------------------------------------------------------------
# sampler

@dataclass
class SampleRecord:
    sample_ts: float
    kind: str                      # "expected" | "substitute" | "stall"
    frame_id: Optional[int] = None
    age_ms: float = 0.0
    wait_ms: float = 0.0
    resolved: bool = True


@dataclass
class _FrameInfo:
    frame_id: int
    capture_ts: float
    nominal_ready_ts: float
    size_bits: float
    completion_ts: Optional[float] = None


class Sampler:
    """Uniform-interval frame consumer with discard-and-substitute.

    Each sampling instant is entitled to the newest frame that a loss-free
    link would have finished delivering by then. If that frame is complete
    it is consumed as expected; if not, the newest complete frame stands in
    and the expected one is discarded rather than waited for. With nothing
    acceptable the sampler stalls until the first completion.

    max_substitute_age_ms bounds how stale a stand-in may be (default two
    sampling intervals: the current group or the one before it). Pass None
    to accept arbitrarily old complete frames.
    """

    def __init__(self, loop, sample_interval_ms: float, on_sampled=None,
                 max_substitute_age_ms: Optional[float] = None, trace=None):
        if sample_interval_ms <= 0:
            raise TransportError("sample interval must be > 0")
        if max_substitute_age_ms is not None and max_substitute_age_ms <= 0:
            raise TransportError("substitute age limit must be > 0")
        self.loop = loop
        self.sample_interval_ms = sample_interval_ms
        self.max_substitute_age_ms = max_substitute_age_ms
        self.on_sampled = on_sampled  # on_sampled(frame_id) per consumed frame
        self.trace = trace
        self.frames: dict = {}
        self._frame_order: list = []
        self.records: list = []
        self.sampled_frame_ids: set = set()
        self._pending_stalls: list = []

    def start(self) -> None:
        self.loop.schedule(self.sample_interval_ms, self._tick)

    def register_frame(self, frame: Frame) -> None:
        if frame.frame_id in self.frames:
            raise TransportError(f"frame {frame.frame_id} registered twice")
        if self._frame_order and frame.frame_id <= self._frame_order[-1]:
            raise TransportError("frame ids must be registered in order")
        self.frames[frame.frame_id] = _FrameInfo(
            frame_id=frame.frame_id, capture_ts=frame.capture_ts,
            nominal_ready_ts=frame.nominal_ready_ts, size_bits=frame.size_bits)
        self._frame_order.append(frame.frame_id)

    def on_frame_complete(self, frame_id: int, now: float) -> None:
        info = self.frames.get(frame_id)
        if info is None:
            raise TransportError(f"completion for unregistered frame {frame_id}")
        if info.completion_ts is not None:
            return
        info.completion_ts = now
        if self._pending_stalls:
            for record in self._pending_stalls:
                record.wait_ms = now - record.sample_ts
                record.frame_id = frame_id
                record.resolved = True
                if self.trace is not None:
                    self.trace.add(now, "stall_resolve", -1, frame_id,
                                   f"wait={record.wait_ms:.3f}")
            self._pending_stalls.clear()
            self._consume(frame_id)

    def _tick(self) -> None:
        self.sample(self.loop.now_ms)
        self.loop.schedule(self.sample_interval_ms, self._tick)

    def sample(self, sample_ts: float):
        """Classify one sampling instant and record the outcome."""
        expected = self._newest_ready(sample_ts)
        if expected is not None and expected.completion_ts is not None:
            record = SampleRecord(sample_ts=sample_ts, kind="expected",
                                  frame_id=expected.frame_id)
            outcome = ExpectedFrame(expected.frame_id)
            self._consume(expected.frame_id)
        else:
            substitute = self._newest_complete(sample_ts)
            if substitute is not None:
                age = sample_ts - substitute.capture_ts
                record = SampleRecord(sample_ts=sample_ts, kind="substitute",
                                      frame_id=substitute.frame_id, age_ms=age)
                outcome = SubstituteFrame(substitute.frame_id, age)
                self._consume(substitute.frame_id)
            else:
                record = SampleRecord(sample_ts=sample_ts, kind="stall",
                                      frame_id=None, resolved=False)
                outcome = Stall(None)
                self._pending_stalls.append(record)
        self.records.append(record)
        if self.trace is not None:
            detail = (f"age={record.age_ms:.3f}" if record.kind == "substitute"
                      else "")
            self.trace.add(sample_ts, f"sample_{record.kind}", -1,
                           record.frame_id if record.frame_id is not None else -1,
                           detail)
        return outcome

    def finalize(self, t_end_ms: float) -> None:
        """Cap unresolved stalls at the end of the run."""
        for record in self._pending_stalls:
            record.wait_ms = t_end_ms - record.sample_ts
            record.resolved = False
        self._pending_stalls.clear()

    def frame_order(self) -> list:
        """Frame ids in registration (capture) order."""
        return list(self._frame_order)

    def _newest_ready(self, sample_ts: float):
        for frame_id in reversed(self._frame_order):
            info = self.frames[frame_id]
            if info.nominal_ready_ts <= sample_ts + _TIE_EPS:
                return info
        return None

    def _newest_complete(self, sample_ts: float):
        for frame_id in reversed(self._frame_order):
            info = self.frames[frame_id]
            if info.completion_ts is None:
                continue
            if (self.max_substitute_age_ms is not None
                    and sample_ts - info.capture_ts >= self.max_substitute_age_ms):
                return None  # older frames are only staler
            return info
        return None

    def _consume(self, frame_id: int) -> None:
        self.sampled_frame_ids.add(frame_id)
        if self.on_sampled is not None:
            self.on_sampled(frame_id)
