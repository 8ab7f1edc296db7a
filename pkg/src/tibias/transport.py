"""Sender/receiver machinery shared by every congestion controller.

The sender owns sequence bookkeeping, duplicate-ACK detection, NewReno
style recovery points, RTT measurement from echoed timestamps and the
retransmission timer. Subclasses decide the window through a handful of
hooks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .engine import US_PER_S, Ack, DropCause, EventQueue, Segment

MIN_RTO = 0.5
MAX_RTO = 64.0
INITIAL_RTO = 1.0
DUPACK_THRESHOLD = 3
DELAYED_ACK = 0.2
RWND = 10_000  # segments; receiver window is effectively unlimited


class RttEstimator:
    """Smoothed RTT and variance, RTO clamped to [0.5, 64] s, with backoff."""

    def __init__(self, min_rto: float = MIN_RTO, max_rto: float = MAX_RTO,
                 initial_rto: float = INITIAL_RTO):
        self.min_rto = min_rto
        self.max_rto = max_rto
        self.srtt: Optional[float] = None
        self.rttvar = 0.0
        self.rtt_min: Optional[float] = None
        self.rto = initial_rto

    def sample(self, r: float) -> None:
        if r <= 0:
            return
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - r)
            self.srtt = 0.875 * self.srtt + 0.125 * r
        if self.rtt_min is None or r < self.rtt_min:
            self.rtt_min = r
        self.rto = min(max(self.srtt + 4 * self.rttvar, self.min_rto), self.max_rto)

    def backoff(self) -> None:
        self.rto = min(2 * self.rto, self.max_rto)


@dataclass
class Reduction:
    time: float
    cause: str  # "dupack", "classified-congestion" or "rto"
    seq: int
    truth: Optional[DropCause]


@dataclass
class LossEvent:
    """One N-dupack episode and how the sender labelled it."""

    time: float
    seq: int
    label: Optional[DropCause]
    truth: Optional[DropCause]


TruthFn = Callable[[int], Optional[DropCause]]
TraceFn = Callable[..., None]


class TcpSender:
    """Bulk-transfer sender; the window policy lives in subclasses."""

    protocol = "base"

    def __init__(self, flow_id: int, seg_size: int, events: EventQueue,
                 emit: Callable[[Segment], None], *, truth: Optional[TruthFn] = None,
                 trace: Optional[TraceFn] = None, rwnd: int = RWND):
        self.flow_id = flow_id
        self.seg_size = seg_size
        self.events = events
        self.emit = emit
        self.truth = truth or (lambda seq: None)
        self.trace = trace
        self.rwnd = rwnd

        self.snd_una = 0
        self.snd_nxt = 0
        self.high_seq = -1
        self.dupacks = 0
        self.in_recovery = False
        self.recover = -1
        self.rto_recover = -1
        self.rtt = RttEstimator()

        self.segments_sent = 0
        self.retransmit_count = 0
        self.timeouts = 0
        self.reductions: list[Reduction] = []
        self.loss_events: list[LossEvent] = []

        self._deadline: Optional[int] = None
        self._timer_event_at: Optional[int] = None
        self._last_retx: tuple[int, int] = (-1, -1)

    # -- hooks -------------------------------------------------------------
    def window(self) -> int:
        raise NotImplementedError

    def _on_new_ack(self, n_acked: int, ack: Ack, now: float) -> None:
        pass

    def _on_triple_dupack(self, now: float) -> None:
        pass

    def _on_recovery_dupack(self) -> None:
        pass

    def _on_partial_ack(self, n_acked: int) -> None:
        pass

    def _on_full_ack(self, n_acked: int, now: float) -> None:
        pass

    def _on_timeout(self, now: float) -> None:
        pass

    # -- helpers -----------------------------------------------------------
    @property
    def now(self) -> float:
        return self.events.now_us / US_PER_S

    @property
    def outstanding(self) -> int:
        return self.snd_nxt - self.snd_una

    def log_reduction(self, cause: str, seq: int, now: float) -> None:
        truth = self.truth(seq)
        self.reductions.append(Reduction(now, cause, seq, truth))
        if self.trace:
            self.trace(now, self.flow_id, "reduction", cause=cause, seq=seq, truth=truth)

    def log_loss_event(self, seq: int, label: DropCause, now: float) -> None:
        truth = self.truth(seq)
        self.loss_events.append(LossEvent(now, seq, label, truth))
        if self.trace:
            self.trace(now, self.flow_id, "loss", seq=seq, label=label, truth=truth)

    def _transmit(self, seq: int) -> None:
        retx = seq <= self.high_seq
        if retx:
            self.retransmit_count += 1
        else:
            self.high_seq = seq
        self.segments_sent += 1
        self.emit(Segment(self.flow_id, seq, self.seg_size, self.events.now_us, retx))

    def start(self) -> None:
        self.try_send()

    def try_send(self) -> None:
        w = self.window()
        if w > self.rwnd:
            w = self.rwnd
        limit = self.snd_una + w
        while self.snd_nxt < limit:
            self._transmit(self.snd_nxt)
            self.snd_nxt += 1
        if self.snd_nxt > self.snd_una and self._deadline is None:
            self._arm()

    def explicit_retransmit(self, seq: int) -> bool:
        """Resend ``seq`` now without touching the window; deduplicated per RTO."""
        now_us = self.events.now_us
        last_seq, last_at = self._last_retx
        if seq == last_seq and now_us - last_at < self.rtt.rto * US_PER_S:
            return False
        self._last_retx = (seq, now_us)
        self._transmit(seq)
        if self.trace:
            self.trace(now_us / US_PER_S, self.flow_id, "retransmit", seq=seq)
        return True

    # -- timer -------------------------------------------------------------
    def _arm(self) -> None:
        deadline = self.events.now_us + int(self.rtt.rto * US_PER_S)
        self._deadline = deadline
        if self._timer_event_at is None or self._timer_event_at > deadline:
            self._timer_event_at = deadline
            self.events.schedule(deadline, self._on_timer, deadline)

    def _disarm(self) -> None:
        self._deadline = None

    def _on_timer(self, at: int) -> None:
        if at != self._timer_event_at:
            return
        self._timer_event_at = None
        deadline = self._deadline
        if deadline is None:
            return
        if deadline > at:
            self._timer_event_at = deadline
            self.events.schedule(deadline, self._on_timer, deadline)
            return
        self._deadline = None
        self.on_rto()

    def on_rto(self) -> None:
        now = self.now
        self.timeouts += 1
        if self.trace:
            self.trace(now, self.flow_id, "rto", seq=self.snd_una, rto=self.rtt.rto)
        self._on_timeout(now)
        self.rtt.backoff()
        self.in_recovery = False
        self.dupacks = 0
        self.rto_recover = self.snd_nxt - 1
        self.snd_nxt = self.snd_una
        self.try_send()
        if self._deadline is None and self.snd_nxt > self.snd_una:
            self._arm()

    # -- ACK processing ----------------------------------------------------
    def on_ack(self, ack: Ack) -> None:
        now_us = self.events.now_us
        now = now_us / US_PER_S
        cum = ack.cum_ack
        if cum > self.snd_una:
            n = cum - self.snd_una
            self.snd_una = cum
            if self.snd_nxt < cum:
                self.snd_nxt = cum
            self.rtt.sample((now_us - ack.echo_us) / US_PER_S)
            self.dupacks = 0
            if self.in_recovery:
                if cum > self.recover:
                    self.in_recovery = False
                    self._on_full_ack(n, now)
                else:
                    self._on_partial_ack(n)
                    self.explicit_retransmit(cum)
            else:
                self._on_new_ack(n, ack, now)
            if self.snd_nxt > self.snd_una:
                self._arm()
            else:
                self._disarm()
        elif cum == self.snd_una and self.snd_nxt > self.snd_una:
            self.dupacks += 1
            self.rtt.sample((now_us - ack.echo_us) / US_PER_S)
            if self.in_recovery:
                self._on_recovery_dupack()
            elif self.dupacks == DUPACK_THRESHOLD and cum > self.rto_recover:
                self.in_recovery = True
                self.recover = self.snd_nxt - 1
                self._on_triple_dupack(now)
                self.explicit_retransmit(cum)
        else:
            return
        self.try_send()


class Receiver:
    """Cumulative-ACK receiver with delayed ACKs and immediate duplicate ACKs.

    ``on_segment`` takes the arrival instant explicitly. The network hands
    segments over as soon as their arrival time is known, which may be ahead
    of the simulation clock; ACKs carry their own send instant so the
    outcome is the same as processing at arrival.
    """

    def __init__(self, flow_id: int, seg_size: int, events: EventQueue,
                 send_ack: Callable[[Ack, int], None], delayed_ack: float = DELAYED_ACK):
        self.flow_id = flow_id
        self.seg_size = seg_size
        self.events = events
        self.send_ack = send_ack
        self.delay_us = int(round(delayed_ack * US_PER_S))
        self.rcv_nxt = 0
        self.ooo: set[int] = set()
        self.acks_sent = 0
        self._last_acked = 0
        self._pending_echo: Optional[int] = None
        self._pending_deadline = 0
        self._timer_at: Optional[int] = None

    @property
    def unique_segments(self) -> int:
        return self.rcv_nxt + len(self.ooo)

    def _ack(self, echo_us: int, at_us: int) -> None:
        newly = self.rcv_nxt - self._last_acked
        self._last_acked = self.rcv_nxt
        self._pending_echo = None
        self.acks_sent += 1
        self.send_ack(Ack(self.flow_id, self.rcv_nxt, echo_us, newly * self.seg_size), at_us)

    def on_segment(self, seg: Segment, at_us: int) -> bool:
        """Process an intact arrival; True when ``seg`` was not seen before."""
        if self._pending_echo is not None and self._pending_deadline < at_us:
            self._ack(self._pending_echo, self._pending_deadline)
        seq = seg.seq
        if seq == self.rcv_nxt:
            self.rcv_nxt += 1
            ooo = self.ooo
            if ooo:
                while self.rcv_nxt in ooo:
                    ooo.discard(self.rcv_nxt)
                    self.rcv_nxt += 1
                # gap filled or still open: acknowledge at once
                echo = self._pending_echo if self._pending_echo is not None else seg.sent_at_us
                self._ack(echo, at_us)
            elif self._pending_echo is not None:
                self._ack(self._pending_echo, at_us)
            else:
                self._pending_echo = seg.sent_at_us
                self._pending_deadline = at_us + self.delay_us
                if self._timer_at is None:
                    self._timer_at = self._pending_deadline
                    self.events.schedule(self._timer_at, self._on_timer, None)
            return True
        if seq > self.rcv_nxt and seq not in self.ooo:
            self.ooo.add(seq)
            self._ack(seg.sent_at_us, at_us)
            return True
        self._ack(seg.sent_at_us, at_us)
        return False

    def _on_timer(self, _arg) -> None:
        self._timer_at = None
        if self._pending_echo is None:
            return
        if self._pending_deadline <= self.events.now_us:
            self._ack(self._pending_echo, self._pending_deadline)
        else:
            self._timer_at = self._pending_deadline
            self.events.schedule(self._timer_at, self._on_timer, None)
