"""Star topology: S senders, one relay with a shared drop-tail bottleneck, S receivers.

Each sender reaches the relay over its own lossy access link. Accepted
segments cross the shared bottleneck link; ACKs return over a lossless
reverse path whose latency is the sum of the two propagation delays.

Because the bottleneck is FIFO with a fixed rate, the instant a segment
will reach its receiver is known as soon as the relay accepts it. The
receiver is handed the segment at that point together with its arrival
time, which saves one event per segment without changing any outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, TextIO

from .allocator import SimilarityAllocator
from .config import ConfigError, ScenarioConfig
from .engine import (DropCause, DropRecord, DropTailQueue, EventQueue, FifoLink,
                     LinkSpec, RngStreams, Segment, to_us)
from .metrics import MetricsRecord, RunTrace, TraceWriter, compute_metrics
from .profiles import MetadataLedger, Profile, default_profiles, load_profiles
from .reno import RenoSender
from .scadm import TibiasSender
from .transport import Receiver, TcpSender

WIRELESS = DropCause.WIRELESS
CONGESTION = DropCause.CONGESTION


def resolve_profiles(cfg: ScenarioConfig) -> tuple[Profile, list[Profile]]:
    """Relay profile plus one profile per sender.

    A profile file lists the relay first (or a block named ``relay``)
    followed by the senders in flow order.
    """
    if not cfg.profiles:
        return default_profiles(cfg.n_connections)
    try:
        profiles = load_profiles(cfg.profiles)
    except (OSError, ValueError) as e:
        raise ConfigError(f"profiles: {e}") from None
    relay = next((p for p in profiles if p.node_id == "relay"), None)
    if relay is None:
        if not profiles:
            raise ConfigError("profiles: file holds no profiles")
        relay = profiles[0]
    senders = [p for p in profiles if p is not relay]
    if len(senders) < cfg.n_connections:
        raise ConfigError(
            f"profiles: {len(senders)} sender profiles for {cfg.n_connections} connections")
    return relay, senders[:cfg.n_connections]


@dataclass
class _Flow:
    sender: TcpSender
    receiver: Receiver
    access: LinkSpec
    access_ser_us: int
    access_prop_us: int
    access_free_us: int
    rng_random: object  # bound random() of the access-link stream
    truth: dict[int, DropCause]


class Simulation:
    def __init__(self, cfg: ScenarioConfig, trace_out: Optional[TextIO] = None):
        self.cfg = cfg.validate()
        self.events = EventQueue()
        self.rng = RngStreams(cfg.seed)
        self.trace = RunTrace()
        self.tracer = TraceWriter(trace_out) if trace_out is not None else None
        self.drops: list[DropRecord] = []
        self.ledger = MetadataLedger()
        self.end_us = to_us(cfg.duration)

        seg = cfg.seg_size
        self.bottleneck = LinkSpec(cfg.bottleneck_bandwidth, cfg.prop_delay, cfg.loss_prob)
        self.queue = DropTailQueue(cfg.queue_capacity)
        self.link = FifoLink(self.bottleneck, self.queue)
        self._bn_prop_us = self.bottleneck.prop_us
        self._bn_loss = cfg.loss_prob
        self._bn_random = self.rng.get("loss:bottleneck").random
        access = LinkSpec(cfg.access_bandwidth, cfg.prop_delay, cfg.loss_prob)
        self._ack_delay_us = access.prop_us + self.bottleneck.prop_us

        self.allocator: Optional[SimilarityAllocator] = None
        self.relay_profile: Optional[Profile] = None
        self.sender_profiles: list[Profile] = []
        if cfg.protocol == "tibias":
            self.relay_profile, self.sender_profiles = resolve_profiles(cfg)
            self.allocator = SimilarityAllocator(self.relay_profile, cfg.bottleneck_bandwidth,
                                                 self.ledger, k=cfg.k, threshld=cfg.threshld)

        self.flows: list[_Flow] = []
        for i in range(cfg.n_connections):
            truth: dict[int, DropCause] = {}
            sender = self._make_sender(i, truth.get)
            receiver = Receiver(i, seg, self.events, self._ack_sender(i), cfg.ack_delay)
            self.flows.append(_Flow(sender, receiver, access, access.serialization_us(seg),
                                    access.prop_us, 0, self.rng.get(f"loss:access:{i}").random,
                                    truth))
            self.trace.flow(i)

        jitter = self.rng.get("start")
        for i in range(cfg.n_connections):
            start = to_us(jitter.uniform(0.0, cfg.start_jitter)) if cfg.start_jitter else 0
            self.events.schedule(start, self._start_flow, i)

    # -- construction helpers ---------------------------------------------
    def _make_sender(self, i: int, truth) -> TcpSender:
        cfg = self.cfg
        emit = self._emitter(i)
        if cfg.protocol == "tibias":
            return TibiasSender(i, cfg.seg_size, self.events, emit, epsilon=cfg.epsilon,
                                gamma_dec=cfg.gamma_dec, gamma_inc=cfg.gamma_inc, k=cfg.k,
                                truth=truth, trace=self.tracer)
        return RenoSender(i, cfg.seg_size, self.events, emit, truth=truth, trace=self.tracer)

    def _emitter(self, i: int):
        def emit(seg: Segment) -> None:
            self._send(i, seg)
        return emit

    def _ack_sender(self, i: int):
        def send_ack(ack, at_us: int) -> None:
            self.events.schedule(at_us + self._ack_delay_us,
                                 self.flows[i].sender.on_ack, ack)
        return send_ack

    def _start_flow(self, i: int) -> None:
        flow = self.flows[i]
        if self.allocator is not None:
            self.allocator.join(i, self.sender_profiles[i], flow.sender.on_advertisement)
        flow.sender.start()

    # -- data path ------------------------------------------------------
    def _send(self, i: int, seg: Segment) -> None:
        flow = self.flows[i]
        fc = self.trace.flows[i]
        fc.sent += 1
        if seg.is_retransmit:
            fc.retransmits += 1
            flow.truth.pop(seg.seq, None)
        now = self.events.now_us
        lost = flow.rng_random() < self._bn_loss  # access and bottleneck share loss_prob
        start = flow.access_free_us if flow.access_free_us > now else now
        end = start + flow.access_ser_us
        flow.access_free_us = end
        self.events.schedule(end + flow.access_prop_us, self._at_relay, (seg, lost))
        if self.tracer:
            self.tracer(now / 1e6, i, "send", seq=seg.seq, retx=seg.is_retransmit)

    def _drop(self, fc, flow: _Flow, seg: Segment, cause: DropCause, at_us: int) -> None:
        if cause is WIRELESS:
            fc.wireless_drops += 1
            self.drops.append(DropRecord(seg.flow_id, seg.seq, cause, at_us))
        else:
            fc.congestion_drops += 1  # the queue already holds the record
        flow.truth[seg.seq] = cause
        if self.tracer:
            self.tracer(at_us / 1e6, seg.flow_id, "drop", seq=seg.seq, cause=cause)

    def _at_relay(self, arg) -> None:
        seg, lost = arg
        i = seg.flow_id
        flow = self.flows[i]
        fc = self.trace.flows[i]
        now = self.events.now_us
        if lost:
            self._drop(fc, flow, seg, WIRELESS, now)
            return
        tx_end = self.link.offer(seg, now)
        if tx_end is None:
            self._drop(fc, flow, seg, CONGESTION, now)
            return
        arrive = tx_end + self._bn_prop_us
        lost = self._bn_random() < self._bn_loss
        if arrive > self.end_us:
            fc.in_flight += 1
            if self.tracer:
                self.tracer(now / 1e6, i, "inflight", seq=seg.seq)
            return
        if lost:
            self._drop(fc, flow, seg, WIRELESS, arrive)
            return
        fc.delivered += 1
        if flow.receiver.on_segment(seg, arrive):
            fc.unique += 1
        if self.tracer:
            self.tracer(arrive / 1e6, i, "deliver", seq=seg.seq)

    # -- run --------------------------------------------------------------
    def run(self) -> MetricsRecord:
        cfg = self.cfg
        if not self.events.run(self.end_us):
            self.trace.exhausted_at = self.events.now
        for at, fn, arg in self.events.pending():
            if fn == self._at_relay:
                seg = arg[0]
                self.trace.flows[seg.flow_id].in_flight += 1
                if self.tracer:
                    self.tracer(self.end_us / 1e6, seg.flow_id, "inflight", seq=seg.seq)
        self.drops.extend(self.queue.records)
        self.drops.sort(key=lambda d: (d.time_us, d.flow_id, d.seq))
        for flow in self.flows:
            s = flow.sender
            fc = self.trace.flows[s.flow_id]
            fc.timeouts = s.timeouts
            fc.reductions = [(r.time, r.cause, r.truth) for r in s.reductions]
            fc.loss_events = [(e.time, e.label, e.truth) for e in s.loss_events]
        self.trace.metadata_bytes = self.ledger.bytes_exchanged
        self.trace.match_latency = list(self.ledger.match_latency_samples)
        if self.tracer and self.ledger.bytes_exchanged:
            self.tracer(cfg.duration, -1, "metadata", bytes=self.ledger.bytes_exchanged)
        return compute_metrics(self.trace, cfg.protocol, cfg.duration, cfg.seg_size,
                               cfg.bottleneck_bandwidth)


def run(cfg: ScenarioConfig, trace_out: Optional[TextIO] = None) -> MetricsRecord:
    """Simulate ``cfg`` to its duration and return the measured metrics."""
    return Simulation(cfg, trace_out).run()
