"""Per-run accounting and the metrics derived from it.

A run fills a :class:`RunTrace` with per-flow counters plus the
reduction and loss-classification logs. The same structure can be rebuilt
from a textual event trace, which is how the metric definitions are
checked against hand-computed cases.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

from .engine import DropCause


@dataclass
class FlowCounters:
    sent: int = 0
    delivered: int = 0  # intact arrivals at the receiver, duplicates included
    unique: int = 0  # distinct segments received
    wireless_drops: int = 0
    congestion_drops: int = 0
    in_flight: int = 0
    retransmits: int = 0
    timeouts: int = 0
    # (time, cause, truth) with truth the recorded drop cause of the segment
    reductions: list[tuple[float, str, Optional[DropCause]]] = field(default_factory=list)
    # (time, label, truth) for every N-dupack event
    loss_events: list[tuple[float, DropCause, Optional[DropCause]]] = field(default_factory=list)

    def conserved(self) -> bool:
        return self.sent == (self.delivered + self.wireless_drops
                             + self.congestion_drops + self.in_flight)


@dataclass
class RunTrace:
    flows: dict[int, FlowCounters] = field(default_factory=dict)
    metadata_bytes: int = 0
    match_latency: list[float] = field(default_factory=list)
    exhausted_at: Optional[float] = None

    def flow(self, fid: int) -> FlowCounters:
        fc = self.flows.get(fid)
        if fc is None:
            fc = self.flows[fid] = FlowCounters()
        return fc


def _cause(text: str) -> Optional[DropCause]:
    return None if text in ("none", "") else DropCause(text)


def ingest_trace(lines: Iterable[str], seg_size: int = 1500) -> RunTrace:
    """Rebuild counters from ``time flow event field=value...`` lines.

    Recognised events: send, deliver, drop, inflight, reduction, loss,
    metadata. Other events are ignored.
    """
    tr = RunTrace()
    seen: dict[int, set[int]] = {}
    for raw in lines:
        parts = raw.split()
        if len(parts) < 3:
            continue
        t, fid, ev = float(parts[0]), int(parts[1]), parts[2]
        kv = dict(p.split("=", 1) for p in parts[3:])
        fc = tr.flow(fid) if fid >= 0 else None
        if ev == "send":
            fc.sent += 1
            if kv.get("retx") == "1":
                fc.retransmits += 1
        elif ev == "deliver":
            fc.delivered += 1
            s = seen.setdefault(fid, set())
            seq = int(kv["seq"])
            if seq not in s:
                s.add(seq)
                fc.unique += 1
        elif ev == "drop":
            if kv["cause"] == DropCause.WIRELESS.value:
                fc.wireless_drops += 1
            else:
                fc.congestion_drops += 1
        elif ev == "inflight":
            fc.in_flight += 1
        elif ev == "reduction":
            fc.reductions.append((t, kv["cause"], _cause(kv.get("truth", "none"))))
            if kv["cause"] == "rto":
                fc.timeouts += 1
        elif ev == "loss":
            fc.loss_events.append((t, DropCause(kv["label"]), _cause(kv.get("truth", "none"))))
        elif ev == "metadata":
            tr.metadata_bytes += int(kv["bytes"])
    return tr


@dataclass(frozen=True)
class FlowMetrics:
    flow_id: int
    goodput: float  # bytes/second
    retransmissions: int
    superfluous_reductions: int
    reductions: int
    timeouts: int


@dataclass(frozen=True)
class MetricsRecord:
    protocol: str
    duration: float
    goodput: float  # aggregate, bytes/second
    link_utilization: float
    retransmission_count: int
    superfluous_reductions: int
    classification_accuracy: Optional[float]  # None when no event could be scored
    classified_events: int
    metadata_bytes: int
    segments_sent: int
    flows: tuple[FlowMetrics, ...] = ()
    exhausted_at: Optional[float] = None
    # wall-clock figures vary between machines, so they stay out of equality
    match_latency_mean: float = field(default=0.0, compare=False)
    match_latency_max: float = field(default=0.0, compare=False)

    @property
    def goodput_bps(self) -> float:
        return self.goodput * 8.0

    @property
    def retransmission_ratio(self) -> float:
        return self.retransmission_count / self.segments_sent if self.segments_sent else 0.0


def superfluous(fc: FlowCounters) -> int:
    return sum(1 for _, _, truth in fc.reductions if truth is DropCause.WIRELESS)


def compute_metrics(trace: RunTrace, protocol: str, duration: float, seg_size: int,
                    bottleneck_bandwidth: float) -> MetricsRecord:
    flows = []
    delivered = unique = retx = sup = sent = 0
    scored = correct = 0
    for fid in sorted(trace.flows):
        fc = trace.flows[fid]
        gp = fc.unique * seg_size / duration if duration > 0 else 0.0
        s = superfluous(fc)
        flows.append(FlowMetrics(fid, gp, fc.retransmits, s, len(fc.reductions), fc.timeouts))
        delivered += fc.delivered
        unique += fc.unique
        retx += fc.retransmits
        sup += s
        sent += fc.sent
        for _, label, truth in fc.loss_events:
            # a dupack episode without any recorded drop was spurious; it has
            # no ground truth to be scored against
            if truth is None:
                continue
            scored += 1
            correct += label is truth
    if duration > 0:
        goodput = unique * seg_size / duration
        util = min(1.0, delivered * seg_size / (bottleneck_bandwidth * duration))
    else:
        goodput = util = 0.0
    lat = trace.match_latency
    return MetricsRecord(
        protocol=protocol,
        duration=duration,
        goodput=goodput,
        link_utilization=util,
        retransmission_count=retx,
        superfluous_reductions=sup,
        classification_accuracy=correct / scored if scored else None,
        classified_events=scored,
        metadata_bytes=trace.metadata_bytes,
        segments_sent=sent,
        flows=tuple(flows),
        exhausted_at=trace.exhausted_at,
        match_latency_mean=statistics.fmean(lat) if lat else 0.0,
        match_latency_max=max(lat) if lat else 0.0,
    )


class TraceWriter:
    """Formats events as ``time flow event field=value...`` lines."""

    def __init__(self, out: TextIO):
        self.out = out

    def __call__(self, time: float, flow: int, event: str, **fields) -> None:
        extra = "".join(f" {k}={_fmt(v)}" for k, v in fields.items())
        self.out.write(f"{time:.6f} {flow} {event}{extra}\n")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, DropCause):
        return v.value
    return str(v)
