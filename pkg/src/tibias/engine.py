"""Discrete-event core: clock, event queue, links, drop-tail queues.

All timestamps are integer microseconds internally so that tie-breaking
and arithmetic are exact and portable. Public helpers accept and report
seconds where that reads better.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Optional

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class DropCause(str, enum.Enum):
    CONGESTION = "congestion"
    WIRELESS = "wireless"


@dataclass(slots=True)
class Segment:
    flow_id: int
    seq: int
    size_bytes: int
    sent_at_us: int
    is_retransmit: bool = False

    @property
    def sent_at(self) -> float:
        return self.sent_at_us / US_PER_S


@dataclass(slots=True)
class Ack:
    flow_id: int
    cum_ack: int
    echo_us: int
    acked_bytes: int

    @property
    def echo_ts(self) -> float:
        return self.echo_us / US_PER_S


@dataclass(slots=True)
class DropRecord:
    flow_id: int
    seq: int
    cause: DropCause
    time_us: int

    @property
    def time(self) -> float:
        return self.time_us / US_PER_S


@dataclass(frozen=True)
class LinkSpec:
    bandwidth: float  # bytes/second
    prop_delay: float  # seconds
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("link bandwidth must be positive")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")

    def serialization_us(self, size_bytes: int) -> int:
        return int(round(size_bytes * US_PER_S / self.bandwidth))

    @property
    def prop_us(self) -> int:
        return to_us(self.prop_delay)


@dataclass(frozen=True, slots=True)
class DeliveryOutcome:
    delivered: bool
    arrival_us: int
    cause: Optional[DropCause] = None

    @property
    def arrival_time(self) -> float:
        return self.arrival_us / US_PER_S


def transmit(seg: Segment, link: LinkSpec, rng: random.Random,
             depart_us: Optional[int] = None) -> DeliveryOutcome:
    """Send one segment across a lossy link.

    Exactly one uniform draw is consumed whatever the loss probability, so
    the loss pattern of a stream does not shift when ``loss_prob`` changes.
    A dropped segment reports the instant it would have arrived.
    """
    start = seg.sent_at_us if depart_us is None else depart_us
    arrival = start + link.serialization_us(seg.size_bytes) + link.prop_us
    if rng.random() < link.loss_prob:
        return DeliveryOutcome(False, arrival, DropCause.WIRELESS)
    return DeliveryOutcome(True, arrival)


class DropTailQueue:
    """Byte-bounded FIFO buffer; arrivals that do not fit are discarded."""

    def __init__(self, capacity_bytes: int):
        if capacity_bytes <= 0:
            raise ValueError("queue capacity must be positive")
        self.capacity_bytes = capacity_bytes
        self.occupancy_bytes = 0
        self.drops = 0
        self.peak_bytes = 0
        self.records: list[DropRecord] = []

    def enqueue(self, seg: Segment, now_us: int = 0) -> bool:
        if self.occupancy_bytes + seg.size_bytes > self.capacity_bytes:
            self.drops += 1
            self.records.append(
                DropRecord(seg.flow_id, seg.seq, DropCause.CONGESTION, now_us))
            return False
        occ = self.occupancy_bytes + seg.size_bytes
        assert occ <= self.capacity_bytes
        self.occupancy_bytes = occ
        if occ > self.peak_bytes:
            self.peak_bytes = occ
        return True

    def release(self, size_bytes: int) -> None:
        self.occupancy_bytes -= size_bytes


def enqueue(seg: Segment, q: DropTailQueue, now_us: int = 0) -> bool:
    """True when accepted; a rejected segment leaves a congestion DropRecord."""
    return q.enqueue(seg, now_us)


class FifoLink:
    """A drop-tail queue in front of a constant-rate serial link.

    Segments leave the buffer once fully serialized. Because service is
    FIFO at a fixed rate, the departure time of every accepted segment is
    known on arrival and no per-departure event is needed; the buffer is
    drained lazily up to the current time.
    """

    def __init__(self, spec: LinkSpec, queue: DropTailQueue):
        self.spec = spec
        self.queue = queue
        self.free_at_us = 0
        self._pending: deque[tuple[int, int]] = deque()  # (tx_end_us, size)
        self._ser: dict[int, int] = {}

    def drain(self, now_us: int) -> None:
        pending = self._pending
        q = self.queue
        while pending and pending[0][0] <= now_us:
            q.occupancy_bytes -= pending.popleft()[1]

    def offer(self, seg: Segment, now_us: int) -> Optional[int]:
        """Enqueue ``seg``; return the time its serialization ends, or None."""
        pending = self._pending
        q = self.queue
        while pending and pending[0][0] <= now_us:
            q.occupancy_bytes -= pending.popleft()[1]
        if not q.enqueue(seg, now_us):
            return None
        start = self.free_at_us if self.free_at_us > now_us else now_us
        ser = self._ser.get(seg.size_bytes)
        if ser is None:
            ser = self._ser[seg.size_bytes] = self.spec.serialization_us(seg.size_bytes)
        end = start + ser
        self.free_at_us = end
        self._pending.append((end, seg.size_bytes))
        return end


class EventQueue:
    """Virtual clock plus a (time, insertion order) priority queue."""

    def __init__(self):
        self._heap: list[tuple[int, int, Callable[[Any], None], Any]] = []
        self._seq = 0
        self.now_us = 0

    @property
    def now(self) -> float:
        return self.now_us / US_PER_S

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, at_us: int, fn: Callable[[Any], None], arg: Any = None) -> None:
        if at_us < self.now_us:
            raise SchedulingError(
                f"event at {at_us} us scheduled in the past (now {self.now_us} us)")
        heapq.heappush(self._heap, (at_us, self._seq, fn, arg))
        self._seq += 1

    def schedule_s(self, at: float, fn: Callable[[Any], None], arg: Any = None) -> None:
        self.schedule(to_us(at), fn, arg)

    def run(self, until_us: int) -> bool:
        """Dispatch events with timestamp <= ``until_us``.

        Returns False when the queue ran dry before ``until_us``.
        """
        heap = self._heap
        pop = heapq.heappop
        while heap:
            if heap[0][0] > until_us:
                self.now_us = until_us
                return True
            at, _, fn, arg = pop(heap)
            self.now_us = at
            fn(arg)
        self.now_us = max(self.now_us, until_us)
        return False

    def pending(self):
        return [(at, fn, arg) for at, _, fn, arg in self._heap]


class RngStreams:
    """Named, independent random streams derived from one scenario seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def get(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[name] = rng
        return rng
