"""Similarity-based bandwidth allocation at the intermediate node.

Each sender learns the matched similarity, the active connection count and
the node's bandwidth figure through handshakes, and turns them into a
similarity interest rate (bytes/second) that drives its window target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .profiles import (HEADER_BYTES, HandshakeResult, MetadataLedger, Profile,
                       handshake)

# header + T + sim + bandwidth figure
ADVERTISEMENT_BYTES = HEADER_BYTES + 8 + 8 + 8


def raw_sir(sim: float, be: float, T: int, c_l: float, seg_size: int,
            rtt: float, k: float = 0.5) -> float:
    """Unclamped interest rate; may be negative for flows far above their share."""
    if T < 1:
        raise ValueError("connection count must be at least 1")
    if rtt <= 0:
        raise ValueError("rtt must be positive")
    share = be / T
    return sim * share + k * (share - c_l * seg_size / rtt)


def sim_cap(sim: float, be: float) -> float:
    return sim * be


def clamp_sir(raw: float, cap: float) -> float:
    if cap < 0:
        raise ValueError("cap must be non-negative")
    return min(max(raw, 0.0), cap)


def interest_rate(sim: float, be: float, T: int, c_l: float, seg_size: int,
                  rtt: float, k: float = 0.5) -> float:
    return clamp_sir(raw_sir(sim, be, T, c_l, seg_size, rtt, k), sim_cap(sim, be))


@dataclass(frozen=True)
class Advertisement:
    T: int
    sim: float
    bandwidth: float


@dataclass
class AllocatorState:
    T: int = 0
    k: float = 0.5
    sims: dict[int, float] = field(default_factory=dict)


class SimilarityAllocator:
    """Membership, matching and advertisement bookkeeping of the relay node.

    ``bandwidth`` is the forwarding rate the node offers on its outgoing
    link; it is what the per-connection share is carved from.
    """

    def __init__(self, profile: Profile, bandwidth: float, ledger: MetadataLedger,
                 k: float = 0.5, threshld: float = 0.6):
        if not 0.0 <= k <= 1.0:
            raise ValueError("k must lie in [0, 1]")
        self.profile = profile
        self.bandwidth = bandwidth
        self.ledger = ledger
        self.threshld = threshld
        self.state = AllocatorState(k=k)
        self._active: dict[int, Callable[[Advertisement], None]] = {}
        self.handshakes: dict[int, HandshakeResult] = {}

    @property
    def T(self) -> int:
        return self.state.T

    def join(self, flow_id: int, sender: Profile,
             notify: Optional[Callable[[Advertisement], None]] = None) -> HandshakeResult:
        result = handshake(sender, self.profile, self.ledger, self.state.T + 1, self.threshld)
        self.handshakes[flow_id] = result
        self.state.sims[flow_id] = result.sim
        self._active[flow_id] = notify or (lambda adv: None)
        self.on_membership_change(self._active)
        return result

    def leave(self, flow_id: int) -> None:
        self._active.pop(flow_id, None)
        self.state.sims.pop(flow_id, None)
        self.on_membership_change(self._active)

    def on_membership_change(self, flows: Iterable[int]) -> None:
        """Refresh T and push (T, sim, bandwidth) to every active sender."""
        flows = list(flows)
        self.state.T = len(flows)
        for fid in flows:
            self.ledger.advertisements += 1
            self.ledger.charge(ADVERTISEMENT_BYTES)
            notify = self._active.get(fid)
            if notify is not None:
                notify(Advertisement(self.state.T, self.state.sims.get(fid, 0.0),
                                     self.bandwidth))
