"""Reno congestion control with NewReno partial-ACK handling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .engine import Ack, DropCause
from .scadm import ABC_LIMIT, INITIAL_SSTHRESH
from .transport import TcpSender


class RenoPhase(str, enum.Enum):
    SLOW_START = "SlowStart"
    CONGESTION_AVOIDANCE = "CongestionAvoidance"
    FAST_RECOVERY = "FastRecovery"


@dataclass
class RenoState:
    cwnd: float = 1.0
    ssthresh: float = INITIAL_SSTHRESH
    dupack_count: int = 0
    rto: float = 1.0
    phase: RenoPhase = RenoPhase.SLOW_START
    ca_acked: int = 0  # segments acknowledged toward the next avoidance increment


def reno_on_ack(state: RenoState, n_acked: int = 1) -> RenoState:
    """New cumulative ACK covering ``n_acked`` segments."""
    if state.phase is RenoPhase.FAST_RECOVERY:
        return replace(state, cwnd=state.ssthresh, dupack_count=0, ca_acked=0,
                       phase=RenoPhase.CONGESTION_AVOIDANCE)
    cwnd = state.cwnd
    phase = state.phase
    counted = state.ca_acked
    if phase is RenoPhase.SLOW_START:
        for _ in range(min(n_acked, ABC_LIMIT)):
            cwnd += 1
            if cwnd >= state.ssthresh:
                phase = RenoPhase.CONGESTION_AVOIDANCE
                break
    else:
        # one segment per window's worth of acknowledged segments
        counted += n_acked
        while counted >= int(cwnd):
            counted -= int(cwnd)
            cwnd += 1
    return replace(state, cwnd=cwnd, phase=phase, dupack_count=0, ca_acked=counted)


def reno_on_dupack(state: RenoState) -> RenoState:
    """Third duplicate ACK: halve, inflate by three, enter fast recovery."""
    half = max(int(state.cwnd) // 2, 2)
    return replace(state, ssthresh=half, cwnd=half + 3, dupack_count=3,
                   phase=RenoPhase.FAST_RECOVERY, ca_acked=0)


def reno_on_rto(state: RenoState) -> RenoState:
    return replace(state, ssthresh=max(int(state.cwnd) // 2, 2), cwnd=1.0,
                   phase=RenoPhase.SLOW_START, dupack_count=0, ca_acked=0,
                   rto=min(2 * state.rto, 64.0))


class RenoSender(TcpSender):
    protocol = "reno"

    def __init__(self, flow_id, seg_size, events, emit, **kw):
        super().__init__(flow_id, seg_size, events, emit, **kw)
        self.rs = RenoState()

    @property
    def cwnd(self) -> float:
        return self.rs.cwnd

    def window(self) -> int:
        return int(self.rs.cwnd)

    def _on_new_ack(self, n_acked: int, ack: Ack, now: float) -> None:
        self.rs = reno_on_ack(self.rs, n_acked)

    def _on_triple_dupack(self, now: float) -> None:
        seq = self.snd_una
        self.rs = reno_on_dupack(self.rs)
        self.log_reduction("dupack", seq, now)
        # every loss is treated as congestion
        self.log_loss_event(seq, DropCause.CONGESTION, now)

    def _on_recovery_dupack(self) -> None:
        self.rs.cwnd += 1

    def _on_partial_ack(self, n_acked: int) -> None:
        rs = self.rs
        rs.cwnd = max(rs.cwnd - n_acked + 1, 1.0)

    def _on_full_ack(self, n_acked: int, now: float) -> None:
        self.rs = reno_on_ack(self.rs, n_acked)

    def _on_timeout(self, now: float) -> None:
        seq = self.snd_una
        self.rs = reno_on_rto(replace(self.rs, rto=self.rtt.rto))
        self.log_reduction("rto", seq, now)
