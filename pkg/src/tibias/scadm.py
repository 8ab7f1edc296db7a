"""Socially-aware congestion avoidance and loss differentiation.

The sender steers its window toward a target derived from the similarity
interest rate. Outside an epsilon band around that target it moves by a
step proportional to the gap between the interest rate and the measured
bandwidth; on three duplicate ACKs it compares its window to the band to
decide whether the loss was caused by congestion or by the wireless link.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .allocator import Advertisement, interest_rate
from .bandwidth import BandwidthEstimator
from .engine import Ack, DropCause
from .transport import TcpSender

INITIAL_SSTHRESH = 64
ABC_LIMIT = 2  # most segments one ACK may add to the window in slow start
DUP_INFLATE = 3  # segments that left the network with the first three dupacks


class Phase(str, enum.Enum):
    SLOW_START = "SlowStart"
    SOCIAL_AVOIDANCE = "SocialAvoidance"
    RECOVERY = "Recovery"


class Branch(str, enum.Enum):
    HOLD = "hold"
    DECREASE = "decrease"
    INCREASE = "increase"


def window_from_rate(rate: float, rtt: float, seg_size: int) -> int:
    """Whole segments a rate keeps in flight over ``rtt``; never below one."""
    if rtt <= 0 or seg_size <= 0:
        raise ValueError("rtt and seg_size must be positive")
    # the epsilon absorbs float noise so that 750000*0.1/1500 is 50, not 49
    return max(1, math.floor(rate * rtt / seg_size + 1e-9))


@dataclass
class FlowState:
    C_l: int = 1
    C_m: int = 1
    ssthresh: int = INITIAL_SSTHRESH
    phase: Phase = Phase.SLOW_START
    epsilon: float = 0.3
    gamma_dec: float = 0.5
    gamma_inc: float = 0.8
    rtt_avg: Optional[float] = None
    rtt_min: Optional[float] = None
    seg_size: int = 1500
    SIR_m: Optional[float] = None
    BE_m: Optional[float] = None
    dupack_count: int = 0
    rto: float = 1.0
    retransmit_count: int = 0
    window_reduction_log: list[tuple[float, str]] = field(default_factory=list)

    def target(self) -> Optional[int]:
        """Window matching the interest rate over the unloaded path, if known."""
        rtt = self.rtt_min if self.rtt_min is not None else self.rtt_avg
        if self.SIR_m is None or rtt is None or rtt <= 0:
            return None
        return window_from_rate(self.SIR_m, rtt, self.seg_size)

    def band(self, S: int) -> Branch:
        """Closed band: the two edges count as inside."""
        if self.C_l > (1 + self.epsilon) * S:
            return Branch.DECREASE
        if self.C_l < (1 - self.epsilon) * S:
            return Branch.INCREASE
        return Branch.HOLD

    def step(self) -> float:
        """Window-scale gap between interest rate and measured bandwidth."""
        be = self.BE_m if self.BE_m is not None else 0.0
        rtt = self.rtt_avg if self.rtt_avg is not None else self.rtt_min
        return abs(self.SIR_m - be) * rtt / self.seg_size


def _decrease(st: FlowState) -> int:
    dC = st.step() + st.gamma_dec
    return max(1, math.floor(st.C_l - dC))


def _increase(st: FlowState) -> int:
    dC = st.step() * st.gamma_inc
    return max(1, math.floor(st.C_l + max(dC, 1.0)))


def scas_adjust(state: FlowState) -> FlowState:
    """One avoidance step; returns a new state with ``C_m`` set.

    Without an interest rate the step falls back to linear growth of one
    segment.
    """
    S = state.target()
    if S is None or state.rtt_avg is None:
        return replace(state, C_m=max(1, state.C_l + 1))
    branch = state.band(S)
    if branch is Branch.DECREASE:
        c_m = _decrease(state)
    elif branch is Branch.INCREASE:
        c_m = _increase(state)
    else:
        c_m = state.C_l
    return replace(state, C_m=c_m)


def sds_classify_and_act(state: FlowState, now: float = 0.0
                         ) -> tuple[FlowState, Optional[DropCause]]:
    """Label the loss behind an N-dupack event and set the recovery window.

    Returns the new state (phase Recovery) and the label, or None when no
    interest rate is known and the Reno halving was applied instead.
    """
    S = state.target()
    log = list(state.window_reduction_log)
    if S is None or state.rtt_avg is None:
        half = max(state.C_l // 2, 2)
        log.append((now, "dupack"))
        return replace(state, ssthresh=half, C_m=half, phase=Phase.RECOVERY,
                       window_reduction_log=log), None
    branch = state.band(S)
    if branch is Branch.DECREASE:
        c_m = _decrease(state)
        label = DropCause.CONGESTION
        log.append((now, "classified-congestion"))
    elif branch is Branch.INCREASE:
        c_m = _increase(state)
        label = DropCause.WIRELESS
    else:
        c_m = state.C_l
        label = DropCause.WIRELESS
    return replace(state, C_m=c_m, phase=Phase.RECOVERY, window_reduction_log=log), label


def on_rto(state: FlowState, now: float = 0.0) -> FlowState:
    log = list(state.window_reduction_log)
    log.append((now, "rto"))
    return replace(state, ssthresh=max(state.C_l // 2, 2), C_l=1, C_m=1,
                   phase=Phase.SLOW_START, dupack_count=0,
                   rto=min(2 * state.rto, 64.0), window_reduction_log=log)


class TibiasSender(TcpSender):
    """Sender driven by the similarity interest rate advertised by the relay."""

    protocol = "tibias"

    def __init__(self, flow_id, seg_size, events, emit, *, epsilon=0.3,
                 gamma_dec=0.5, gamma_inc=0.8, k=0.5, **kw):
        super().__init__(flow_id, seg_size, events, emit, **kw)
        self.fs = FlowState(seg_size=seg_size, epsilon=epsilon,
                            gamma_dec=gamma_dec, gamma_inc=gamma_inc)
        self.k = k
        self.bem = BandwidthEstimator(seg_size)
        self.adv: Optional[Advertisement] = None
        self.inflate = 0
        self._round_end = 0
        self._sir_at: Optional[float] = None
        self.sir_trace: list[tuple[float, float]] = []

    # -- relay advertisements -------------------------------------------
    def on_advertisement(self, adv: Advertisement) -> None:
        self.adv = adv
        self._sir_at = None  # T changed: refresh at the next opportunity

    def _sync_rtt(self) -> None:
        fs = self.fs
        fs.rtt_avg = self.rtt.srtt
        fs.rtt_min = self.rtt.rtt_min
        fs.rto = self.rtt.rto

    def refresh_sir(self, now: float, force: bool = False) -> Optional[float]:
        """Recompute the interest rate, at most once per RTT unless forced."""
        fs = self.fs
        if self.adv is None or fs.rtt_avg is None:
            return fs.SIR_m
        if not force and self._sir_at is not None and now - self._sir_at < fs.rtt_avg:
            return fs.SIR_m
        a = self.adv
        fs.SIR_m = interest_rate(a.sim, a.bandwidth, max(a.T, 1), fs.C_l,
                                 self.seg_size, fs.rtt_avg, self.k)
        self._sir_at = now
        self.sir_trace.append((now, fs.SIR_m))
        return fs.SIR_m

    # -- window ------------------------------------------------------------
    @property
    def cwnd(self) -> int:
        return self.fs.C_l

    def window(self) -> int:
        if self.in_recovery:
            return self.fs.C_l + self.inflate
        return self.fs.C_l

    def _commit(self, fs: FlowState) -> None:
        fs.C_l = fs.C_m
        self.fs = fs

    def _on_new_ack(self, n_acked: int, ack: Ack, now: float) -> None:
        self._sync_rtt()
        fs = self.fs
        fs.BE_m = self.bem.update(now, ack.acked_bytes or n_acked * self.seg_size,
                                  fs.C_l, fs.rtt_min, fs.rtt_avg)
        fs.dupack_count = 0
        if fs.phase is Phase.SLOW_START:
            fs.C_l += min(n_acked, ABC_LIMIT)
            fs.C_m = fs.C_l
            if fs.C_l >= fs.ssthresh:
                fs.phase = Phase.SOCIAL_AVOIDANCE
                self._round_end = self.snd_nxt
            return
        fs.phase = Phase.SOCIAL_AVOIDANCE
        if self.snd_una > self._round_end:
            self._round_end = self.snd_nxt
            self.refresh_sir(now)
            self._commit(scas_adjust(fs))
            if self.trace:
                self.trace(now, self.flow_id, "scas", cwnd=self.fs.C_l,
                           sir=round(fs.SIR_m or 0.0, 3), be=round(fs.BE_m or 0.0, 3))

    def _on_triple_dupack(self, now: float) -> None:
        self._sync_rtt()
        self.refresh_sir(now)
        fs = self.fs
        fs.dupack_count = self.dupacks
        seq = self.snd_una
        new, label = sds_classify_and_act(fs, now)
        if label is None:
            new.ssthresh = new.C_m
            self.log_reduction("dupack", seq, now)
        elif label is DropCause.CONGESTION:
            self.log_reduction("classified-congestion", seq, now)
        self.log_loss_event(seq, label or DropCause.CONGESTION, now)
        if self.trace:
            self.trace(now, self.flow_id, "sds", seq=seq,
                       label=label.value if label else "fallback",
                       cwnd=fs.C_l, new=new.C_m)
        self._commit(new)
        self.inflate = DUP_INFLATE

    def _on_recovery_dupack(self) -> None:
        self.inflate += 1

    def _on_partial_ack(self, n_acked: int) -> None:
        self._sync_rtt()
        self.inflate = max(0, self.inflate - n_acked) + 1

    def _on_full_ack(self, n_acked: int, now: float) -> None:
        self._sync_rtt()
        self.inflate = 0
        self.fs.phase = Phase.SOCIAL_AVOIDANCE
        self.fs.dupack_count = 0
        self._round_end = self.snd_nxt

    def _on_timeout(self, now: float) -> None:
        self._sync_rtt()
        seq = self.snd_una
        self.fs = on_rto(self.fs, now)
        self.fs.retransmit_count = self.retransmit_count
        self.inflate = 0
        self.log_reduction("rto", seq, now)

    def explicit_retransmit(self, seq: int) -> bool:
        sent = super().explicit_retransmit(seq)
        self.fs.retransmit_count = self.retransmit_count
        return sent

