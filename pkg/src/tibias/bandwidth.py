"""Per-flow available-bandwidth estimation, refreshed on each new cumulative ACK.

The estimator combines a window-derived sending rate, an ACK-rate sample
taken over an adaptive interval, and an exponential filter whose gain
depends on how much data the interval carried relative to the window.
Rates are bytes/second; windows are converted to bytes with the segment
size before they meet byte quantities.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional


def send_rate(c_l: float, seg_size: int, rtt_min: Optional[float]) -> Optional[float]:
    """Rate the current window would achieve over an unloaded path.

    Returns None while no RTT has been measured.
    """
    if rtt_min is None or rtt_min <= 0:
        return None
    return c_l * seg_size / rtt_min


def sample_interval(sr: float, be_prev: float, rtt: float) -> float:
    """Length of the ACK-counting interval; non-positive means skip the sample."""
    if sr <= 0:
        raise ValueError("send rate must be positive")
    return (sr - be_prev) * rtt / sr


def sample_bw(ack_data: float, t_m: float) -> Optional[float]:
    if t_m <= 0:
        return None
    return ack_data / t_m


def coefficient(c_l_bytes: float, ack_data: float) -> float:
    """Filter gain in (-1, 1]; equals 1 when nothing was acknowledged."""
    denom = 4.0 * c_l_bytes + ack_data
    if denom <= 0:
        raise ValueError("window and acknowledged data cannot both be zero")
    return (4.0 * c_l_bytes - ack_data) / denom


def filter_step(sigma: float, be_prev: float, be_s: float) -> float:
    return sigma * be_prev + (1.0 - sigma) * be_s


@dataclass
class BemState:
    be: Optional[float] = None  # current estimate, None until bootstrapped
    be_prev: Optional[float] = None
    rtt_min: Optional[float] = None
    rtt_avg: Optional[float] = None
    last_sample: Optional[float] = None
    sigma: Optional[float] = None
    seeded: bool = False  # a real ACK-rate sample has been taken
    samples: int = 0
    skipped: int = 0
    clamped: int = 0


@dataclass
class BandwidthEstimator:
    """Stateful wrapper that keeps the ACK history the sampling interval needs."""

    seg_size: int
    state: BemState = field(default_factory=BemState)
    _acks: deque = field(default_factory=deque, repr=False)  # (time_s, bytes)

    @property
    def estimate(self) -> Optional[float]:
        return self.state.be

    def _acked_since(self, t0: float) -> float:
        total = 0
        for t, b in reversed(self._acks):
            if t <= t0:
                break
            total += b
        return total

    def update(self, now: float, acked_bytes: int, c_l: float,
               rtt_min: Optional[float], rtt_avg: Optional[float]) -> Optional[float]:
        st = self.state
        st.rtt_min, st.rtt_avg = rtt_min, rtt_avg
        sr = send_rate(c_l, self.seg_size, rtt_min)
        if sr is None or rtt_avg is None:
            return st.be

        acks = self._acks
        acks.append((now, acked_bytes))
        horizon = now - rtt_avg
        while acks and acks[0][0] <= horizon:
            acks.popleft()

        if st.be is None:
            st.be = self.seg_size / rtt_avg
        if st.be > sr:
            # the window can no longer carry the held estimate; without this
            # the interval stays negative and the estimate never moves again
            st.be = sr
            st.clamped += 1
        t_m = sample_interval(sr, st.be, rtt_avg)
        if t_m <= 0:
            st.skipped += 1
            st.be_prev = st.be
            return st.be
        ack_data = self._acked_since(now - t_m)
        be_s = ack_data / t_m
        st.last_sample = be_s
        st.samples += 1
        st.be_prev = st.be
        if not st.seeded:
            st.seeded = True
            st.sigma = None
            st.be = be_s
            return st.be
        sigma = coefficient(c_l * self.seg_size, ack_data)
        st.sigma = sigma
        st.be = filter_step(sigma, st.be_prev, be_s)
        return st.be


def update(state: BemState, sigma: float, be_s: Optional[float]) -> BemState:
    """Apply one filter step to ``state``; an absent sample holds the estimate."""
    state.be_prev = state.be
    if be_s is not None and state.be is not None:
        state.sigma = sigma
        state.last_sample = be_s
        state.be = filter_step(sigma, state.be, be_s)
    return state
