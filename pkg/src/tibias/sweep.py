"""Parameter sweeps over one scenario axis, with CSV output and trend checks."""

from __future__ import annotations

import csv
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .config import MBPS, ConfigError, ScenarioConfig
from .metrics import MetricsRecord
from .network import run

CSV_COLUMNS = ("scenario_id", "protocol", "seed", "axis", "axis_value", "goodput_bps",
               "utilization", "retx", "superfluous", "class_acc", "metadata_bytes",
               "config_hash", "error")

PROTOCOLS = ("tibias", "reno")


def _set_loss(cfg, v):
    return cfg.with_(loss_prob=v)


def _set_delay(cfg, v):  # milliseconds
    return cfg.with_(prop_delay=v / 1000.0)


def _set_bandwidth(cfg, v):  # Mbit/s, applied to access and bottleneck links
    return cfg.with_(access_bandwidth=v * MBPS, bottleneck_bandwidth=v * MBPS)


def _set_queue(cfg, v):  # kilobytes
    return cfg.with_(queue_capacity=int(round(v * 1000)))


def _set_connections(cfg, v):
    if v != int(v):
        raise ConfigError(f"connections must be whole, got {v}")
    return cfg.with_(n_connections=int(v))


AXES: dict[str, Callable[[ScenarioConfig, float], ScenarioConfig]] = {
    "loss": _set_loss,
    "delay": _set_delay,
    "bandwidth": _set_bandwidth,
    "queue": _set_queue,
    "connections": _set_connections,
}


@dataclass(frozen=True)
class Preset:
    axis: str
    points: tuple[float, ...]
    base: dict


PRESETS: dict[str, Preset] = {
    "loss-utilization": Preset("loss", (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2), {}),
    "loss-heavy": Preset("loss", (0.05, 0.075, 0.10), {}),
    "connections": Preset("connections", tuple(range(1, 21)),
                          {"loss_prob": 0.03, "access_bandwidth": 26 * MBPS,
                           "bottleneck_bandwidth": 26 * MBPS, "prop_delay": 0.05}),
    "delay": Preset("delay", (50, 100, 150), {"loss_prob": 0.02}),
    "bandwidth": Preset("bandwidth", (10, 20, 30, 40), {"loss_prob": 0.03, "prop_delay": 0.05}),
    "queue": Preset("queue", (40, 50, 60, 70, 80), {"loss_prob": 0.02}),
}


@dataclass(frozen=True)
class SweepRow:
    scenario_id: str
    protocol: str
    seed: int
    axis: str
    axis_value: float
    config_hash: str
    metrics: Optional[MetricsRecord] = None
    error: str = ""

    def as_csv(self) -> list[str]:
        m = self.metrics
        if m is None:
            vals = ["", "", "", "", "", ""]
        else:
            acc = "" if m.classification_accuracy is None else f"{m.classification_accuracy:.6f}"
            vals = [f"{m.goodput_bps:.3f}", f"{m.link_utilization:.6f}",
                    str(m.retransmission_count), str(m.superfluous_reductions), acc,
                    str(m.metadata_bytes)]
        return [self.scenario_id, self.protocol, str(self.seed), self.axis,
                repr(float(self.axis_value)), *vals, self.config_hash, self.error]


def seeds_for(base_seed: int, n: int) -> list[int]:
    return [base_seed + i for i in range(n)]


def _job(args) -> SweepRow:
    cfg, axis, value = args
    try:
        m = run(cfg)
        return SweepRow(cfg.scenario_id, cfg.protocol, cfg.seed, axis, value, cfg.config_hash(), m)
    except Exception as e:  # a failing point is reported, the sweep goes on
        return SweepRow(cfg.scenario_id, cfg.protocol, cfg.seed, axis, value,
                        cfg.config_hash(), None, f"{type(e).__name__}: {e}")


def plan(base: ScenarioConfig, axis: str, points: Sequence[float], seeds: int = 3,
         protocols: Iterable[str] = PROTOCOLS) -> list[tuple[ScenarioConfig, str, float]]:
    if axis not in AXES:
        raise ConfigError(f"unknown axis {axis!r}; expected one of {', '.join(AXES)}")
    if seeds < 1:
        raise ConfigError("seeds must be at least 1")
    jobs = []
    for value in sorted(points):
        point_cfg = AXES[axis](base, value)
        for proto in sorted(protocols):
            for seed in seeds_for(base.seed, seeds):
                jobs.append((point_cfg.with_(protocol=proto, seed=seed), axis, value))
    return jobs


def run_sweep(base: ScenarioConfig, axis: str, points: Sequence[float], seeds: int = 3,
              protocols: Iterable[str] = PROTOCOLS, jobs: int = 1) -> list[SweepRow]:
    """One row per (point, protocol, seed), ordered by exactly that key."""
    work = plan(base, axis, points, seeds, protocols)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_job, work))
    else:
        rows = [_job(w) for w in work]
    rows.sort(key=lambda r: (r.axis_value, r.protocol, r.seed))
    return rows


def to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


# -- aggregation and trend checks -------------------------------------------

def mean_by_point(rows: Iterable[SweepRow], attr: str) -> dict[str, dict[float, float]]:
    """protocol -> axis value -> mean of ``attr`` over seeds (error rows skipped)."""
    acc: dict[str, dict[float, list[float]]] = {}
    for r in rows:
        if r.metrics is None:
            continue
        acc.setdefault(r.protocol, {}).setdefault(r.axis_value, []).append(
            float(getattr(r.metrics, attr)))
    return {p: {v: statistics.fmean(xs) for v, xs in sorted(d.items())} for p, d in acc.items()}


def monotone(values: Sequence[float], increasing: bool, slack: float = 0.0,
             allowed: int = 0) -> bool:
    """True when at most ``allowed`` adjacent steps go the wrong way, each by ≤ ``slack``."""
    bad = 0
    for a, b in zip(values, values[1:]):
        wrong = (b < a) if increasing else (b > a)
        if wrong:
            if abs(b - a) > slack:
                return False
            bad += 1
    return bad <= allowed


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def check_rows(rows: Sequence[SweepRow], axis: str) -> list[Check]:
    """Direction-of-effect checks for a two-protocol sweep along ``axis``."""
    out = [Check("no error rows", all(not r.error for r in rows),
                 f"{sum(1 for r in rows if r.error)} error rows")]
    if axis == "loss":
        util = mean_by_point(rows, "link_utilization")
        for proto, series in sorted(util.items()):
            vals = list(series.values())
            out.append(Check(f"{proto} utilization non-increasing in loss",
                             monotone(vals, increasing=False, slack=0.02, allowed=1),
                             " ".join(f"{v:.4f}" for v in vals)))
        if {"tibias", "reno"} <= util.keys():
            pts = [v for v in util["tibias"] if v >= 1e-3]
            ok = all(util["tibias"][v] >= util["reno"][v] for v in pts)
            out.append(Check("tibias utilization >= reno for loss >= 1e-3", ok,
                             " ".join(f"{v:g}:{util['tibias'][v]:.4f}/{util['reno'][v]:.4f}"
                                      for v in pts)))
    elif axis in ("delay", "bandwidth", "queue"):
        gp = mean_by_point(rows, "goodput")
        inc = axis != "delay"
        for proto, series in sorted(gp.items()):
            vals = list(series.values())
            word = "non-decreasing" if inc else "non-increasing"
            out.append(Check(f"{proto} goodput {word} in {axis}",
                             monotone(vals, increasing=inc),
                             " ".join(f"{v:.0f}" for v in vals)))
        if {"tibias", "reno"} <= gp.keys():
            t, r = gp["tibias"], gp["reno"]
            out.append(Check("tibias goodput >= reno at every point",
                             all(t[v] >= r[v] for v in t),
                             " ".join(f"{v:g}:{t[v]:.0f}/{r[v]:.0f}" for v in t)))
            for ext in sorted({min(t), max(t)}):
                gain = t[ext] / r[ext] - 1 if r[ext] > 0 else float("inf")
                out.append(Check(f"tibias gain >= 5% at {axis}={ext:g}", gain >= 0.05,
                                 f"{100 * gain:.1f}%"))
    return out
