"""Scenario files: ``key = value`` lines, ``#`` comments, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional

MBPS = 125_000.0  # bytes/second per Mbit/s


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str = "tibias"
    n_connections: int = 5
    duration: float = 2000.0
    seg_size: int = 1500
    access_bandwidth: float = 6 * MBPS
    bottleneck_bandwidth: float = 6 * MBPS
    prop_delay: float = 0.05
    loss_prob: float = 0.0
    queue_capacity: int = 50_000
    ack_delay: float = 0.2
    start_jitter: float = 1.0
    threshld: float = 0.6
    epsilon: float = 0.3
    gamma_dec: float = 0.5
    gamma_inc: float = 0.8
    k: float = 0.5
    seed: int = 1
    profiles: Optional[str] = None
    scenario_id: str = "scenario"

    def validate(self) -> "ScenarioConfig":
        for f in fields(self):
            _check(f.name, getattr(self, f.name))
        return self

    def with_(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Digest of every resolved field; stable across platforms."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}

# (low, high, low inclusive, high inclusive)
_RANGES: dict[str, tuple[float, float, bool, bool]] = {
    "n_connections": (1, 20, True, True),
    "duration": (0, float("inf"), True, False),
    "seg_size": (1, 65535, True, True),
    "access_bandwidth": (0, float("inf"), False, False),
    "bottleneck_bandwidth": (0, float("inf"), False, False),
    "prop_delay": (0, 10, True, True),
    "loss_prob": (0, 1, True, True),
    "queue_capacity": (1, float("inf"), True, False),
    "ack_delay": (0, 10, True, True),
    "start_jitter": (0, float("inf"), True, False),
    "threshld": (0, 1, False, True),
    "epsilon": (0, 1, False, False),
    "gamma_dec": (0, float("inf"), True, False),
    "gamma_inc": (0, 1, False, True),
    "k": (0, 1, True, True),
    "seed": (0, 2**64 - 1, True, True),
}


def _check(key: str, value: Any) -> None:
    if key == "protocol":
        if value not in ("tibias", "reno"):
            raise ConfigError(f"protocol must be 'tibias' or 'reno', got {value!r}")
        return
    rng = _RANGES.get(key)
    if rng is None:
        return
    lo, hi, lo_in, hi_in = rng
    ok_lo = value >= lo if lo_in else value > lo
    ok_hi = value <= hi if hi_in else value < hi
    if not (ok_lo and ok_hi):
        lb = "[" if lo_in else "("
        rb = "]" if hi_in else ")"
        raise ConfigError(f"{key} = {value} outside {lb}{lo}, {hi}{rb}")


def _coerce(key: str, raw: str) -> Any:
    kind = _TYPES[key]
    if kind in ("int", int):
        # accept 1e3 style integers as long as they are whole
        v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if kind in ("float", float):
        return float(raw)
    if raw.lower() in ("", "none"):
        return None
    return raw


def parse_scenario(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            v = _coerce(key, val)
            _check(key, v)
        except ConfigError as e:
            raise ConfigError(f"line {lineno}: {e}") from None
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from None
        values[key] = v
    cfg = dataclasses.replace(base or ScenarioConfig(), **values)
    return cfg.validate()


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    cfg = parse_scenario(path.read_text())
    if cfg.profiles and not Path(cfg.profiles).is_absolute():
        cfg = dataclasses.replace(cfg, profiles=str(path.parent / cfg.profiles))
    if cfg.scenario_id == "scenario":
        cfg = dataclasses.replace(cfg, scenario_id=path.stem)
    return cfg


def format_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if v is not None:
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
