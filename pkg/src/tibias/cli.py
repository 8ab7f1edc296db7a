"""``simtool`` command line: single runs and parameter sweeps.

Exit codes: 0 success, 2 configuration error, 3 failed check (``--check``).
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from .config import ConfigError, ScenarioConfig, load_scenario
from .network import Simulation
from .sweep import AXES, PRESETS, check_rows, run_sweep, to_csv

EXIT_CONFIG = 2
EXIT_CHECK = 3


def _load(path: str, **overrides) -> ScenarioConfig:
    try:
        cfg = load_scenario(path)
        return cfg.with_(**overrides) if overrides else cfg
    except (OSError, ConfigError) as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


def _parse_points(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        click.echo(f"config error: cannot parse points {text!r}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main() -> None:
    """Simulate socially-aware congestion control against a Reno baseline."""


@main.command("run")
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              help="Write the per-event trace here.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--check", is_flag=True, help="Exit 3 if conservation or range checks fail.")
def run_cmd(scenario: str, trace_path: Optional[str], seed: Optional[int], check: bool) -> None:
    """Run one scenario file and print its metrics."""
    cfg = _load(scenario, **({"seed": seed} if seed is not None else {}))
    try:
        if trace_path:
            with open(trace_path, "w") as fh:
                sim = Simulation(cfg, fh)
                m = sim.run()
        else:
            sim = Simulation(cfg)
            m = sim.run()
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    acc = "" if m.classification_accuracy is None else f"{m.classification_accuracy:.6f}"
    click.echo(f"scenario_id = {cfg.scenario_id}")
    click.echo(f"protocol = {m.protocol}")
    click.echo(f"seed = {cfg.seed}")
    click.echo(f"config_hash = {cfg.config_hash()}")
    click.echo(f"goodput_bps = {m.goodput_bps:.3f}")
    click.echo(f"utilization = {m.link_utilization:.6f}")
    click.echo(f"retx = {m.retransmission_count}")
    click.echo(f"superfluous = {m.superfluous_reductions}")
    click.echo(f"class_acc = {acc}")
    click.echo(f"metadata_bytes = {m.metadata_bytes}")
    for f in m.flows:
        click.echo(f"flow {f.flow_id} goodput_bps = {8 * f.goodput:.3f} retx = {f.retransmissions}"
                   f" reductions = {f.reductions} superfluous = {f.superfluous_reductions}")
    if m.exhausted_at is not None:
        click.echo(f"note: event queue ran dry at {m.exhausted_at:.6f} s", err=True)
    if check:
        bad = [fid for fid, fc in sim.trace.flows.items() if not fc.conserved()]
        ok = not bad and 0.0 <= m.link_utilization <= 1.0
        click.echo(f"check conservation: {'pass' if not bad else 'FAIL ' + str(bad)}")
        if not ok:
            sys.exit(EXIT_CHECK)


@main.command("sweep")
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.option("--axis", type=click.Choice(sorted(AXES)), default=None)
@click.option("--points", default=None, help="Comma-separated axis values.")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None,
              help="Named axis, points and base overrides; explicit options win.")
@click.option("--seeds", type=int, default=3, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV destination (stdout when omitted).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker processes; output order does not depend on it.")
@click.option("--check", is_flag=True, help="Exit 3 if a trend check fails.")
def sweep_cmd(scenario: str, axis: Optional[str], points: Optional[str], preset: Optional[str],
              seeds: int, out: Optional[str], jobs: int, check: bool) -> None:
    """Sweep one axis for both protocols and write one CSV row per run."""
    overrides = {}
    pts = None
    if preset:
        p = PRESETS[preset]
        overrides = dict(p.base)
        axis = axis or p.axis
        pts = list(p.points)
    if points:
        pts = _parse_points(points)
    if axis is None or not pts:
        click.echo("config error: --axis and --points (or --preset) are required", err=True)
        sys.exit(EXIT_CONFIG)
    if seeds < 1:
        click.echo("config error: --seeds must be at least 1", err=True)
        sys.exit(EXIT_CONFIG)
    base = _load(scenario, **overrides)
    try:
        rows = run_sweep(base, axis, pts, seeds=seeds, jobs=jobs)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    text = to_csv(rows)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    if check:
        results = check_rows(rows, axis)
        for c in results:
            click.echo(f"{'pass' if c.passed else 'FAIL'}  {c.name}  ({c.detail})", err=True)
        if not all(c.passed for c in results):
            sys.exit(EXIT_CHECK)


if __name__ == "__main__":
    main()
