"""Command-line front end: simulate, track, bench, report, serve.

Stages are separable so simulated snapshots can be cached once and reused
across tracker variants. `bench` is the one-shot Monte-Carlo driver.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .cache import CacheError, load_snapshots, save_snapshots
from .config import OspaConfig
from .harness import (HarnessError, RunConfig, make_trackers, run_monte_carlo,
                      run_single)
from .metrics import ospa
from .radar import Snapshot, simulate_scenario
from .scenario import load_scenario
from .steering import SteeringModel
from .tracker import Tracker, save_checkpoint

_TRACKER_CHOICES = ("vmp", "baseline", "both")


def _tracker_tuple(name: str) -> tuple:
    return ("vmp", "baseline") if name == "both" else (name,)


def _load_scenario_or_exit(path):
    try:
        return load_scenario(path)
    except Exception as exc:
        click.echo(f"error: unreadable scenario: {exc}", err=True)
        sys.exit(2)


def _ensure_outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        click.echo(f"error: unwritable output dir: {exc}", err=True)
        sys.exit(3)
    return out


@click.group()
def main():
    """Signal-level multi-object tracking toolkit."""


@main.command()
@click.option("--scenario", required=True, type=click.Path(), help="Scenario JSON file.")
@click.option("--seed", default=0, show_default=True, type=int, help="Simulation seed.")
@click.option("--out", required=True, type=click.Path(), help="Snapshot cache file to write.")
def simulate(scenario, seed, out):
    """Simulate one seeded run and cache the snapshots."""
    sc = _load_scenario_or_exit(scenario)
    model = SteeringModel(sc.radar)
    snaps = [snap for _, snap, _ in simulate_scenario(model, sc, seed)]
    try:
        nbytes = save_snapshots(out, snaps)
    except OSError as exc:
        click.echo(f"error: cannot write cache: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote {len(snaps)} snapshots ({nbytes} bytes) to {out}")


@main.command()
@click.option("--scenario", required=True, type=click.Path(), help="Scenario JSON file.")
@click.option("--seed", default=0, show_default=True, type=int, help="Simulation seed.")
@click.option("--tracker", "tracker_name", default="vmp", show_default=True,
              type=click.Choice(_TRACKER_CHOICES), help="Which tracker(s) to run.")
@click.option("--out", default="track_out", show_default=True, type=click.Path(),
              help="Output directory.")
@click.option("--snapshots", type=click.Path(), default=None,
              help="Snapshot cache from `simulate`; omitted = simulate inline.")
@click.option("--checkpoint", type=click.Path(), default=None,
              help="Write the final tracker state here (vmp only).")
def track(scenario, seed, tracker_name, out, snapshots, checkpoint):
    """Track one run and write per-step estimates plus OSPA."""
    sc = _load_scenario_or_exit(scenario)
    outdir = _ensure_outdir(out)
    model = SteeringModel(sc.radar)
    if snapshots is not None:
        try:
            snaps = load_snapshots(snapshots)
        except (OSError, CacheError) as exc:
            click.echo(f"error: cannot read snapshot cache: {exc}", err=True)
            sys.exit(2)
        if len(snaps) != sc.num_steps:
            click.echo(f"error: cache has {len(snaps)} steps, scenario has "
                       f"{sc.num_steps}", err=True)
            sys.exit(2)
        prec = model.noise_precision_diag()
        snaps = [Snapshot(step_index=i + 1, data=row.astype(np.complex128),
                          noise_precision=prec)
                 for i, row in enumerate(snaps)]
    else:
        snaps = [snap for _, snap, _ in simulate_scenario(model, sc, seed)]
    engines = make_trackers(model, sc, _tracker_tuple(tracker_name))
    ocfg = OspaConfig()
    rows = []
    per_step = {t: [] for t in engines}
    for n, snap in enumerate(snaps, start=1):
        truth = sc.truth_at(n)[:, :2]
        for k, p in enumerate(truth):
            rows.append([n, f"truth_{k}", f"{p[0]:.9g}", f"{p[1]:.9g}"])
        for tname, engine in engines.items():
            reports = engine.step(snap)
            pos = np.array([r["position"] for r in reports]).reshape(-1, 2)
            for r in reports:
                rows.append([n, f"{tname}_{int(r['track_id'])}",
                             f"{r['position'][0]:.9g}", f"{r['position'][1]:.9g}"])
            per_step[tname].append(ospa(truth, pos, ocfg))
    import csv as _csv

    with open(outdir / "tracks.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["step", "series", "x", "y"])
        w.writerows(rows)
    with open(outdir / "ospa.json", "w") as fh:
        json.dump({t: [float(x) for x in v] for t, v in per_step.items()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    if checkpoint is not None:
        vmp = [e for t, e in engines.items() if isinstance(e, Tracker)]
        if not vmp:
            click.echo("error: --checkpoint needs the vmp tracker", err=True)
            sys.exit(1)
        save_checkpoint(vmp[0], checkpoint)
    means = {t: float(np.mean(v)) for t, v in per_step.items()}
    click.echo("mean OSPA: " + ", ".join(f"{t}={m:.3f}" for t, m in means.items()))


@main.command()
@click.option("--scenario", required=True, type=click.Path(), help="Scenario JSON file.")
@click.option("--runs", default=100, show_default=True, type=int, help="Monte-Carlo runs.")
@click.option("--seed", default=0, show_default=True, type=int, help="Base seed.")
@click.option("--tracker", "tracker_name", default="both", show_default=True,
              type=click.Choice(_TRACKER_CHOICES), help="Which tracker(s) to run.")
@click.option("--out", default="bench_out", show_default=True, type=click.Path(),
              help="Output directory for report tables.")
def bench(scenario, runs, seed, tracker_name, out):
    """Run a seeded Monte-Carlo batch and emit report tables."""
    try:
        cfg = RunConfig(scenario_path=scenario, num_runs=runs, base_seed=seed,
                        trackers=_tracker_tuple(tracker_name), output_dir=out)
        results, summary = run_monte_carlo(cfg)
    except HarnessError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    failed = summary["failed_runs"]
    click.echo(f"{runs} runs, {failed} failed; mean OSPA "
               + ", ".join(f"{t}={e['mean_ospa']:.3f}"
                           for t, e in summary["per_tracker"].items()))
    if failed > 0.01 * runs:
        click.echo(f"error: {failed}/{runs} runs failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--out", default="bench_out", show_default=True, type=click.Path(),
              help="Bench output directory to summarize.")
def report(out):
    """Print the headline numbers from a bench output directory."""
    path = Path(out) / "summary.json"
    try:
        with open(path) as fh:
            summary = json.load(fh)
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(2)
    click.echo(f"runs: {summary['runs']}  base_seed: {summary['base_seed']}  "
               f"failed: {summary['failed_runs']}")
    hdr = f"{'tracker':<10}{'mean_ospa':>12}{'established':>12}{'rmse_p90':>12}{'card_err':>12}"
    click.echo(hdr)
    for tname, e in summary["per_tracker"].items():
        click.echo(f"{tname:<10}{e['mean_ospa']:>12.4f}"
                   f"{e['mean_ospa_established']:>12.4f}"
                   f"{e['rmse_p90']:>12.4f}{e['mean_cardinality_error']:>12.4f}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
