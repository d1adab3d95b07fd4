"""Monte-Carlo benchmark harness: seeded batches, aggregation, report tables.

A batch runs the scenario once per seed, tracks it with the selected trackers,
and pools per-step OSPA, cardinality, and matched position errors. Reports go
to CSV (per-step tables, RMSE CDF, one example run) plus a JSON summary.
Outputs are byte-identical for identical (config, seed) inputs.
"""

from __future__ import annotations

import csv
import json
import os
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import DttTracker
from .config import DttConfig, OspaConfig, RadarConfig, default_tracker_config
from .metrics import cdf_quantile, error_cdf, matched_errors, ospa
from .radar import simulate_scenario
from .scenario import Scenario, load_scenario
from .steering import SteeringModel
from .tracker import Tracker

WORKERS_ENV = "SIGTRACK_WORKERS"


class HarnessError(RuntimeError):
    """Raised for batch-level failures; exit_code maps to the CLI contract."""

    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


@dataclass
class RunConfig:
    scenario_path: str
    num_runs: int = 100
    base_seed: int = 0
    trackers: tuple = ("vmp", "baseline")
    output_dir: str = "bench_out"
    ospa: OspaConfig = field(default_factory=OspaConfig)
    mean_rcs: float | None = None  # tracker-side prior; default from scenario

    def __post_init__(self):
        if self.num_runs < 1:
            raise HarnessError("num_runs must be >= 1")
        bad = [t for t in self.trackers if t not in ("vmp", "baseline")]
        if bad:
            raise HarnessError(f"unknown tracker(s): {bad}")


@dataclass
class RunResult:
    seed: int
    ok: bool
    error: str = ""
    truth: list = field(default_factory=list)  # per step (M, 2)
    estimates: dict = field(default_factory=dict)  # tracker -> per step (ids, (K, 2))
    ospa: dict = field(default_factory=dict)  # tracker -> (steps,) array
    rmse: dict = field(default_factory=dict)  # tracker -> pooled matched errors


def _prior_mean_rcs(scenario: Scenario) -> float:
    vals = [t.mean_rcs for t in scenario.tracks]
    return float(np.mean(vals)) if vals else 0.05


def make_trackers(model: SteeringModel, scenario: Scenario, names,
                  mean_rcs: float | None = None):
    rcs = mean_rcs if mean_rcs is not None else _prior_mean_rcs(scenario)
    out = {}
    for name in names:
        if name == "vmp":
            out[name] = Tracker(model, default_tracker_config(model.config, mean_rcs=rcs))
        else:
            out[name] = DttTracker(model, DttConfig())
    return out


def run_single(model: SteeringModel, scenario: Scenario, seed: int,
               trackers=("vmp", "baseline"), ospa_config: OspaConfig | None = None,
               mean_rcs: float | None = None) -> RunResult:
    """One seeded simulate-and-track pass; exceptions mark the run failed."""
    ocfg = ospa_config if ospa_config is not None else OspaConfig()
    res = RunResult(seed=seed, ok=True)
    try:
        engines = make_trackers(model, scenario, trackers, mean_rcs)
        per_step_ospa = {t: [] for t in engines}
        pooled = {t: [] for t in engines}
        est = {t: [] for t in engines}
        for _, snap, truth in simulate_scenario(model, scenario, seed):
            truth_pos = truth[:, :2].copy()
            res.truth.append(truth_pos)
            for tname, engine in engines.items():
                reports = engine.step(snap)
                ids = tuple(int(r["track_id"]) for r in reports)
                pos = (np.array([r["position"] for r in reports])
                       .reshape(-1, 2))
                est[tname].append((ids, pos))
                per_step_ospa[tname].append(ospa(truth_pos, pos, ocfg))
                pooled[tname].extend(matched_errors(truth_pos, pos, ocfg))
        res.estimates = est
        res.ospa = {t: np.array(v) for t, v in per_step_ospa.items()}
        res.rmse = {t: np.array(v, dtype=float) for t, v in pooled.items()}
    except Exception:
        res.ok = False
        res.error = traceback.format_exc(limit=8)
    return res


# ---- establishment bookkeeping ----------------------------------------------

def establishment_times(scenario: Scenario, estimates: list, radius: float = 5.0) -> list:
    """First step each truth track has an estimate within radius; inf if never.

    estimates is the per-step list of (ids, positions) from a RunResult.
    """
    states = scenario.truth_states()
    out = []
    for track, st in zip(scenario.tracks, states):
        t_est = np.inf
        for k in range(len(st)):
            step = track.birth_step + k
            if step > len(estimates):
                break
            pos = estimates[step - 1][1]
            if len(pos) and np.min(np.linalg.norm(pos - st[k, :2], axis=1)) <= radius:
                t_est = step
                break
        out.append(t_est)
    return out


def established_mask(scenario: Scenario, est_times) -> np.ndarray:
    """Steps where every truth track alive at that step has been established."""
    mask = np.ones(scenario.num_steps, dtype=bool)
    for track, t_est in zip(scenario.tracks, est_times):
        for n in range(1, scenario.num_steps + 1):
            if track.alive_at(n) and not n >= t_est:
                mask[n - 1] = False
    return mask


# ---- batch driver -----------------------------------------------------------

_POOL_STATE = {}


def _pool_init(scenario_path: str, trackers, ospa_config, mean_rcs):
    scenario = load_scenario(scenario_path)
    _POOL_STATE["scenario"] = scenario
    _POOL_STATE["model"] = SteeringModel(scenario.radar)
    _POOL_STATE["trackers"] = trackers
    _POOL_STATE["ospa"] = ospa_config
    _POOL_STATE["mean_rcs"] = mean_rcs


def _pool_task(seed: int) -> RunResult:
    return run_single(_POOL_STATE["model"], _POOL_STATE["scenario"], seed,
                      _POOL_STATE["trackers"], _POOL_STATE["ospa"],
                      _POOL_STATE["mean_rcs"])


def worker_count(num_runs: int) -> int:
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise HarnessError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return max(1, min(num_runs, os.cpu_count() or 1))


def run_monte_carlo(cfg: RunConfig, emit: bool = True):
    """Run the batch, write report files, return (results, summary)."""
    try:
        scenario = load_scenario(cfg.scenario_path)
    except Exception as exc:
        raise HarnessError(f"unreadable scenario: {exc}", exit_code=2)
    seeds = list(range(cfg.base_seed, cfg.base_seed + cfg.num_runs))
    workers = worker_count(cfg.num_runs)
    if workers == 1:
        model = SteeringModel(scenario.radar)
        results = [run_single(model, scenario, s, cfg.trackers, cfg.ospa, cfg.mean_rcs)
                   for s in seeds]
    else:
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with ctx.Pool(workers, initializer=_pool_init,
                      initargs=(str(cfg.scenario_path), cfg.trackers, cfg.ospa,
                                cfg.mean_rcs)) as pool:
            results = pool.map(_pool_task, seeds)
    summary = summarize(cfg, scenario, results)
    if emit:
        emit_reports(cfg, scenario, results, summary)
    return results, summary


def summarize(cfg: RunConfig, scenario: Scenario, results: list) -> dict:
    ok = [r for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    summary = {
        "runs": cfg.num_runs,
        "base_seed": cfg.base_seed,
        "trackers": list(cfg.trackers),
        "failed_runs": len(failed),
        "per_tracker": {},
    }
    for tname in cfg.trackers:
        ospa_rows = np.array([r.ospa[tname] for r in ok])
        rmse_all = (np.concatenate([r.rmse[tname] for r in ok])
                    if ok else np.zeros(0))
        card_err = np.array([[len(e[1]) - len(t) for e, t in
                              zip(r.estimates[tname], r.truth)] for r in ok])
        est_means = []
        for r in ok:
            times = establishment_times(scenario, r.estimates[tname])
            mask = established_mask(scenario, times)
            if mask.any():
                est_means.append(float(r.ospa[tname][mask].mean()))
        entry = {
            "mean_ospa": float(ospa_rows.mean()) if ok else float("nan"),
            "mean_ospa_established": (float(np.mean(est_means))
                                      if est_means else float("nan")),
            "rmse_p90": float(cdf_quantile(rmse_all, 0.9)),
            "mean_cardinality_error": (float(np.abs(card_err).mean())
                                       if ok else float("nan")),
        }
        summary["per_tracker"][tname] = entry
    lead = summary["per_tracker"][cfg.trackers[0]]
    summary.update({k: lead[k] for k in
                    ("mean_ospa", "mean_ospa_established", "rmse_p90",
                     "mean_cardinality_error")})
    return summary


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def emit_reports(cfg: RunConfig, scenario: Scenario, results: list,
                 summary: dict) -> dict:
    """Write the CSV tables and JSON summary; returns {name: path}."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise HarnessError(f"unwritable output dir: {exc}", exit_code=3)
    ok = [r for r in results if r.ok]
    files = {}

    rows = []
    for tname in cfg.trackers:
        mat = np.array([r.ospa[tname] for r in ok])
        for step in range(scenario.num_steps):
            col = mat[:, step] if len(ok) else np.zeros(0)
            rows.append([tname, step + 1, _fmt(col.mean() if col.size else np.nan),
                         _fmt(col.std(ddof=1) if col.size > 1 else 0.0)])
    files["ospa_per_step"] = out / "ospa_per_step.csv"
    _write_csv(files["ospa_per_step"], ["tracker", "step", "mean_ospa", "std_ospa"], rows)

    rows = []
    for tname in cfg.trackers:
        signed = np.array([[len(e[1]) - len(t) for e, t in
                            zip(r.estimates[tname], r.truth)] for r in ok])
        for step in range(scenario.num_steps):
            col = signed[:, step] if len(ok) else np.zeros(0)
            rows.append([tname, step + 1,
                         _fmt(np.abs(col).mean() if col.size else np.nan),
                         _fmt(col.mean() if col.size else np.nan)])
    files["cardinality_per_step"] = out / "cardinality_per_step.csv"
    _write_csv(files["cardinality_per_step"],
               ["tracker", "step", "mean_abs_error", "mean_signed_error"], rows)

    rows = []
    for tname in cfg.trackers:
        pooled = (np.concatenate([r.rmse[tname] for r in ok])
                  if ok else np.zeros(0))
        xs, cdf = error_cdf(pooled)
        for x, c in zip(xs, cdf):
            rows.append([tname, _fmt(x), _fmt(c)])
    files["rmse_cdf"] = out / "rmse_cdf.csv"
    _write_csv(files["rmse_cdf"], ["tracker", "error", "cdf"], rows)

    rows = []
    if ok:
        ex = ok[0]
        for step, truth in enumerate(ex.truth, start=1):
            for k, p in enumerate(truth):
                rows.append([step, f"truth_{k}", _fmt(p[0]), _fmt(p[1])])
            for tname in cfg.trackers:
                ids, pos = ex.estimates[tname][step - 1]
                for tid, p in zip(ids, pos):
                    rows.append([step, f"{tname}_{tid}", _fmt(p[0]), _fmt(p[1])])
    files["tracks_example"] = out / "tracks_example.csv"
    _write_csv(files["tracks_example"], ["step", "series", "x", "y"], rows)

    files["summary"] = out / "summary.json"
    with open(files["summary"], "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files
