"""FastAPI app exposing simulation, stepped tracking sessions, OSPA, and bench."""

from __future__ import annotations

import base64
import itertools
import tempfile
import traceback
from pathlib import Path

import numpy as np
from fastapi import BackgroundTasks, FastAPI, HTTPException

from ..cache import save_snapshots
from ..config import OspaConfig
from ..harness import RunConfig, make_trackers, run_monte_carlo
from ..metrics import ospa
from ..radar import simulate_scenario
from ..scenario import ScenarioError, Scenario, scenario_from_dict, save_scenario
from ..steering import SteeringModel
from . import schemas

app = FastAPI(title="sigtrack", version="0.1.0")

_session_ids = itertools.count(1)
_job_ids = itertools.count(1)
_sessions: dict = {}
_jobs: dict = {}


def _build_scenario(model: schemas.ScenarioModel) -> Scenario:
    try:
        return scenario_from_dict(model.model_dump(exclude_none=True))
    except (ScenarioError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    sc = _build_scenario(req.scenario)
    model = SteeringModel(sc.radar)
    snaps = [snap for _, snap, _ in simulate_scenario(model, sc, req.seed)]
    with tempfile.NamedTemporaryFile(suffix=".bin") as tmp:
        save_snapshots(tmp.name, snaps)
        body = Path(tmp.name).read_bytes()
    return schemas.SimulateResponse(
        num_steps=len(snaps), n_z=int(snaps[0].data.size),
        cache_b64=base64.b64encode(body).decode("ascii"))


@app.post("/sessions", response_model=schemas.SessionCreateResponse)
def create_session(req: schemas.SessionCreateRequest):
    sc = _build_scenario(req.scenario)
    model = SteeringModel(sc.radar)
    snaps = [snap for _, snap, _ in simulate_scenario(model, sc, req.seed)]
    engine = make_trackers(model, sc, (req.tracker,))[req.tracker]
    sid = f"s{next(_session_ids)}"
    _sessions[sid] = {"scenario": sc, "snapshots": snaps, "engine": engine,
                      "tracker": req.tracker, "step": 0}
    return schemas.SessionCreateResponse(session_id=sid, num_steps=sc.num_steps)


def _session_or_404(session_id: str) -> dict:
    if session_id not in _sessions:
        raise HTTPException(status_code=404, detail="unknown session")
    return _sessions[session_id]


def _advance_one(state: dict) -> schemas.StepResponse:
    sc = state["scenario"]
    n = state["step"] + 1
    if n > sc.num_steps:
        raise HTTPException(status_code=409, detail="session already finished")
    reports = state["engine"].step(state["snapshots"][n - 1])
    state["step"] = n
    truth = sc.truth_at(n)[:, :2]
    pos = np.array([r["position"] for r in reports]).reshape(-1, 2)
    return schemas.StepResponse(
        step=n,
        reports=[schemas.TrackReportModel(
            track_id=int(r["track_id"]),
            position=tuple(float(x) for x in r["position"]),
            velocity=tuple(float(x) for x in r["velocity"]))
            for r in reports],
        truth=[tuple(float(x) for x in row) for row in truth],
        ospa=float(ospa(truth, pos, OspaConfig())))


@app.post("/sessions/{session_id}/step", response_model=schemas.StepResponse)
def session_step(session_id: str):
    return _advance_one(_session_or_404(session_id))


@app.post("/sessions/{session_id}/advance", response_model=schemas.StepResponse)
def session_advance(session_id: str, req: schemas.AdvanceRequest):
    state = _session_or_404(session_id)
    last = None
    for _ in range(req.steps):
        last = _advance_one(state)
    return last


@app.get("/sessions/{session_id}", response_model=schemas.SessionState)
def session_state(session_id: str):
    state = _session_or_404(session_id)
    sc = state["scenario"]
    return schemas.SessionState(
        session_id=session_id, tracker=state["tracker"], step=state["step"],
        num_steps=sc.num_steps, done=state["step"] >= sc.num_steps)


@app.delete("/sessions/{session_id}")
def session_delete(session_id: str):
    _session_or_404(session_id)
    del _sessions[session_id]
    return {"deleted": session_id}


@app.post("/evaluate/ospa", response_model=schemas.OspaResponse)
def evaluate_ospa(req: schemas.OspaRequest):
    cfg = OspaConfig(cutoff=req.cutoff, order=req.order)
    truth = np.array(req.truth, dtype=float).reshape(-1, 2)
    est = np.array(req.estimates, dtype=float).reshape(-1, 2)
    return schemas.OspaResponse(ospa=float(ospa(truth, est, cfg)))


def _run_bench(job_id: str, req: schemas.BenchRequest):
    job = _jobs[job_id]
    job["status"] = "running"
    try:
        sc = scenario_from_dict(req.scenario.model_dump(exclude_none=True))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "scenario.json"
            save_scenario(sc, path)
            cfg = RunConfig(
                scenario_path=str(path), num_runs=req.runs, base_seed=req.seed,
                trackers=tuple(req.trackers),
                output_dir=req.output_dir or str(Path(tmpdir) / "out"))
            _, summary = run_monte_carlo(cfg, emit=req.output_dir is not None)
        job["summary"] = summary
        job["status"] = "done"
    except Exception:
        job["status"] = "failed"
        job["error"] = traceback.format_exc(limit=5)


@app.post("/bench", response_model=schemas.BenchJobResponse)
def bench_start(req: schemas.BenchRequest, background: BackgroundTasks):
    _build_scenario(req.scenario)  # validate before queueing
    jid = f"j{next(_job_ids)}"
    _jobs[jid] = {"status": "queued", "summary": None, "error": None}
    background.add_task(_run_bench, jid, req)
    return schemas.BenchJobResponse(job_id=jid, status="queued")


@app.get("/bench/{job_id}", response_model=schemas.BenchStatusResponse)
def bench_status(job_id: str):
    if job_id not in _jobs:
        raise HTTPException(status_code=404, detail="unknown job")
    job = _jobs[job_id]
    return schemas.BenchStatusResponse(
        job_id=job_id, status=job["status"], summary=job["summary"],
        error=job["error"])
