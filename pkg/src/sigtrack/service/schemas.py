"""Request/response models for the HTTP service.

The scenario models mirror the scenario JSON schema one to one, so a file
accepted by the CLI is accepted inline here and vice versa.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class SegmentModel(BaseModel):
    kind: str = Field(pattern="^(cv|ramp)$")
    steps: int = Field(ge=1)
    velocity: tuple[float, float] | None = None
    to_velocity: tuple[float, float] | None = None


class TrackModel(BaseModel):
    start: tuple[float, float]
    birth_step: int = Field(default=1, ge=1)
    mean_rcs: float = Field(default=0.05, gt=0)
    initial_velocity: tuple[float, float] | None = None
    segments: list[SegmentModel]


class ScenarioModel(BaseModel):
    radar: dict = Field(default_factory=dict)
    num_steps: int = Field(default=100, ge=1)
    tracks: list[TrackModel] = Field(default_factory=list)


class SimulateRequest(BaseModel):
    scenario: ScenarioModel
    seed: int = 0


class SimulateResponse(BaseModel):
    num_steps: int
    n_z: int
    cache_b64: str  # snapshot cache file body, base64


class SessionCreateRequest(BaseModel):
    scenario: ScenarioModel
    seed: int = 0
    tracker: str = Field(default="vmp", pattern="^(vmp|baseline)$")


class SessionCreateResponse(BaseModel):
    session_id: str
    num_steps: int


class TrackReportModel(BaseModel):
    track_id: int
    position: tuple[float, float]
    velocity: tuple[float, float]


class StepResponse(BaseModel):
    step: int
    reports: list[TrackReportModel]
    truth: list[tuple[float, float]]
    ospa: float


class AdvanceRequest(BaseModel):
    steps: int = Field(default=1, ge=1)


class SessionState(BaseModel):
    session_id: str
    tracker: str
    step: int
    num_steps: int
    done: bool


class OspaRequest(BaseModel):
    truth: list[tuple[float, float]]
    estimates: list[tuple[float, float]]
    cutoff: float = Field(default=10.0, gt=0)
    order: float = Field(default=2.0, ge=1)


class OspaResponse(BaseModel):
    ospa: float


class BenchRequest(BaseModel):
    scenario: ScenarioModel
    runs: int = Field(default=10, ge=1)
    seed: int = 0
    trackers: list[str] = Field(default_factory=lambda: ["vmp", "baseline"])
    output_dir: str | None = None


class BenchJobResponse(BaseModel):
    job_id: str
    status: str


class BenchStatusResponse(BaseModel):
    job_id: str
    status: str  # queued | running | done | failed
    summary: dict | None = None
    error: str | None = None
