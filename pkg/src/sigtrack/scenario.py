"""Ground-truth scenarios: piecewise motion segments and the JSON schema.

Time runs over steps n = 1..num_steps at dt = 1/PRF. A track occupies steps
[birth_step, death_step]; each segment covers a number of inter-step
intervals. Constant-velocity segments advance p += dt*v. Ramp segments change
velocity linearly from the previous segment's end velocity to to_velocity
over their intervals, integrating position with the trapezoid rule (exact for
constant acceleration).

Scenario files are JSON:

{
  "radar": {optional RadarConfig overrides},
  "num_steps": 100,
  "tracks": [
    {"start": [x, y], "birth_step": 1, "mean_rcs": 0.05,
     "initial_velocity": [vx, vy],
     "segments": [{"kind": "cv", "steps": 99},
                  {"kind": "ramp", "to_velocity": [0, 7], "steps": 80}]}
  ]
}

"cv" segments may carry their own "velocity"; otherwise they continue the
current one. Track death is birth_step plus the total interval count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, RadarConfig


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class MotionSegment:
    kind: str  # "cv" or "ramp"
    steps: int  # number of inter-step intervals covered
    velocity: tuple | None = None  # cv only; None continues current velocity
    to_velocity: tuple | None = None  # ramp only

    def __post_init__(self):
        if self.kind not in ("cv", "ramp"):
            raise ScenarioError(f"unknown segment kind {self.kind!r}")
        if self.steps <= 0:
            raise ScenarioError("segment with zero duration")
        if self.kind == "ramp" and self.to_velocity is None:
            raise ScenarioError("ramp segment needs to_velocity")


@dataclass(frozen=True)
class GroundTruthTrack:
    start: tuple
    birth_step: int
    segments: tuple
    mean_rcs: float = 0.05
    initial_velocity: tuple | None = None

    def __post_init__(self):
        if self.mean_rcs <= 0:
            raise ScenarioError("mean_rcs must be positive")
        if self.birth_step < 1:
            raise ScenarioError("birth_step must be >= 1")

    @property
    def death_step(self) -> int:
        return self.birth_step + sum(s.steps for s in self.segments)

    def states(self, dt: float) -> np.ndarray:
        """(alive_steps, 4) states [x, y, vx, vy]; row i is step birth_step+i."""
        pos = np.array(self.start, dtype=float)
        vel = np.array(self.initial_velocity, dtype=float) if self.initial_velocity is not None else None
        out = []
        for seg in self.segments:
            if seg.kind == "cv":
                if seg.velocity is not None:
                    vel = np.array(seg.velocity, dtype=float)
                if vel is None:
                    raise ScenarioError("no velocity defined for first segment")
                if not out:
                    out.append(np.concatenate([pos, vel]))
                for _ in range(seg.steps):
                    pos = pos + dt * vel
                    out.append(np.concatenate([pos, vel]))
            else:
                if vel is None:
                    raise ScenarioError("ramp segment cannot start a track")
                v0 = vel.copy()
                v1 = np.array(seg.to_velocity, dtype=float)
                if not out:
                    out.append(np.concatenate([pos, v0]))
                for i in range(1, seg.steps + 1):
                    v_prev = v0 + (v1 - v0) * (i - 1) / seg.steps
                    v_next = v0 + (v1 - v0) * i / seg.steps
                    pos = pos + dt * 0.5 * (v_prev + v_next)
                    out.append(np.concatenate([pos, v_next]))
                vel = v1
        return np.array(out)

    def alive_at(self, step: int) -> bool:
        return self.birth_step <= step <= self.death_step


@dataclass(frozen=True)
class Scenario:
    radar: RadarConfig
    tracks: tuple
    num_steps: int = 100

    def __post_init__(self):
        if self.num_steps < 1:
            raise ScenarioError("num_steps must be >= 1")

    def truth_states(self):
        """List over tracks of (alive_steps, 4) state arrays."""
        return [t.states(self.radar.dt) for t in self.tracks]

    def truth_at(self, step: int) -> np.ndarray:
        """(L_n, 4) states of tracks alive at 1-based step n."""
        rows = []
        for t in self.tracks:
            if t.alive_at(step):
                rows.append(t.states(self.radar.dt)[step - t.birth_step])
        return np.array(rows).reshape(-1, 4)

    def cardinality(self) -> np.ndarray:
        return np.array([sum(t.alive_at(n) for t in self.tracks) for n in range(1, self.num_steps + 1)])

    def validate_geometry(self):
        """All tracks must stay in the field of view and range while alive."""
        for i, states in enumerate(self.truth_states()):
            pos = states[:, :2]
            r = np.hypot(pos[:, 0], pos[:, 1])
            if np.any(r > self.radar.max_range) or np.any(pos[:, 1] <= 0):
                raise ScenarioError(f"track {i} leaves the field of view")


def _track_from_dict(d: dict) -> GroundTruthTrack:
    segs = tuple(
        MotionSegment(
            kind=s["kind"],
            steps=int(s["steps"]),
            velocity=tuple(s["velocity"]) if "velocity" in s else None,
            to_velocity=tuple(s["to_velocity"]) if "to_velocity" in s else None,
        )
        for s in d["segments"]
    )
    return GroundTruthTrack(
        start=tuple(d["start"]),
        birth_step=int(d.get("birth_step", 1)),
        segments=segs,
        mean_rcs=float(d.get("mean_rcs", 0.05)),
        initial_velocity=tuple(d["initial_velocity"]) if "initial_velocity" in d else None,
    )


def _track_to_dict(t: GroundTruthTrack) -> dict:
    segs = []
    for s in t.segments:
        d = {"kind": s.kind, "steps": s.steps}
        if s.velocity is not None:
            d["velocity"] = list(s.velocity)
        if s.to_velocity is not None:
            d["to_velocity"] = list(s.to_velocity)
        segs.append(d)
    out = {
        "start": list(t.start),
        "birth_step": t.birth_step,
        "mean_rcs": t.mean_rcs,
        "segments": segs,
    }
    if t.initial_velocity is not None:
        out["initial_velocity"] = list(t.initial_velocity)
    return out


def scenario_from_dict(spec: dict) -> Scenario:
    try:
        radar = RadarConfig(**spec.get("radar", {}))
    except (TypeError, ConfigError) as e:
        raise ScenarioError(f"bad radar block: {e}") from e
    try:
        tracks = tuple(_track_from_dict(d) for d in spec.get("tracks", []))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad track block: {e!r}") from e
    sc = Scenario(radar=radar, tracks=tracks, num_steps=int(spec.get("num_steps", 100)))
    sc.validate_geometry()
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    radar = {}
    default = RadarConfig()
    for name in (
        "num_tx",
        "num_rx",
        "prf",
        "carrier_frequency",
        "bandwidth",
        "pulse_duration",
        "sample_rate",
        "max_range",
        "noise_variance",
        "tx_amplitude",
        "antenna_gain",
    ):
        val = getattr(sc.radar, name)
        if val != getattr(default, name):
            radar[name] = val
    return {
        "radar": radar,
        "num_steps": sc.num_steps,
        "tracks": [_track_to_dict(t) for t in sc.tracks],
    }


def load_scenario(path) -> Scenario:
    with open(path) as f:
        try:
            spec = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"unparseable scenario file: {e}") from e
    return scenario_from_dict(spec)


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n")


def crossing_scenario(radar: RadarConfig | None = None) -> Scenario:
    """The three-track benchmark scene.

    Track 1: constant velocity from (10, 10) for the whole run. Track 2 dives
    from (10, 31) and bends to [0, 7] m/s; tracks 1 and 2 pass within half a
    meter around step 22. Track 3 exists for steps 50..95 with a sharp turn
    mid-life.
    """
    radar = radar or RadarConfig()
    c45 = np.cos(np.pi / 4)
    v = 7.0
    t1 = GroundTruthTrack(
        start=(10.0, 10.0),
        birth_step=1,
        initial_velocity=(v * c45, v * c45),
        segments=(MotionSegment("cv", steps=99),),
    )
    t2 = GroundTruthTrack(
        start=(10.0, 31.0),
        birth_step=1,
        initial_velocity=(v * c45, -v * c45),
        segments=(
            MotionSegment("cv", steps=19),
            MotionSegment("ramp", steps=80, to_velocity=(0.0, 7.0)),
        ),
    )
    t3 = GroundTruthTrack(
        start=(15.0, 20.0),
        birth_step=50,
        initial_velocity=(v * c45, -v * c45),
        segments=(
            MotionSegment("cv", steps=15),
            MotionSegment("ramp", steps=14, to_velocity=(-4.33, 2.5)),
            MotionSegment("cv", steps=16),
        ),
    )
    return Scenario(radar=radar, tracks=(t1, t2, t3), num_steps=100)
