"""Signal-level multi-object tracking on raw matched-filter output."""

from .config import (
    BirthGrid,
    ConfigError,
    DttConfig,
    MotionModel,
    OspaConfig,
    RadarConfig,
    TrackerConfig,
    default_tracker_config,
)
from .scenario import (
    GroundTruthTrack,
    MotionSegment,
    Scenario,
    ScenarioError,
    crossing_scenario,
    load_scenario,
    save_scenario,
)
from .steering import SteeringModel
from .radar import Snapshot, sample_rcs, simulate_scenario, simulate_snapshot
from .tracker import Tracker, load_checkpoint, save_checkpoint
from .baseline import Detection, DttTracker, detect_peaks
from .metrics import cardinality_stats, error_cdf, matched_errors, ospa
from .cache import load_snapshots, save_snapshots
from .harness import RunConfig, run_monte_carlo, run_single

__all__ = [
    "BirthGrid",
    "ConfigError",
    "DttConfig",
    "MotionModel",
    "OspaConfig",
    "RadarConfig",
    "TrackerConfig",
    "default_tracker_config",
    "GroundTruthTrack",
    "MotionSegment",
    "Scenario",
    "ScenarioError",
    "crossing_scenario",
    "load_scenario",
    "save_scenario",
    "SteeringModel",
    "Snapshot",
    "sample_rcs",
    "simulate_scenario",
    "simulate_snapshot",
    "Tracker",
    "load_checkpoint",
    "save_checkpoint",
    "Detection",
    "DttTracker",
    "detect_peaks",
    "cardinality_stats",
    "error_cdf",
    "matched_errors",
    "ospa",
    "load_snapshots",
    "save_snapshots",
    "RunConfig",
    "run_monte_carlo",
    "run_single",
]

__version__ = "0.1.0"
