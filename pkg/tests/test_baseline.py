"""Detect-then-track baseline: detector statistics, association, filtering."""

import itertools

import numpy as np
import pytest

from sigtrack import DttConfig, DttTracker, MotionModel, detect_peaks, simulate_snapshot
from sigtrack.baseline import Detection, DetectionGrid, KFTrack, gnn_associate, kf_step, manage_tracks

from conftest import STRONG_RCS


# ---------------------------------------------------------------------------
# detector


def test_false_alarm_rate_on_noise(paper_model):
    config = DttConfig()
    grid = DetectionGrid(paper_model, config)
    scans = 300
    alarms = 0
    for n in range(1, scans + 1):
        snap = simulate_snapshot(paper_model, [], [], step=n, seed=404)
        alarms += len(detect_peaks(paper_model, snap, config, grid))
    assert alarms / scans <= 0.02


def test_strong_object_detected_accurately(small_model):
    config = DttConfig()
    grid = DetectionGrid(small_model, config)
    truth = np.array([3.0, 28.0])
    hits = 0
    singles = 0
    for n in range(1, 101):
        snap = simulate_snapshot(small_model, [[*truth, 0.0, 0.0]], [STRONG_RCS],
                                 step=n, seed=15)
        dets = detect_peaks(small_model, snap, config, grid)
        close = [d for d in dets
                 if np.linalg.norm(d.position - truth) < small_model.config.range_resolution]
        hits += bool(close)
        singles += len(dets) == 1
    assert hits >= 99
    assert singles >= 95


def test_unresolvable_pair_merges_into_one_detection(small_model):
    config = DttConfig()
    grid = DetectionGrid(small_model, config)
    states = [[0.0, 30.0, 0.0, 0.0], [0.25, 30.2, 0.0, 0.0]]
    merged = 0
    for n in range(1, 21):
        snap = simulate_snapshot(small_model, states, [STRONG_RCS, STRONG_RCS],
                                 step=n, seed=33)
        dets = detect_peaks(small_model, snap, config, grid)
        merged += len(dets) == 1
    assert merged >= 18


def test_detection_covariance_is_bounded(small_model):
    config = DttConfig()
    grid = DetectionGrid(small_model, config)
    snap = simulate_snapshot(small_model, [[0.0, 30.0, 0.0, 0.0]], [STRONG_RCS],
                             step=1, seed=2)
    dets = detect_peaks(small_model, snap, config, grid)
    assert dets
    for d in dets:
        eigs = np.linalg.eigvalsh(d.covariance)
        assert eigs.min() > 0
        # per-axis variance capped at one grid cell in each coordinate
        r = np.linalg.norm(d.position)
        cap = grid.range_step**2 + (r * grid.bearing_step) ** 2
        assert eigs.max() <= cap * 1.001


def test_detection_rejects_degenerate_covariance():
    with pytest.raises(ValueError):
        Detection(position=[0.0, 10.0], covariance=np.zeros((2, 2)), amplitude=1.0)


# ---------------------------------------------------------------------------
# association


def gnn_brute(tracks, detections, gate):
    """Minimal-cost matching over every injective pairing, gate respected."""
    nt, nd = len(tracks), len(detections)
    cost = np.full((nt, nd), np.inf)
    for ti, tr in enumerate(tracks):
        for di, det in enumerate(detections):
            s = tr.cov[:2, :2] + det.covariance
            dv = det.position - tr.mean[:2]
            d2 = float(dv @ np.linalg.solve(s, dv))
            if d2 <= gate:
                cost[ti, di] = d2
    best, best_pairs = np.inf, []
    k = min(nt, nd)
    for size in range(k, -1, -1):
        for t_sub in itertools.combinations(range(nt), size):
            for d_perm in itertools.permutations(range(nd), size):
                pairs = list(zip(t_sub, d_perm))
                if any(not np.isfinite(cost[t, d]) for t, d in pairs):
                    continue
                tot = sum(cost[t, d] for t, d in pairs)
                # maximal cardinality first, then minimal cost
                score = (-size, tot)
                if score < (-len(best_pairs), best):
                    best, best_pairs = tot, pairs
    return sorted(best_pairs)


def _track_at(x, y, var=1.0):
    return KFTrack(track_id=1, birth_step=1, mean=np.array([x, y, 0.0, 0.0]),
                   cov=np.diag([var, var, 10.0, 10.0]))


def test_gnn_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    for trial in range(40):
        nt = int(rng.integers(0, 5))
        nd = int(rng.integers(0, 5))
        tracks = [_track_at(rng.uniform(-20, 20), rng.uniform(10, 40)) for _ in range(nt)]
        dets = [Detection(position=rng.uniform(-20, 40, 2), covariance=0.5 * np.eye(2),
                          amplitude=1.0) for _ in range(nd)]
        pairs, unassigned = gnn_associate(tracks, dets, gate_chi2=9.21)
        ref = gnn_brute(tracks, dets, 9.21)
        assert sorted(pairs) == ref
        assert sorted(unassigned) == sorted(set(range(nd)) - {d for _, d in pairs})


def test_gnn_prefers_nearer_detection():
    tracks = [_track_at(0.0, 20.0)]
    dets = [Detection(position=[2.0, 20.0], covariance=0.5 * np.eye(2), amplitude=1.0),
            Detection(position=[0.2, 20.0], covariance=0.5 * np.eye(2), amplitude=1.0)]
    pairs, unassigned = gnn_associate(tracks, dets)
    assert pairs == [(0, 1)]
    assert unassigned == [0]


def test_gnn_respects_gate():
    tracks = [_track_at(0.0, 20.0, var=0.1)]
    dets = [Detection(position=[30.0, 20.0], covariance=0.1 * np.eye(2), amplitude=1.0)]
    pairs, unassigned = gnn_associate(tracks, dets)
    assert pairs == []
    assert unassigned == [0]


# ---------------------------------------------------------------------------
# filtering


def test_kf_hit_shrinks_position_covariance():
    motion = MotionModel(dt=0.1)
    config = DttConfig()
    tr = _track_at(0.0, 20.0, var=4.0)
    before = tr.cov[:2, :2].copy()
    det = Detection(position=[0.0, 20.0], covariance=0.25 * np.eye(2), amplitude=1.0)
    kf_step(tr, det, motion, config)
    after = tr.cov[:2, :2]
    assert np.trace(after) < np.trace(before)
    eigs = np.linalg.eigvalsh(tr.cov)
    assert eigs.min() > 0


def test_kf_miss_grows_uncertainty():
    motion = MotionModel(dt=0.1)
    config = DttConfig()
    tr = _track_at(0.0, 20.0, var=1.0)
    traces = [np.trace(tr.cov)]
    for _ in range(5):
        kf_step(tr, None, motion, config)
        traces.append(np.trace(tr.cov))
    assert all(b > a for a, b in zip(traces, traces[1:]))


def test_kf_consistency_in_matched_world():
    # simulate exactly the model the filter assumes and check the NEES level
    motion = MotionModel(dt=0.1)
    config = DttConfig()
    rng = np.random.default_rng(19)
    g = motion.noise_gain_diag
    r_var = 0.04
    truth = np.array([0.0, 20.0, 1.0, -0.5])
    tr = KFTrack(track_id=1, birth_step=1, mean=truth.copy(),
                 cov=np.diag([1.0, 1.0, 4.0, 4.0]))
    truth = truth + rng.multivariate_normal(np.zeros(4), tr.cov)
    nees = []
    for _ in range(400):
        acc = config.process_noise_accel * rng.standard_normal(2)
        truth = motion.transition @ truth + g * np.concatenate([acc, acc])
        z = truth[:2] + np.sqrt(r_var) * rng.standard_normal(2)
        kf_step(tr, Detection(position=z, covariance=r_var * np.eye(2), amplitude=1.0),
                motion, config)
        e = tr.mean - truth
        nees.append(float(e @ np.linalg.solve(tr.cov, e)))
    avg = np.mean(nees)
    assert 4.0 * 0.8 < avg < 4.0 * 1.2


# ---------------------------------------------------------------------------
# track management


def _fresh(status="tentative"):
    t = KFTrack(track_id=1, birth_step=1, mean=np.array([0.0, 20.0, 0.0, 0.0]),
                cov=np.eye(4))
    t.status = status
    return t


def test_confirmation_after_three_straight_hits():
    config = DttConfig()
    tr = _fresh()
    tracks = [tr]
    tracks = manage_tracks(tracks, {}, config)  # spawn step: window untouched
    assert tr.status == "tentative" and tr.window == []
    for k in range(3):
        tracks = manage_tracks(tracks, {0: True}, config)
    assert tr.status == "confirmed"
    assert tr.window == [True, True, True]


def test_confirmation_three_of_five_with_gaps():
    config = DttConfig()
    tr = _fresh()
    tracks = [tr]
    for hit in (True, False, True, False):
        tracks = manage_tracks(tracks, {0: hit}, config)
        assert tr.status == "tentative"
    tracks = manage_tracks(tracks, {0: True}, config)
    assert tr.status == "confirmed"


def test_two_of_five_never_confirms():
    config = DttConfig()
    tr = _fresh()
    tracks = [tr]
    for hit in (True, False, False, True, False, False):
        tracks = manage_tracks(tracks, {0: hit}, config)
    assert tr.status == "tentative"


def test_deletion_after_consecutive_misses():
    config = DttConfig()
    tr = _fresh(status="confirmed")
    tracks = [tr]
    for k in range(config.delete_misses - 1):
        tracks = manage_tracks(tracks, {0: False}, config)
        assert tracks and tr.status == "confirmed"
    tracks = manage_tracks(tracks, {0: False}, config)
    assert tracks == []
    assert tr.status == "deleted"


def test_miss_counter_resets_on_hit():
    config = DttConfig()
    tr = _fresh(status="confirmed")
    tracks = [tr]
    for hit in [False] * (config.delete_misses - 1) + [True] + [False] * (config.delete_misses - 1):
        tracks = manage_tracks(tracks, {0: hit}, config)
    assert tracks and tr.status == "confirmed"


# ---------------------------------------------------------------------------
# pipeline


def test_pipeline_confirms_object_after_three_updates(small_model):
    tracker = DttTracker(small_model)
    dt = small_model.config.dt
    pos = np.array([0.0, 30.0])
    confirm_step = None
    for n in range(1, 9):
        snap = simulate_snapshot(small_model, [[*pos, 1.0, 0.0]], [STRONG_RCS],
                                 step=n, seed=27)
        reps = tracker.step(snap)
        if reps and confirm_step is None:
            confirm_step = n
        pos = pos + dt * np.array([1.0, 0.0])
    # spawned at 1, window counts from step 2: three hits land at step 4
    assert confirm_step == 4
    assert len(tracker.step(simulate_snapshot(
        small_model, [[*pos, 1.0, 0.0]], [STRONG_RCS], step=9, seed=27))) == 1


def test_pipeline_reports_have_expected_fields(small_model):
    tracker = DttTracker(small_model)
    for n in range(1, 6):
        snap = simulate_snapshot(small_model, [[0.0, 30.0, 0.0, 0.0]], [STRONG_RCS],
                                 step=n, seed=29)
        reps = tracker.step(snap)
    assert reps
    rep = reps[0]
    assert set(rep) == {"track_id", "position", "velocity", "position_cov"}
    assert np.linalg.norm(rep["position"] - np.array([0.0, 30.0])) < 2.0
