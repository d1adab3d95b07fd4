"""Multi-object tracker operating directly on matched-filter snapshots.

Per step: a joint reflectivity/existence refresh at the predicted states, a
Gaussian projection of each object's data message on the residual signal,
variational smoothing of the full per-track history (process noise learned
per track), a final joint refresh at the smoothed states, pruning, and a
grid-based birth search. Estimates are reported for components whose
existence probability exceeds the report threshold.
"""

from __future__ import annotations

import json

import numpy as np

from . import vmp
from ._kernels import smooth_history
from .beliefs import ExistenceBelief, GaussianBelief, GaussianMessage, ProcessNoiseBelief
from .config import SPEED_OF_LIGHT, MotionModel, TrackerConfig, default_tracker_config
from .geometry import state_to_geometry
from .radar import Snapshot
from .steering import SteeringModel


class TrackerError(Exception):
    pass


class TrackState:
    """One hypothesized object and its full belief history."""

    def __init__(self, track_id: int, birth_step: int, prior_mean, prior_prec_diag):
        self.track_id = track_id
        self.birth_step = birth_step
        self.retired = False
        self.prior_mean = np.asarray(prior_mean, dtype=float)
        self.prior_prec_diag = np.asarray(prior_prec_diag, dtype=float)
        self.means = np.zeros((0, 4))
        self.covs = np.zeros((0, 4, 4))
        self.msg_means = np.zeros((0, 4))
        self.msg_prec = np.zeros((0, 4))
        self.xi_history: list[float] = []
        self.alpha_history: list[complex] = []
        self.converged: list[bool] = []
        self.gamma = ProcessNoiseBelief.prior(2.0, 2.0)

    @property
    def length(self) -> int:
        return self.means.shape[0]

    def current_belief(self) -> GaussianBelief:
        return GaussianBelief(mean=self.means[-1].copy(), cov=self.covs[-1].copy())

    def append_step(self, belief: GaussianBelief, message: GaussianMessage):
        self.means = np.vstack([self.means, belief.mean[None, :]])
        self.covs = np.concatenate([self.covs, belief.cov[None, :, :]])
        self.msg_means = np.vstack([self.msg_means, message.mean[None, :]])
        self.msg_prec = np.vstack([self.msg_prec, np.diag(message.precision)[None, :]])
        self.converged.append(bool(message.converged))

    def smooth(self, motion: MotionModel, config: TrackerConfig):
        means, covs, shape, rate, _ = smooth_history(
            self.means,
            self.covs,
            self.msg_means,
            self.msg_prec,
            self.prior_mean,
            np.diag(self.prior_prec_diag),
            motion.transition,
            motion.noise_gain_diag,
            config.gamma_zeta,
            config.gamma_chi,
            config.inner_iterations,
            config.smoothing_tol,
        )
        self.means = means
        self.covs = covs
        self.gamma = ProcessNoiseBelief(shape=shape, rate=rate)


class Tracker:
    """Stateful tracker; call step() once per snapshot in time order."""

    def __init__(
        self,
        model: SteeringModel,
        config: TrackerConfig | None = None,
        motion: MotionModel | None = None,
    ):
        self.model = model
        self.config = config if config is not None else default_tracker_config(model.config)
        self.motion = motion if motion is not None else MotionModel(dt=model.config.dt)
        self.tracks: list[TrackState] = []
        self.next_id = 1
        self.step_index = 0
        self.reports: list[list[dict]] = []

        pts = self.config.birth_grid.points()
        ranges = np.hypot(pts[:, 0], pts[:, 1])
        bearings = np.arctan2(pts[:, 0], pts[:, 1])
        delays = 2.0 * ranges / SPEED_OF_LIGHT
        keep = delays <= model.max_delay
        self.grid_points = pts[keep]
        self.grid_delays = delays[keep]
        self.grid_bearings = bearings[keep]
        m = model
        self.grid_phases = np.exp(1j * m.kc * np.outer(np.sin(self.grid_bearings), m.vpos))
        self.grid_kernels = m.wU2[None, :] * np.exp(1j * np.outer(self.grid_delays, m.omega))

    # -- helpers -------------------------------------------------------------

    def _in_window(self, position) -> bool:
        x, y = float(position[0]), float(position[1])
        if y <= 0.05:
            return False
        r = float(np.hypot(x, y))
        if r < 0.5 or r > 0.999 * self.model.max_range_supported:
            return False
        return abs(np.arctan2(x, y)) < 1.45

    def _predict(self, track: TrackState) -> GaussianBelief:
        t_mat = self.motion.transition
        q_add = np.diag(self.motion.noise_gain_diag**2 / track.gamma.mean)
        mean = t_mat @ track.means[-1]
        cov = t_mat @ track.covs[-1] @ t_mat.T + q_add
        cov = 0.5 * (cov + cov.T)
        return GaussianBelief(mean=mean, cov=cov)

    def _grid_scores(self, bg: np.ndarray, beliefs, xi_vec, b_vec, e_mat) -> np.ndarray:
        """Birth objective at every grid point with a unit-existence candidate."""
        cfg = self.config
        k = len(beliefs)
        q_energy = self.model.energy
        if k == 0:
            denom = q_energy + cfg.prior_reflectivity_precision
            return np.abs(bg) ** 2 / denom - np.log(denom)
        g = len(self.grid_delays)
        e_cross = np.zeros((g, k), dtype=complex)
        for j, bel in enumerate(beliefs):
            geom = state_to_geometry(bel.mean[:2])
            ac = self.model.array_corr(self.grid_bearings, geom.bearing)
            dc = self.model.corr(geom.delay - self.grid_delays)
            e_cross[:, j] = np.conj(ac * dc)
        xi_plus = np.concatenate([xi_vec, [1.0]])
        m_plus = np.outer(xi_plus, xi_plus)
        np.fill_diagonal(m_plus, xi_plus)
        lam = np.zeros((g, k + 1, k + 1), dtype=complex)
        lam[:, :k, :k] = e_mat[None, :, :]
        lam[:, k, :k] = e_cross
        lam[:, :k, k] = np.conj(e_cross)
        lam[:, k, k] = q_energy
        lam *= m_plus[None, :, :]
        lam += cfg.prior_reflectivity_precision * np.eye(k + 1)[None, :, :]
        bx = np.empty((g, k + 1), dtype=complex)
        bx[:, :k] = (xi_vec * b_vec)[None, :]
        bx[:, k] = bg
        mu = np.linalg.solve(lam, bx[:, :, None])[:, :, 0]
        quad = np.real(np.einsum("gk,gk->g", np.conj(bx), mu))
        _, logdet = np.linalg.slogdet(lam)
        return quad - logdet

    def _batched_bra(self, zb: np.ndarray) -> np.ndarray:
        """<S(grid)|Lz|Z> at every grid point."""
        return np.einsum("gc,cb,gb->g", np.conj(self.grid_phases), zb, self.grid_kernels)

    def _birth_candidate(self, g_idx, bg, beliefs, xi_vec, b_vec, e_mat):
        """Full existence update for the best grid point; returns (xi, alpha, var)."""
        cfg = self.config
        k = len(beliefs)
        e_plus = np.zeros((k + 1, k + 1), dtype=complex)
        e_plus[:k, :k] = e_mat
        for j, bel in enumerate(beliefs):
            geom = state_to_geometry(bel.mean[:2])
            ac = complex(self.model.array_corr(self.grid_bearings[g_idx], geom.bearing))
            dc = complex(self.model.corr(geom.delay - self.grid_delays[g_idx]))
            e_plus[k, j] = np.conj(ac * dc)
            e_plus[j, k] = ac * dc
        e_plus[k, k] = self.model.energy
        b_plus = np.concatenate([b_vec, [bg[g_idx]]])
        xi_plus = np.concatenate([xi_vec, [0.0]])
        g_k = vmp.g_transition(0.0, cfg)
        xi_new = vmp.xi_argmax(e_plus, b_plus, xi_plus, k, g_k, cfg.prior_reflectivity_precision)
        xi_plus[k] = xi_new
        m_plus = np.outer(xi_plus, xi_plus)
        np.fill_diagonal(m_plus, xi_plus)
        lam = m_plus * e_plus + cfg.prior_reflectivity_precision * np.eye(k + 1)
        mu = np.linalg.solve(lam, xi_plus * b_plus)
        var = np.real(np.diag(np.linalg.inv(lam)))
        return xi_new, complex(mu[k]), float(var[k])

    def _spawn_track(self, g_idx, alpha_mean, alpha_var, xi_new, zb, beliefs, xi_vec, alphas):
        cfg = self.config
        resid = zb.copy()
        for bel, x, a in zip(beliefs, xi_vec, alphas):
            geom = state_to_geometry(bel.mean[:2])
            resid -= x * a * self.model.band_signal(geom.bearing, geom.delay)
        gx, gy = self.grid_points[g_idx]
        prior_mean = np.array([gx, gy, 0.0, 0.0])
        prior_prec_diag = np.array(
            [
                1.0 / cfg.birth_position_var,
                1.0 / cfg.birth_position_var,
                1.0 / cfg.birth_velocity_var,
                1.0 / cfg.birth_velocity_var,
            ]
        )
        init = GaussianMessage(
            mean=prior_mean.copy(),
            precision=np.diag([1.0 / cfg.birth_position_var, 1.0 / cfg.birth_position_var, 0.0, 0.0]),
        )
        msg = vmp.project_data_message(self.model, resid, alpha_mean, alpha_var, xi_new, init, cfg)
        prior_msg = GaussianMessage(mean=prior_mean, precision=np.diag(prior_prec_diag))
        belief = vmp.fuse_gaussian_messages([msg, prior_msg])
        track = TrackState(self.next_id, self.step_index, prior_mean, prior_prec_diag)
        self.next_id += 1
        track.append_step(belief, msg)
        self.tracks.append(track)
        return track

    # -- main step -----------------------------------------------------------

    def step(self, snapshot: Snapshot) -> list[dict]:
        cfg = self.config
        model = self.model
        self.step_index += 1
        zb = model.band_view(snapshot.data)

        active = []
        preds = []
        for t in self.tracks:
            if t.retired:
                continue
            pred = self._predict(t)
            if self._in_window(pred.mean[:2]):
                active.append(t)
                preds.append(pred)
            else:
                t.retired = True

        cur: list[TrackState] = []
        cur_beliefs: list[GaussianBelief] = []
        cur_xi = np.zeros(0)
        cur_alpha = np.zeros(0, dtype=complex)

        if active:
            xi_prev = [t.xi_history[-1] for t in active]
            exist0 = [ExistenceBelief(x) for x in xi_prev]
            ex_pre, a_pre, _ = vmp.joint_update(model, zb, preds, exist0, xi_prev, cfg)

            sigs = []
            for t, pred in zip(active, preds):
                geom = state_to_geometry(pred.mean[:2])
                sigs.append(model.band_signal(geom.bearing, geom.delay))
            for i, t in enumerate(active):
                resid = zb.copy()
                for j in range(len(active)):
                    if j != i:
                        resid -= ex_pre[j].prob * a_pre.mean[j] * sigs[j]
                pred = preds[i]
                pdiag = np.array([1.0 / pred.cov[0, 0], 1.0 / pred.cov[1, 1], 0.0, 0.0])
                init = GaussianMessage(mean=pred.mean.copy(), precision=np.diag(pdiag))
                msg = vmp.project_data_message(
                    model, resid, a_pre.mean[i], a_pre.variances[i], ex_pre[i].prob, init, cfg
                )
                t.append_step(pred, msg)
                t.smooth(self.motion, cfg)

            smoothed = [t.current_belief() for t in active]
            ex_fin, a_fin, _ = vmp.joint_update(model, zb, smoothed, ex_pre, xi_prev, cfg)

            for t, bel, e, i in zip(active, smoothed, ex_fin, range(len(active))):
                if e.prob < cfg.prune_threshold:
                    t.retired = True
                    t.xi_history.append(e.prob)
                    t.alpha_history.append(complex(a_fin.mean[i]))
                else:
                    cur.append(t)
                    cur_beliefs.append(bel)
            keep = [i for i, e in enumerate(ex_fin) if e.prob >= cfg.prune_threshold]
            cur_xi = np.array([ex_fin[i].prob for i in keep])
            cur_alpha = np.array([a_fin.mean[i] for i in keep], dtype=complex)

        # birth search on the residual evidence
        bg = self._batched_bra(zb)
        births = 0
        while births < cfg.max_births_per_step:
            if cur:
                e_mat = vmp.expected_gram(model, cur_beliefs)
                b_vec = vmp.data_inner(model, cur_beliefs, zb)
            else:
                e_mat = np.zeros((0, 0), dtype=complex)
                b_vec = np.zeros(0, dtype=complex)
            scores = self._grid_scores(bg, cur_beliefs, cur_xi, b_vec, e_mat)
            g_idx = int(np.argmax(scores))
            xi_new, alpha_new, var_new = self._birth_candidate(
                g_idx, bg, cur_beliefs, cur_xi, b_vec, e_mat
            )
            if xi_new <= cfg.birth_threshold:
                break
            track = self._spawn_track(
                g_idx, alpha_new, var_new, xi_new, zb, cur_beliefs, cur_xi, cur_alpha
            )
            births += 1
            cur.append(track)
            cur_beliefs.append(track.current_belief())
            xi_prev_all = [
                t.xi_history[-1] if t.xi_history else 0.0 for t in cur
            ]
            exist0 = [ExistenceBelief(x) for x in cur_xi] + [ExistenceBelief(xi_new)]
            ex_all, a_all, _ = vmp.joint_update(model, zb, cur_beliefs, exist0, xi_prev_all, cfg)
            cur_xi = np.array([e.prob for e in ex_all])
            cur_alpha = a_all.mean.copy()

        # record and report
        out = []
        for i, t in enumerate(cur):
            t.xi_history.append(float(cur_xi[i]))
            t.alpha_history.append(complex(cur_alpha[i]))
            if cur_xi[i] > cfg.report_threshold:
                bel = cur_beliefs[i]
                out.append(
                    {
                        "track_id": t.track_id,
                        "position": [float(bel.mean[0]), float(bel.mean[1])],
                        "velocity": [float(bel.mean[2]), float(bel.mean[3])],
                        "existence": float(cur_xi[i]),
                        "position_cov": bel.cov[:2, :2].tolist(),
                    }
                )
        self.reports.append(out)
        return out

    def run(self, snapshots) -> list[list[dict]]:
        for snap in snapshots:
            self.step(snap)
        return self.reports

    def estimates(self, step: int) -> np.ndarray:
        """(M, 2) reported positions at 1-based step index."""
        reps = self.reports[step - 1]
        if not reps:
            return np.zeros((0, 2))
        return np.array([r["position"] for r in reps])


# -- checkpointing ------------------------------------------------------------


def _complex_list(values) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def tracker_to_checkpoint(tracker: Tracker) -> dict:
    """JSON-safe snapshot of the full tracker state."""
    tracks = []
    for t in tracker.tracks:
        tracks.append(
            {
                "track_id": t.track_id,
                "birth_step": t.birth_step,
                "retired": t.retired,
                "prior_mean": t.prior_mean.tolist(),
                "prior_prec_diag": t.prior_prec_diag.tolist(),
                "means": t.means.tolist(),
                "covs": t.covs.tolist(),
                "msg_means": t.msg_means.tolist(),
                "msg_prec": t.msg_prec.tolist(),
                "xi_history": [float(x) for x in t.xi_history],
                "alpha_history": _complex_list(t.alpha_history),
                "converged": [bool(c) for c in t.converged],
                "gamma_shape": t.gamma.shape.tolist(),
                "gamma_rate": t.gamma.rate.tolist(),
            }
        )
    return {
        "format": "tracker-checkpoint",
        "version": 1,
        "step_index": tracker.step_index,
        "next_id": tracker.next_id,
        "tracks": tracks,
        "reports": tracker.reports,
    }


def tracker_from_checkpoint(
    data: dict,
    model: SteeringModel,
    config: TrackerConfig | None = None,
    motion: MotionModel | None = None,
) -> Tracker:
    if data.get("format") != "tracker-checkpoint" or int(data.get("version", -1)) != 1:
        raise TrackerError("not a version-1 tracker checkpoint")
    tracker = Tracker(model, config=config, motion=motion)
    tracker.step_index = int(data["step_index"])
    tracker.next_id = int(data["next_id"])
    tracker.reports = [list(r) for r in data["reports"]]
    for td in data["tracks"]:
        t = TrackState(
            int(td["track_id"]),
            int(td["birth_step"]),
            np.array(td["prior_mean"], dtype=float),
            np.array(td["prior_prec_diag"], dtype=float),
        )
        t.retired = bool(td["retired"])
        t.means = np.array(td["means"], dtype=float).reshape(-1, 4)
        t.covs = np.array(td["covs"], dtype=float).reshape(-1, 4, 4)
        t.msg_means = np.array(td["msg_means"], dtype=float).reshape(-1, 4)
        t.msg_prec = np.array(td["msg_prec"], dtype=float).reshape(-1, 4)
        t.xi_history = [float(x) for x in td["xi_history"]]
        t.alpha_history = [complex(re, im) for re, im in td["alpha_history"]]
        t.converged = [bool(c) for c in td["converged"]]
        t.gamma = ProcessNoiseBelief(
            shape=np.array(td["gamma_shape"], dtype=float),
            rate=np.array(td["gamma_rate"], dtype=float),
        )
        tracker.tracks.append(t)
    return tracker


def save_checkpoint(tracker: Tracker, path):
    with open(path, "w") as fh:
        json.dump(tracker_to_checkpoint(tracker), fh)


def load_checkpoint(path, model, config=None, motion=None) -> Tracker:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TrackerError(f"cannot read checkpoint {path}: {exc}") from exc
    return tracker_from_checkpoint(data, model, config=config, motion=motion)
