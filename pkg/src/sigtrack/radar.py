"""Snapshot synthesis: superimposed object returns plus filtered noise.

The received spectrum per channel is sum_l alpha_l * A_ch(theta_l) * U_k *
exp(-i w_k tau_l) plus white noise; the matched filter multiplies by conj(U).
Noise is drawn directly in the frequency domain (the DFT of white noise is
white with variance N_s * sigma_w^2 per bin), which is distribution-exact and
keeps the noise stream independent of the object set, so superposition holds
for a fixed seed.

RNG discipline: every draw comes from a stream keyed by (seed, purpose, step
[, object]), so any snapshot is reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, RadarConfig
from .geometry import state_to_geometry
from .scenario import Scenario
from .steering import OutOfWindowError, SteeringModel

_RCS_STREAM = 1
_NOISE_STREAM = 2


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Snapshot:
    step_index: int
    data: np.ndarray  # complex, length N_Z
    noise_precision: np.ndarray  # positive diagonal, length N_Z

    def __post_init__(self):
        if self.data.shape != self.noise_precision.shape:
            raise SimulationError("data/noise_precision length mismatch")
        if np.any(self.noise_precision <= 0):
            raise SimulationError("noise precision must be positive")


def amplitude_scale(config: RadarConfig, range_m: float) -> float:
    """Radar-equation field amplitude at the receiver for unit sqrt-RCS."""
    lam = config.wavelength
    return config.tx_amplitude * config.antenna_gain * lam / ((4.0 * np.pi) ** 1.5 * range_m**2)


def sample_rcs(mean_rcs: float, rng: np.random.Generator) -> float:
    """Swerling-3 draw: chi-square with 4 dof scaled to the mean."""
    if mean_rcs <= 0:
        raise SimulationError("mean_rcs must be positive")
    return float(rng.gamma(shape=2.0, scale=mean_rcs / 2.0))


def rcs_rng(seed: int, step: int, obj: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _RCS_STREAM, int(step), int(obj)]))

def noise_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _NOISE_STREAM, int(step)]))


def reflectivity(config: RadarConfig, state, rcs: float) -> complex:
    """Complex weight alpha for one object: scaled sqrt-RCS with carrier phase."""
    geom = state_to_geometry(state)
    r = 0.5 * SPEED_OF_LIGHT * geom.delay
    mag = amplitude_scale(config, r) * np.sqrt(rcs)
    return mag * np.exp(2j * np.pi * config.carrier_frequency * geom.delay)


def component_snr(config: RadarConfig, model: SteeringModel, state, rcs: float) -> float:
    """|alpha|^2 <S|Lz|S> for one object, the single-look statistic scale."""
    alpha = reflectivity(config, state, rcs)
    return float(abs(alpha) ** 2 * model.energy)


def simulate_snapshot(
    model: SteeringModel,
    states,
    rcs_values,
    step: int,
    seed: int,
    noise: bool = True,
) -> Snapshot:
    """Matched-filtered snapshot of the given object states.

    states: (L, >=2) array-like of object states; rcs_values: per-object RCS
    draws (same length). Raises if any object is outside the receive window.
    """
    cfg = model.config
    states = np.atleast_2d(np.asarray(states, dtype=float)) if len(states) else np.zeros((0, 4))
    if len(states) != len(rcs_values):
        raise SimulationError("states/rcs length mismatch")

    spec = np.zeros((model.n_ch, cfg.num_samples), dtype=complex)
    for state, rcs in zip(states, rcs_values):
        try:
            geom = state_to_geometry(state)
            model._check_delay(geom.delay)
        except (ValueError, OutOfWindowError) as e:
            raise SimulationError(f"object outside the receive window: {e}") from e
        alpha = reflectivity(cfg, state, rcs)
        a = model.channel_phases(geom.bearing)
        ramp = model.spectrum * np.exp(-1j * model.omega_full * geom.delay)
        spec += alpha * a[:, None] * ramp[None, :]

    if noise:
        rng = noise_rng(seed, step)
        scale = np.sqrt(cfg.noise_variance * cfg.num_samples / 2.0)
        w = rng.standard_normal((model.n_ch, cfg.num_samples, 2)) @ np.array([1.0, 1j])
        spec += scale * w

    data = (np.conj(model.spectrum)[None, :] * spec).ravel()
    return Snapshot(step_index=step, data=data, noise_precision=model.noise_precision_diag())


def simulate_scenario(model: SteeringModel, scenario: Scenario, seed: int):
    """Yield (step, Snapshot, truth_states) for each step of the scenario."""
    all_states = scenario.truth_states()
    for n in range(1, scenario.num_steps + 1):
        states = []
        rcs = []
        for obj, track in enumerate(scenario.tracks):
            if track.alive_at(n):
                states.append(all_states[obj][n - track.birth_step])
                rcs.append(sample_rcs(track.mean_rcs, rcs_rng(seed, n, obj)))
        truth = np.array(states).reshape(-1, 4)
        yield n, simulate_snapshot(model, truth, rcs, n, seed), truth
