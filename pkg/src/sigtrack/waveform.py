"""Transmit waveform: baseband linear chirp and its spectrum.

The chirp sweeps -BW/2 to +BW/2 over the pulse, sampled at the receive rate.
All transmitters use the same chirp; orthogonality comes from time-division
multiplexing, so per-channel processing is identical.
"""

from __future__ import annotations

import numpy as np

from .config import RadarConfig

# Relative power floor keeping the per-bin noise precision finite.
BAND_FLOOR = 1e-12
# Relative power above which a bin joins the working band; the skirt below
# carries under 1e-6 of the total whitened weight.
BAND_SELECT = 1e-3


def chirp_pulse(config: RadarConfig) -> np.ndarray:
    """Complex baseband chirp, unit amplitude, length num_pulse_samples."""
    n = config.num_pulse_samples
    t = np.arange(n) / config.sample_rate
    bw = config.bandwidth
    rate = bw / config.pulse_duration
    phase = 2.0 * np.pi * (-0.5 * bw * t + 0.5 * rate * t**2)
    return np.exp(1j * phase)


def pulse_spectrum(config: RadarConfig) -> np.ndarray:
    """DFT of the chirp zero-padded to the receive window (num_samples bins)."""
    u = chirp_pulse(config)
    return np.fft.fft(u, n=config.num_samples)


def bin_frequencies(config: RadarConfig) -> np.ndarray:
    """Angular frequency (rad/s) of each DFT bin."""
    return 2.0 * np.pi * np.fft.fftfreq(config.num_samples, d=1.0 / config.sample_rate)


def instantaneous_frequency(config: RadarConfig) -> np.ndarray:
    """Discrete-derivative instantaneous frequency of the chirp, in Hz."""
    u = chirp_pulse(config)
    dphi = np.angle(u[1:] * np.conj(u[:-1]))
    return dphi * config.sample_rate / (2.0 * np.pi)
