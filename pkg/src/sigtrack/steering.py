"""Spatio-temporal steering model and fast whitened inner products.

The measurement lives in the frequency domain: per channel, the matched
filter multiplies the received spectrum by conj(U), so an object at delay tau
and bearing theta contributes A_ch(theta) * |U_k|^2 * exp(-i w_k tau) at bin
k. White input noise is exactly diagonal after this stage with per-bin
variance sigma_w^2 * N_s * |U_k|^2, which is what makes the diagonal noise
precision model-matched rather than an approximation.

Because every channel shares the same delay profile, whitened inner products
factor into an array sum times a spectral sum. All engine-facing operations
here exploit that and run on the in-band bins only (out-of-band bins carry
|U|^2 ~ 1e-12 of the peak and are numerically irrelevant); the contract-level
steering_vector/steering_gradient return full-length vectors.
"""

from __future__ import annotations

import numpy as np

from .config import SPEED_OF_LIGHT, RadarConfig
from .geometry import ArrayGeometry, geometry_hessians, geometry_jacobian, state_to_geometry
from .waveform import BAND_FLOOR, BAND_SELECT, bin_frequencies, pulse_spectrum


class OutOfWindowError(ValueError):
    pass


class SteeringModel:
    def __init__(self, config: RadarConfig):
        self.config = config
        self.array = ArrayGeometry.from_config(config)

        spectrum = pulse_spectrum(config)
        power = np.abs(spectrum) ** 2
        floor = BAND_FLOOR * power.max()
        self.spectrum = spectrum
        self.power = power
        # full-length per-bin noise precision, floored to stay positive definite
        self.prec_full = 1.0 / (config.noise_variance * config.num_samples * (power + floor))

        # working band: bins carrying pulse energy; the skirt below the cut
        # holds under 1e-6 of the whitened weight and is ignored
        self.band = np.flatnonzero(power > BAND_SELECT * power.max())
        omega_full = bin_frequencies(config)
        self.omega_full = omega_full
        self.omega = omega_full[self.band]
        self.power_band = power[self.band]
        w = self.prec_full[self.band]
        self.wU2 = w * self.power_band
        self.wU4 = w * self.power_band**2

        # spectral moments of the whitened autocorrelation
        self.hm0 = float(np.sum(self.wU4))
        self.m1 = float(np.sum(self.wU4 * self.omega))
        self.m2 = float(np.sum(self.wU4 * self.omega**2))

        lam = config.wavelength
        self.kc = 2.0 * np.pi / lam
        self.vpos = self.array.virtual_positions
        self.sum_p2 = float(np.sum(self.vpos**2))

        self.n_ch = config.num_channels
        self.max_delay = config.max_delay
        self.max_range_supported = 0.5 * SPEED_OF_LIGHT * self.max_delay

    # ---- contract-level API -------------------------------------------------

    def steering_vector(self, state) -> np.ndarray:
        """S(Phi) stacked receiver-major, full length N_Z."""
        geom = state_to_geometry(state)
        self._check_delay(geom.delay)
        a = self.channel_phases(geom.bearing)
        h = self.power * np.exp(-1j * self.omega_full * geom.delay)
        return (a[:, None] * h[None, :]).ravel()

    def steering_gradient(self, state) -> np.ndarray:
        """(N_Z, 4) gradient in [x, y, vx, vy]; velocity columns are zero."""
        geom = state_to_geometry(state)
        self._check_delay(geom.delay)
        jac = geometry_jacobian(state[:2])
        a = self.channel_phases(geom.bearing)
        a_th = a * (1j * self.kc * self.vpos * np.cos(geom.bearing))
        h = self.power * np.exp(-1j * self.omega_full * geom.delay)
        h_tau = -1j * self.omega_full * h
        s_tau = (a[:, None] * h_tau[None, :]).ravel()
        s_theta = (a_th[:, None] * h[None, :]).ravel()
        out = np.zeros((self.config.signal_length, 4), dtype=complex)
        out[:, 0] = jac[0, 0] * s_tau + jac[1, 0] * s_theta
        out[:, 1] = jac[0, 1] * s_tau + jac[1, 1] * s_theta
        return out

    def noise_precision_diag(self) -> np.ndarray:
        """Diagonal of the whitened-output noise precision, full length N_Z."""
        return np.tile(self.prec_full, self.n_ch)

    # ---- band-restricted engine ops ----------------------------------------

    def _check_delay(self, tau: float):
        if tau < 0.0 or tau > self.max_delay:
            raise OutOfWindowError(f"delay {tau:.3e} outside [0, {self.max_delay:.3e}]")

    def band_view(self, data: np.ndarray) -> np.ndarray:
        """(N_ch, B) in-band slice of a stacked measurement vector."""
        return np.ascontiguousarray(data.reshape(self.n_ch, self.config.num_samples)[:, self.band])

    def channel_phases(self, bearing: float) -> np.ndarray:
        return np.exp(1j * self.kc * self.vpos * np.sin(bearing))

    def delay_kernel(self, delay: float) -> np.ndarray:
        """Weights such that <S|Lz|Z> = vdot(A, zb @ kernel)."""
        return self.wU2 * np.exp(1j * self.omega * delay)

    def bra_z(self, bearing: float, delay: float, zb: np.ndarray) -> complex:
        """<S(tau,theta)|Lz|Z> on the band view zb."""
        mc = zb @ self.delay_kernel(delay)
        return complex(np.vdot(self.channel_phases(bearing), mc))

    def bra_z_derivs(self, bearing: float, delay: float, zb: np.ndarray):
        """(<S|Lz|Z>, <S_tau|Lz|Z>, <S_theta|Lz|Z>) in one pass."""
        phase = np.exp(1j * self.omega * delay)
        mc = zb @ (self.wU2 * phase)
        mc_tau = zb @ (self.wU2 * (1j * self.omega) * phase)
        a = self.channel_phases(bearing)
        a_th = a * (1j * self.kc * self.vpos * np.cos(bearing))
        return complex(np.vdot(a, mc)), complex(np.vdot(a, mc_tau)), complex(np.vdot(a_th, mc))

    def band_signal(self, bearing: float, delay: float) -> np.ndarray:
        """(N_ch, B) in-band steering matrix, unweighted (for residuals)."""
        h = self.power_band * np.exp(-1j * self.omega * delay)
        return np.outer(self.channel_phases(bearing), h)

    def corr(self, dtau):
        """Whitened delay autocorrelation: <H(t1)|w|H(t2)> at dtau = t1 - t2."""
        dtau = np.asarray(dtau, dtype=float)
        return np.exp(1j * np.multiply.outer(dtau, self.omega)) @ self.wU4

    def array_corr(self, bearing_a, bearing_b):
        """<A(a)|A(b)> summed over channels; real for the centered array."""
        du = np.sin(np.asarray(bearing_b, dtype=float)) - np.sin(np.asarray(bearing_a, dtype=float))
        return np.exp(1j * self.kc * np.multiply.outer(du, self.vpos)).sum(axis=-1)

    def pair_inner(self, geom_a, geom_b) -> complex:
        """<S(a)|Lz|S(b)> for two geometries."""
        return complex(self.array_corr(geom_a.bearing, geom_b.bearing) * self.corr(geom_a.delay - geom_b.delay))

    @property
    def energy(self) -> float:
        """<S|Lz|S>, position independent."""
        return self.n_ch * self.hm0

    def bearing_curvature(self, bearing: float) -> float:
        """<A_theta|A_theta> = kc^2 cos^2(theta) sum(p^2); <A|A_theta> = 0 here."""
        return (self.kc * np.cos(bearing)) ** 2 * self.sum_p2

    def re_j(self, position) -> np.ndarray:
        """Position block of <grad S|Lz|grad S>, real 2x2 closed form."""
        jac = geometry_jacobian(position)
        geom = state_to_geometry(position)
        g_tau = jac[0]
        g_th = jac[1]
        a2 = self.bearing_curvature(geom.bearing)
        return self.n_ch * self.m2 * np.outer(g_tau, g_tau) + a2 * self.hm0 * np.outer(g_th, g_th)

    def re_j_grad(self, position):
        """(ReJ, dReJ/dx, dReJ/dy) for the 2x2 position block."""
        geom = state_to_geometry(position)
        jac = geometry_jacobian(position)
        h_tau, h_th = geometry_hessians(position)
        g_tau = jac[0]
        g_th = jac[1]
        cth = np.cos(geom.bearing)
        a2 = (self.kc * cth) ** 2 * self.sum_p2
        da2_dtheta = -self.kc**2 * np.sin(2.0 * geom.bearing) * self.sum_p2
        base = self.n_ch * self.m2 * np.outer(g_tau, g_tau) + a2 * self.hm0 * np.outer(g_th, g_th)
        grads = []
        for p in range(2):
            d_gtau = h_tau[:, p]
            d_gth = h_th[:, p]
            term = self.n_ch * self.m2 * (np.outer(d_gtau, g_tau) + np.outer(g_tau, d_gtau))
            term += a2 * self.hm0 * (np.outer(d_gth, g_th) + np.outer(g_th, d_gth))
            term += da2_dtheta * g_th[p] * self.hm0 * np.outer(g_th, g_th)
            grads.append(term)
        return base, grads[0], grads[1]
