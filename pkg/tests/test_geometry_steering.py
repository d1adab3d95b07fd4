"""Geometry mapping and steering-model inner products.

The quadratic-form checks rebuild the whitened inner products from the pulse
spectrum with plain numpy sums over the full-length vectors, independent of
the band-restricted fast paths inside SteeringModel.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigtrack.config import SPEED_OF_LIGHT
from sigtrack.geometry import (
    ArrayGeometry,
    GeometryError,
    geometry_hessians,
    geometry_jacobian,
    state_to_geometry,
)
from sigtrack.steering import OutOfWindowError
from sigtrack.waveform import BAND_FLOOR, BAND_SELECT, bin_frequencies, pulse_spectrum


# ---------------------------------------------------------------------------
# geometry


def test_known_position_345_triangle():
    geom = state_to_geometry([30.0, 40.0])
    assert geom.delay == pytest.approx(2.0 * 50.0 / SPEED_OF_LIGHT, rel=1e-12)
    assert geom.bearing == pytest.approx(np.arctan2(30.0, 40.0), rel=1e-12)


def test_boresight_and_diagonal():
    assert state_to_geometry([0.0, 10.0]).bearing == 0.0
    geom = state_to_geometry([10.0, 10.0])
    assert geom.bearing == pytest.approx(np.pi / 4, rel=1e-12)
    assert geom.delay == pytest.approx(2.0 * np.sqrt(200.0) / SPEED_OF_LIGHT, rel=1e-12)


def test_invalid_positions_raise():
    with pytest.raises(GeometryError):
        state_to_geometry([0.0, 0.0])
    with pytest.raises(GeometryError):
        state_to_geometry([5.0, -1.0])


@given(
    r=st.floats(min_value=1.0, max_value=90.0),
    th=st.floats(min_value=-1.4, max_value=1.4),
)
@settings(max_examples=200, deadline=None)
def test_polar_round_trip(r, th):
    x, y = r * np.sin(th), r * np.cos(th)
    geom = state_to_geometry([x, y])
    assert geom.delay == pytest.approx(2.0 * r / SPEED_OF_LIGHT, rel=1e-12)
    assert geom.bearing == pytest.approx(th, abs=1e-12)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(50):
        r = rng.uniform(5.0, 80.0)
        th = rng.uniform(-1.2, 1.2)
        pos = np.array([r * np.sin(th), r * np.cos(th)])
        jac = geometry_jacobian(pos)
        for p in range(2):
            dp = np.zeros(2)
            dp[p] = h
            gp = state_to_geometry(pos + dp)
            gm = state_to_geometry(pos - dp)
            fd_tau = (gp.delay - gm.delay) / (2 * h)
            fd_th = (gp.bearing - gm.bearing) / (2 * h)
            assert jac[0, p] == pytest.approx(fd_tau, rel=1e-5, abs=1e-18)
            assert jac[1, p] == pytest.approx(fd_th, rel=1e-5, abs=1e-12)


def test_hessians_match_finite_differences():
    pos = np.array([12.0, 31.0])
    h_tau, h_th = geometry_hessians(pos)
    h = 1e-4
    for p in range(2):
        dp = np.zeros(2)
        dp[p] = h
        jp = geometry_jacobian(pos + dp)
        jm = geometry_jacobian(pos - dp)
        fd = (jp - jm) / (2 * h)
        np.testing.assert_allclose(h_tau[:, p], fd[0], rtol=1e-4, atol=1e-18)
        np.testing.assert_allclose(h_th[:, p], fd[1], rtol=1e-4, atol=1e-12)


def test_boresight_delay_gradient_is_radial():
    # at x = 0 the delay is insensitive to cross-range motion
    jac = geometry_jacobian([0.0, 40.0])
    assert jac[0, 0] == pytest.approx(0.0, abs=1e-18)
    assert jac[0, 1] == pytest.approx(2.0 / SPEED_OF_LIGHT, rel=1e-12)


# ---------------------------------------------------------------------------
# virtual array


def test_virtual_array_half_wavelength_ula(paper_config):
    arr = ArrayGeometry.from_config(paper_config)
    pos = arr.virtual_positions
    assert pos.size == paper_config.num_tx * paper_config.num_rx
    d = np.diff(np.sort(pos))
    np.testing.assert_allclose(d, paper_config.wavelength / 2.0, rtol=1e-12)
    assert abs(pos.sum()) < 1e-12


def test_virtual_array_centered_small(small_config):
    arr = ArrayGeometry.from_config(small_config)
    assert arr.virtual_positions.size == 4
    assert abs(arr.virtual_positions.sum()) < 1e-12


# ---------------------------------------------------------------------------
# steering vectors against full-length numpy rebuilds


def _full_precision(config):
    power = np.abs(pulse_spectrum(config)) ** 2
    floor = BAND_FLOOR * power.max()
    return 1.0 / (config.noise_variance * config.num_samples * (power + floor))


def _quad_form(model, s1, s2):
    prec = np.tile(_full_precision(model.config), model.n_ch)
    return np.vdot(s1, prec * s2)


def test_band_selection_default_config(paper_config):
    power = np.abs(pulse_spectrum(paper_config)) ** 2
    band = np.flatnonzero(power > BAND_SELECT * power.max())
    assert paper_config.num_samples == 1093
    assert band.size == 178


def test_broadside_steering_repeats_per_channel(small_model):
    s = small_model.steering_vector([0.0, 30.0]).reshape(small_model.n_ch, -1)
    for row in s[1:]:
        np.testing.assert_allclose(row, s[0], rtol=0, atol=1e-12 * np.abs(s[0]).max())


def test_energy_matches_direct_sum(small_model):
    # independent rebuild of <S|Lz|S> from the spectrum, one channel times n_ch
    config = small_model.config
    power = np.abs(pulse_spectrum(config)) ** 2
    prec = _full_precision(config)
    band = power > BAND_SELECT * power.max()
    direct = small_model.n_ch * float(np.sum((prec * power**2)[band]))
    assert small_model.energy == pytest.approx(direct, rel=1e-12)
    # full-vector quadratic form includes the skirt; still within 1e-5
    q = _quad_form(small_model, small_model.steering_vector([3.0, 25.0]),
                   small_model.steering_vector([3.0, 25.0]))
    assert float(np.real(q)) == pytest.approx(small_model.energy, rel=1e-5)


def test_energy_position_invariant(small_model):
    vals = []
    for pos in ([0.0, 10.0], [20.0, 20.0], [-15.0, 35.0], [5.0, 55.0]):
        s = small_model.steering_vector(pos)
        vals.append(float(np.real(_quad_form(small_model, s, s))))
    assert (max(vals) - min(vals)) / max(vals) < 1e-3


def test_default_config_energy_scale(paper_model):
    # frozen value for the default radar: Q = n_ch * sum(w |U|^4) on the band
    assert paper_model.energy == pytest.approx(1.0345e17, rel=1e-3)


def test_pair_inner_matches_quadratic_form(small_model):
    pa = [8.0, 22.0]
    pb = [11.0, 30.0]
    ga = state_to_geometry(pa)
    gb = state_to_geometry(pb)
    fast = small_model.pair_inner(ga, gb)
    slow = _quad_form(small_model, small_model.steering_vector(pa),
                      small_model.steering_vector(pb))
    assert fast == pytest.approx(complex(slow), rel=1e-5)


def test_delay_correlation_against_fft_autocorrelation(small_model):
    # Wiener-Khinchin route: sum_k |U_k|^2 exp(i w_k dtau) at integer lags is
    # N_s times the circular autocorrelation of the pulse samples
    config = small_model.config
    spectrum = pulse_spectrum(config)
    power = np.abs(spectrum) ** 2
    acf = np.fft.ifft(power) * config.num_samples  # acf[m] = sum_n u[n+m] conj(u[n])
    scale = config.noise_variance * config.num_samples
    for m in (0, 1, 2, 5):
        fast = complex(small_model.corr(m / config.sample_rate)) * scale
        assert fast == pytest.approx(complex(acf[m]), rel=2e-3)


def test_delay_correlation_null_near_inverse_bandwidth(small_model):
    c0 = float(np.real(small_model.corr(0.0)))
    null = abs(complex(small_model.corr(1.0 / small_model.config.bandwidth)))
    assert null / c0 < 0.1


def test_array_correlation_identity_and_decay(small_model):
    assert complex(small_model.array_corr(0.3, 0.3)) == pytest.approx(small_model.n_ch)
    # sin-spaced nulls of the 4-element ULA: du = 2/n_ch in sine space
    th_null = float(np.arcsin(2.0 / small_model.n_ch))
    assert abs(complex(small_model.array_corr(0.0, th_null))) < 1e-9


def test_gradient_velocity_columns_zero(small_model):
    g = small_model.steering_gradient([7.0, 33.0, 4.0, -2.0])
    assert np.all(g[:, 2] == 0)
    assert np.all(g[:, 3] == 0)


def test_gradient_matches_finite_differences(small_model):
    rng = np.random.default_rng(3)
    h = 1e-4
    for _ in range(20):
        r = rng.uniform(8.0, 50.0)
        th = rng.uniform(-1.2, 1.2)
        pos = np.array([r * np.sin(th), r * np.cos(th), 0.0, 0.0])
        grad = small_model.steering_gradient(pos)
        for p in range(2):
            dp = np.zeros(4)
            dp[p] = h
            fd = (small_model.steering_vector(pos + dp)
                  - small_model.steering_vector(pos - dp)) / (2 * h)
            err = np.linalg.norm(grad[:, p] - fd) / np.linalg.norm(fd)
            assert err < 1e-4


def test_re_j_matches_gradient_quadratic_form(small_model):
    for pos in ([5.0, 20.0], [-12.0, 40.0], [0.0, 33.0]):
        grad = small_model.steering_gradient([pos[0], pos[1], 0.0, 0.0])[:, :2]
        prec = np.tile(_full_precision(small_model.config), small_model.n_ch)
        full = np.real(grad.conj().T @ (prec[:, None] * grad))
        np.testing.assert_allclose(
            small_model.re_j(pos), full, rtol=1e-4, atol=1e-8 * np.abs(full).max()
        )


def test_re_j_positive_definite(small_model):
    eigs = np.linalg.eigvalsh(small_model.re_j([10.0, 25.0]))
    assert eigs.min() > 0


def test_re_j_grad_matches_finite_differences(small_model):
    pos = np.array([9.0, 28.0])
    _, dx, dy = small_model.re_j_grad(pos)
    h = 1e-4
    fd_x = (small_model.re_j(pos + [h, 0]) - small_model.re_j(pos - [h, 0])) / (2 * h)
    fd_y = (small_model.re_j(pos + [0, h]) - small_model.re_j(pos - [0, h])) / (2 * h)
    np.testing.assert_allclose(dx, fd_x, rtol=1e-3, atol=1e-3 * np.abs(fd_x).max())
    np.testing.assert_allclose(dy, fd_y, rtol=1e-3, atol=1e-3 * np.abs(fd_y).max())


def test_out_of_window_raises(small_model):
    beyond = 1.01 * small_model.max_range_supported
    with pytest.raises(OutOfWindowError):
        small_model.steering_vector([0.0, beyond])


def test_bra_z_matches_full_inner_product(small_model):
    rng = np.random.default_rng(11)
    n_z = small_model.config.signal_length
    data = rng.standard_normal(n_z) + 1j * rng.standard_normal(n_z)
    zb = small_model.band_view(data)
    pos = [6.0, 27.0]
    geom = state_to_geometry(pos)
    fast = small_model.bra_z(geom.bearing, geom.delay, zb)
    slow = _quad_form(small_model, small_model.steering_vector(pos), data)
    assert fast == pytest.approx(complex(slow), rel=1e-4)


def test_bra_z_derivs_match_finite_differences(small_model):
    rng = np.random.default_rng(12)
    n_z = small_model.config.signal_length
    data = rng.standard_normal(n_z) + 1j * rng.standard_normal(n_z)
    zb = small_model.band_view(data)
    th, tau = 0.4, 2.0 * 30.0 / SPEED_OF_LIGHT
    b0, b_tau, b_th = small_model.bra_z_derivs(th, tau, zb)
    assert b0 == pytest.approx(small_model.bra_z(th, tau, zb), rel=1e-12)
    h_tau = 1e-12
    fd_tau = (small_model.bra_z(th, tau + h_tau, zb)
              - small_model.bra_z(th, tau - h_tau, zb)) / (2 * h_tau)
    assert b_tau == pytest.approx(fd_tau, rel=1e-3)
    h_th = 1e-6
    fd_th = (small_model.bra_z(th + h_th, tau, zb)
             - small_model.bra_z(th - h_th, tau, zb)) / (2 * h_th)
    assert b_th == pytest.approx(fd_th, rel=1e-3)
