from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from photon_limits.pulse import FluxModel, GaussianPulse, ObservationWindow, TabulatedPulse
from photon_limits.scene import (
    ConfigurationError,
    ToaProfile,
    UnsupportedModelError,
    bin_average,
    bin_scene,
    effective_pulse_exact,
    effective_pulse_gaussian,
    effective_pulses_exact,
    gradient,
    load_profile,
    make_flat_profile,
    make_ramp_profile,
    make_sigmoid_profile,
    make_synthetic_depth_map,
    piecewise_reconstruction,
    save_profile,
    sigmoid_tau,
)
from photon_limits.theory import bias_numerical

WINDOW = ObservationWindow(0.0, 10.0)
GAUSS = FluxModel(1e4, 0.0, GaussianPulse(0.5))


def test_sigmoid_values():
    assert sigmoid_tau(0.5) == pytest.approx(6.0)
    assert sigmoid_tau(0.0) == pytest.approx(4 + 4 / (1 + np.exp(10)), rel=1e-12)
    assert sigmoid_tau(0.0) == pytest.approx(4.000181, abs=1e-6)
    assert sigmoid_tau(1.0) == pytest.approx(7.999818, abs=1e-6)


def test_gradient_examples():
    assert gradient(make_flat_profile(1 / 256)).c_sq == 0.0
    ramp = gradient(make_ramp_profile(1 / 256))
    np.testing.assert_allclose(ramp.slopes, 1.0)
    assert ramp.c_sq == pytest.approx(1.0)
    sig = gradient(make_sigmoid_profile(1 / 2048))
    assert sig.slopes.max() == pytest.approx(20.0, rel=1e-4)


def test_flat_scene_keeps_pulse_width():
    b = bin_scene(make_flat_profile(1 / 256), GAUSS, 16)
    np.testing.assert_allclose(b.sigma_n, 0.5)


def test_sigma_x_in_grid_cells():
    b = bin_scene(make_flat_profile(1 / 1024), GAUSS, 32)
    # the quoted 9.2372 truncates 32/sqrt(12) = 9.23760
    assert b.sigma_x * 1024 == pytest.approx(9.2372, rel=1e-4)
    assert b.sigma_x * 1024 == pytest.approx(32 / np.sqrt(12), rel=1e-12)


def test_sigma_x_single_pixel():
    b = bin_scene(make_flat_profile(1 / 64), GAUSS, 1)
    assert b.sigma_x == pytest.approx(0.288675, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 8, 64, 256])
def test_sigma_x_formula(n):
    assert bin_scene(make_sigmoid_profile(1 / 512), GAUSS, n).sigma_x == pytest.approx(1 / (np.sqrt(12) * n))


def test_bin_scene_rejects_bad_n():
    prof = make_flat_profile(1 / 64)
    with pytest.raises(ConfigurationError):
        bin_scene(prof, GAUSS, 128)
    with pytest.raises(ConfigurationError):
        bin_scene(prof, GAUSS, 3)


def test_non_square_2d_rejected():
    with pytest.raises(ConfigurationError):
        ToaProfile(np.zeros((8, 16)))


def test_exact_pulse_flat_scene_is_shifted_gaussian():
    prof = make_flat_profile(1 / 256, 5.0)
    pf = effective_pulse_exact(prof, GAUSS, 8, 3, WINDOW, 1 / 256)
    t = WINDOW.grid(1 / 256)
    exact = pf.model.pulse.density(t - pf.tau)
    np.testing.assert_allclose(exact, GaussianPulse(0.5).density(t - 5.0), atol=1e-4)


def test_exact_pulse_ramp_second_moment():
    n_pix, sigma_t = 8, 0.5
    prof = make_ramp_profile(1 / 1024, slope=1.0, offset=4.0)
    t = WINDOW.grid(1 / 1024)
    pf = effective_pulse_exact(prof, GAUSS, n_pix, 2, WINDOW, 1 / 1024)
    s = pf.model.pulse.density(t - pf.tau)
    mu = trapezoid(t * s, t)
    var = trapezoid((t - mu) ** 2 * s, t)
    assert var > sigma_t**2
    assert var == pytest.approx(1 / (12 * n_pix**2) + sigma_t**2, rel=1e-3)


def _l1_gap(prof, n_pix, n, dt=1 / 256):
    b = bin_scene(prof, GAUSS, n_pix)
    t = WINDOW.grid(dt)
    exact = effective_pulse_exact(prof, GAUSS, n_pix, n, WINDOW, dt)
    approx = effective_pulse_gaussian(b, GAUSS, n)
    se = exact.model.pulse.density(t - exact.tau)
    sa = approx.model.pulse.density(t - approx.tau)
    return trapezoid(np.abs(se - sa), t)


def test_exact_vs_gaussian_centre_pixel():
    assert _l1_gap(make_sigmoid_profile(1 / 2048), 64, 31) <= 0.02


@pytest.mark.parametrize("n_pix", [16, 32, 64])
def test_exact_vs_gaussian_all_pixels(n_pix):
    prof = make_sigmoid_profile(1 / 1024)
    gaps = [_l1_gap(prof, n_pix, n) for n in range(n_pix)]
    assert max(gaps) <= 0.05


def test_effective_pulses_batch_matches_single():
    prof = make_sigmoid_profile(1 / 512)
    eff = effective_pulses_exact(prof, GAUSS, 16, WINDOW, 1 / 128)
    one = effective_pulse_exact(prof, GAUSS, 16, 5, WINDOW, 1 / 128)
    np.testing.assert_allclose(eff.signal[5], one.model.pulse.density(eff.t - one.tau), atol=1e-12)
    assert eff.alpha == pytest.approx(1e4 / 16)


def test_gaussian_pulse_formula():
    b = bin_scene(make_ramp_profile(1 / 1024), GAUSS, 8)
    pf = effective_pulse_gaussian(b, GAUSS, 3)
    assert pf.model.pulse.sigma_t**2 == pytest.approx(1 / 768 + 0.25, rel=1e-9)
    flat = bin_scene(make_flat_profile(1 / 64, 5.0), GAUSS, 4)
    assert effective_pulse_gaussian(flat, GAUSS, 0).model.pulse.sigma_t == pytest.approx(0.5)


def test_gaussian_pulse_rejects_tabulated():
    t = np.linspace(-3, 3, 601)
    s = np.exp(-0.5 * t * t)
    tab = FluxModel(1.0, 0.0, TabulatedPulse(t, s / trapezoid(s, t)))
    b = bin_scene(make_flat_profile(1 / 64), tab, 4)
    with pytest.raises(UnsupportedModelError):
        effective_pulse_gaussian(b, tab, 0)


def test_piecewise_reconstruction_examples():
    assert np.all(piecewise_reconstruction([3.0], 64).values == 3.0)
    flat = make_flat_profile(1 / 64, 5.0)
    rec = piecewise_reconstruction(bin_scene(flat, GAUSS, 8).tau, 64)
    assert np.mean((rec.values - flat.values) ** 2) == 0.0


@pytest.mark.parametrize("n_pix", [4, 10, 32])
def test_ramp_piecewise_error(n_pix):
    k = 3200
    x = (np.arange(k) + 0.5) / k
    rec = piecewise_reconstruction((np.arange(n_pix) + 0.5) / n_pix, k)
    assert np.mean((rec.values - x) ** 2) == pytest.approx(1 / (12 * n_pix**2), rel=1e-3)


def test_2d_separable_bias_adds():
    k = 256
    x = (np.arange(k) + 0.5) / k
    f = np.sin(3 * x)
    g = x**2
    two = ToaProfile(f[:, None] + g[None, :])
    for n_pix in (8, 16, 32):
        b2 = bias_numerical(two, n_pix)
        b1 = bias_numerical(ToaProfile(f), n_pix) + bias_numerical(ToaProfile(g), n_pix)
        assert b2 == pytest.approx(b1, rel=1e-10)


def test_2d_gradient_norm():
    k = 128
    x = (np.arange(k) + 0.5) / k
    ramp = ToaProfile(x[:, None] + x[None, :])
    assert gradient(ramp).c_sq == pytest.approx(2.0)
    b = bin_scene(ramp, GAUSS, 8)
    assert b.tau.shape == (8, 8)


def test_depth_map_range():
    d = make_synthetic_depth_map(128)
    assert d.ndim == 2
    assert 10.0 <= d.values.min() < d.values.max() <= 20.0


def test_profile_roundtrip(tmp_path):
    for prof in (make_sigmoid_profile(1 / 64), make_synthetic_depth_map(16)):
        save_profile(prof, tmp_path / "p.txt")
        np.testing.assert_array_equal(load_profile(tmp_path / "p.txt").values, prof.values)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([1, 2, 4, 8, 16, 32]), st.floats(-3, 3), st.floats(0, 5))
def test_bin_average_of_affine_is_midpoint(n_pix, slope, offset):
    prof = make_ramp_profile(1 / 256, slope, offset)
    mid = (np.arange(n_pix) + 0.5) / n_pix
    np.testing.assert_allclose(bin_average(prof, n_pix), offset + slope * mid, atol=1e-9)
    np.testing.assert_allclose(bin_scene(prof, GAUSS, n_pix).tau, offset + slope * mid, atol=1e-9)
