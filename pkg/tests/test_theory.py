from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from photon_limits.pulse import FluxModel, GaussianPulse, ObservationWindow
from photon_limits.scene import (
    ToaProfile,
    bin_scene,
    gradient,
    make_flat_profile,
    make_ramp_profile,
    make_sigmoid_profile,
)
from photon_limits.theory import (
    MsePrediction,
    SimulatedPoint,
    SweepCurve,
    bias_1d,
    bias_2d,
    bias_numerical,
    fisher_information,
    kl_boxcar_gaussian,
    minimize_kl_sigma,
    mse_1d,
    mse_1d_simplified,
    mse_2d,
    mse_numerical,
    noisy_bias_correction,
    optimal_boxcar_sigma,
    optimal_n_1d,
    optimal_n_2d,
    single_pixel_variance,
    variance_1d,
    variance_2d,
)

W = ObservationWindow(0.0, 10.0)
TABLE1 = FluxModel(1e4, 0.0, GaussianPulse(0.5))


def _fisher_quad(alpha, sigma, lam_b, tau=5.0):
    def integrand(t):
        s = norm.pdf(t, tau, sigma)
        lam = alpha * s + lam_b
        return (alpha * (t - tau) / sigma**2 * s) ** 2 / lam if lam > 0 else 0.0

    return quad(integrand, 0, 10, limit=400, points=[tau])[0]


def test_single_pixel_variance_gaussian():
    m = FluxModel(100.0, 0.0, GaussianPulse(0.5))
    assert single_pixel_variance(m, W) == pytest.approx(0.25 / 100, rel=1e-6)
    m2 = FluxModel(200.0, 0.0, GaussianPulse(0.5))
    assert single_pixel_variance(m2, W) == pytest.approx(0.5 * single_pixel_variance(m, W), rel=1e-9)


def test_single_pixel_variance_with_floor():
    m = FluxModel(100.0, 30.0, GaussianPulse(0.5))
    assert single_pixel_variance(m, W) == pytest.approx(1 / _fisher_quad(100, 0.5, 30), rel=1e-4)


def test_zero_information_is_infinite():
    assert single_pixel_variance(FluxModel(0.0, 1.0, GaussianPulse(0.5)), W) == np.inf


@pytest.mark.parametrize("lam_b", [0.0, 3.0, 30.0])
def test_grid_refinement_self_check(lam_b):
    m = FluxModel(100.0, lam_b, GaussianPulse(0.5))
    coarse = single_pixel_variance(m, W, dt=1 / 64)
    fine = 1.0 / fisher_information(m, W, dt=1 / 128)
    assert coarse == pytest.approx(fine, rel=0.005)


def test_boxcar_sigma():
    assert optimal_boxcar_sigma(1.0) == pytest.approx(0.288675, abs=1e-6)
    assert optimal_boxcar_sigma(1 / 8) == pytest.approx(0.036084, abs=1e-6)


@pytest.mark.parametrize("w", [0.1, 1.0, 10.0])
def test_kl_minimiser(w):
    assert minimize_kl_sigma(w) == pytest.approx(w / np.sqrt(12), abs=1e-3)
    # independent check: brute minimisation of the same divergence
    res = minimize_scalar(lambda s: kl_boxcar_gaussian(s, w), bounds=(w / 50, w), method="bounded")
    assert res.x == pytest.approx(w / np.sqrt(12), abs=1e-3 * max(w, 1))


def test_bias_examples():
    assert bias_1d(0.0, 16) == 0.0
    assert bias_1d(1.0, 10) == pytest.approx(1 / 1200)
    ramp = make_ramp_profile(1 / 2000)
    assert bias_numerical(ramp, 10) == pytest.approx(1 / 1200, rel=1e-4)


@pytest.mark.parametrize("n_pix", [16, 32, 64, 128])
def test_bias_matches_sigmoid_integral(n_pix):
    prof = make_sigmoid_profile(1 / 2048)
    c_sq = gradient(prof).binned_c_sq(n_pix)
    assert bias_1d(c_sq, n_pix) == pytest.approx(bias_numerical(prof, n_pix), rel=0.05)


def test_variance_examples():
    assert variance_1d(0.0, 0.1, 0.5, 1e4, 32) == pytest.approx(32 * 0.25 / 1e4)
    n = 32
    sx = 1 / (np.sqrt(12) * n)
    assert variance_1d(7.0, sx, 0.5, 1e4, n) == pytest.approx(n / 1e4 * (7.0 / (12 * n * n) + 0.25))


def test_flat_scene_models_coincide():
    prof = make_flat_profile(1 / 256)
    for n in (8, 64):
        a, b = mse_1d(prof, TABLE1, n), mse_1d_simplified(prof, TABLE1, n)
        assert a.total == pytest.approx(b.total)


def test_simplified_under_predicts_on_sigmoid():
    prof = make_sigmoid_profile(1 / 2048)
    b = bin_scene(prof, TABLE1, 128)
    assert mse_1d_simplified(b, TABLE1).variance < mse_1d(b, TABLE1).variance


@pytest.mark.parametrize("n_pix", [8, 16, 32, 64, 128, 256])
def test_numerical_reduces_to_closed_form(n_pix):
    prof = make_sigmoid_profile(1 / 2048)
    num = mse_numerical(prof, TABLE1, n_pix, W, dt=1 / 256)
    closed = mse_1d(prof, TABLE1, n_pix)
    assert num.total == pytest.approx(closed.total, rel=0.01)
    assert num.mode == "numerical"


def test_numerical_representative_pixel_on_flat_scene():
    prof = make_flat_profile(1 / 256)
    full = mse_numerical(prof, TABLE1, 16, W)
    one = mse_numerical(prof, TABLE1, 16, W, representative=3)
    assert one.variance == pytest.approx(full.variance, rel=1e-9)


def test_numerical_converges_with_grid():
    prof = make_sigmoid_profile(1 / 1024)
    closed = mse_1d(prof, TABLE1, 32).total
    gaps = [abs(mse_numerical(prof, TABLE1, 32, W, dt=dt).total / closed - 1) for dt in (1 / 16, 1 / 64, 1 / 256)]
    assert max(gaps) <= 0.01


def test_2d_examples():
    n = 16
    assert bias_2d(0.0, n) == 0.0
    assert variance_2d(0.0, 0.01, 0.5, 1e6, n) == pytest.approx(n * n * 0.25 / 1e6)
    assert bias_2d(2.0, n) == pytest.approx(1 / (6 * n * n))
    k = 128
    x = (np.arange(k) + 0.5) / k
    assert gradient(ToaProfile(x[:, None] + x[None, :])).c_sq == pytest.approx(2.0)


def test_optimal_n_2d_limits():
    assert optimal_n_2d(1e6, 6.6, 0.0) == np.inf
    assert optimal_n_2d(16e6, 6.6, 0.5) == pytest.approx(2 * optimal_n_2d(1e6, 6.6, 0.5))


def test_optimal_n_2d_is_grid_minimiser():
    c_sq, sigma_t, alpha0 = 43.9, 0.5, 1e6
    grid = np.arange(1, 400)
    best = grid[np.argmin([mse_2d(c_sq, sigma_t, alpha0, int(n)).total for n in grid])]
    assert abs(optimal_n_2d(alpha0, np.sqrt(c_sq), sigma_t) - best) <= 1


def test_optimal_n_1d():
    assert optimal_n_1d(53.3, 0.0, 1e4) == np.inf
    n_star = optimal_n_1d(53.3, 0.5, 1e4)
    dense = np.linspace(2, 400, 40_000)
    totals = bias_1d(53.3, dense) + variance_1d(53.3, 1 / (np.sqrt(12) * dense), 0.5, 1e4, dense)
    assert n_star == pytest.approx(dense[np.argmin(totals)], abs=0.02)


def test_noisy_bias_examples():
    assert noisy_bias_correction(5.0, 32, 0.0) == bias_1d(5.0, 32)
    assert noisy_bias_correction(0.0, 8, 0.03) == pytest.approx(0.03)


def test_noisy_bias_matches_integral():
    clean = make_sigmoid_profile(1 / 2048)
    noisy = ToaProfile(clean.values + np.random.default_rng(0).normal(0, 0.1, clean.n_cells))
    n = 32
    predicted = noisy_bias_correction(gradient(clean).binned_c_sq(n), n, 0.01)
    assert predicted == pytest.approx(bias_numerical(noisy, n), rel=0.10)


def test_sweep_curve_helpers():
    preds = tuple(MsePrediction(n, 1.0 / n, n / 100.0) for n in (4, 8, 16))
    sims = tuple(SimulatedPoint(p.total * 1.1, 0, 0, 10) for p in preds)
    curve = SweepCurve(preds, sims, 1)
    np.testing.assert_allclose(curve.relative_gaps(), 0.1)
    assert curve.sim_minimizer() == 8


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 100), st.floats(0.01, 2), st.floats(1e2, 1e6), st.integers(1, 512))
def test_total_is_sum_and_monotone(c_sq, sigma_t, alpha0, n):
    p = mse_2d(c_sq, sigma_t, alpha0, n)
    assert p.total == p.bias + p.variance
    assert mse_2d(c_sq, sigma_t, alpha0, n + 1).variance > p.variance
    one = mse_1d(make_sigmoid_profile(1 / 512), FluxModel(alpha0, 0.0, GaussianPulse(sigma_t)), 2 ** (n % 10))
    assert one.total == one.bias + one.variance
    assert variance_1d(0.0, 0.0, sigma_t, alpha0, n + 1) > variance_1d(0.0, 0.0, sigma_t, alpha0, n)
    if c_sq > 0:
        assert bias_1d(c_sq, n + 1) < bias_1d(c_sq, n)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 2), st.floats(1e2, 1e6), st.integers(1, 512))
def test_full_1d_variance_increases_past_turning_point(c_sq, sigma_t, alpha0, n):
    # (N/a)(c^2/(12 N^2) + s^2) falls while N^2 < c^2 / (12 s^2)
    sx = lambda k: 1 / (np.sqrt(12) * k)  # noqa: E731
    v0, v1 = variance_1d(c_sq, sx(n), sigma_t, alpha0, n), variance_1d(c_sq, sx(n + 1), sigma_t, alpha0, n + 1)
    if n * (n + 1) > c_sq / (12 * sigma_t**2):
        assert v1 > v0
    else:
        assert v1 <= v0
