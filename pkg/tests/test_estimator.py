from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from photon_limits.estimator import (
    SOLVERS,
    BatchModel,
    EvaluationError,
    LikelihoodContext,
    bootstrap_variance,
    estimate,
    estimate_batch,
    log_likelihood,
    score,
    score_statistics,
)
from photon_limits.pulse import DomainError, FluxModel, GaussianPulse, ObservationWindow, TabulatedPulse
from photon_limits.sampler import TimeStamps, make_rng, sample_gaussian

W = ObservationWindow(0.0, 10.0)
DT = 1 / 256


def _fisher_quad(alpha, sigma, lam_b, tau=5.0):
    def integrand(t):
        s = norm.pdf(t, tau, sigma)
        ds = -(t - tau) / sigma**2 * s
        lam = alpha * s + lam_b
        return (alpha * ds) ** 2 / lam if lam > 0 else 0.0

    return quad(integrand, tau - 12 * sigma, tau + 12 * sigma, limit=200, points=[tau])[0]


def test_single_stamp_log_likelihood():
    m = FluxModel(100.0, 0.0, GaussianPulse(0.5))
    ctx = LikelihoodContext(m, TimeStamps(np.array([5.0])), W)
    assert log_likelihood(ctx, 5.0) == pytest.approx(np.log(100 / np.sqrt(2 * np.pi * 0.25)), rel=1e-12)


def test_vanishing_flux_raises():
    t = np.linspace(-1, 1, 201)
    s = np.clip(1 - np.abs(t), 0, None)
    m = FluxModel(10.0, 0.0, TabulatedPulse(t, s))
    ctx = LikelihoodContext(m, TimeStamps(np.array([5.0, 8.0])), W)
    with pytest.raises(EvaluationError):
        log_likelihood(ctx, 5.0)


@pytest.mark.parametrize("solver", SOLVERS)
def test_two_stamps_give_their_mean(solver):
    m = FluxModel(100.0, 0.0, GaussianPulse(0.5))
    ctx = LikelihoodContext(m, TimeStamps(np.array([4.9, 5.1])), W, tau0=4.7, dt=DT)
    res = estimate(ctx, solver)
    assert res.tau_hat == pytest.approx(5.0, abs=DT / 10)
    assert res.converged
    bm = BatchModel(np.array([100.0]), np.array([0.5]))
    out = estimate_batch(np.array([4.9, 5.1]), [0, 2], bm, [4.7], W, solver=solver, dt=DT)
    assert out.tau_hat[0] == pytest.approx(5.0, abs=DT / 10)


def test_unknown_solver():
    m = FluxModel(1.0, 0.0, GaussianPulse(0.5))
    ctx = LikelihoodContext(m, TimeStamps(np.array([5.0])), W)
    with pytest.raises(ValueError):
        estimate(ctx, "newton")


def test_empty_stamps():
    m = FluxModel(1.0, 0.0, GaussianPulse(0.5))
    with pytest.raises(DomainError):
        estimate(LikelihoodContext(m, TimeStamps(np.empty(0)), W), "zero")
    bm = BatchModel(np.ones(2), np.full(2, 0.5))
    out = estimate_batch(np.array([5.2]), [0, 0, 1], bm, [4.0, 4.5], W)
    assert out.empty.tolist() == [True, False]
    assert out.tau_hat[0] == 4.0
    assert not out.converged[0]


def test_multimodal_flag_and_nearest_mode():
    m = FluxModel(10.0, 0.5, GaussianPulse(0.1))
    x = np.r_[2.0 + np.linspace(-0.05, 0.05, 5), 8.0 + np.linspace(-0.05, 0.05, 5)]
    for tau0, mode in [(3.0, 2.0), (7.5, 8.0)]:
        ctx = LikelihoodContext(m, TimeStamps(x), W, tau0=tau0)
        res = estimate(ctx, "search")
        assert res.multimodal
        assert res.tau_hat == pytest.approx(mode, abs=1e-3)
        assert estimate(ctx, "gradient").tau_hat == pytest.approx(mode, abs=1e-3)
        assert estimate(ctx, "zero").tau_hat == pytest.approx(mode, abs=1e-3)


def test_gradient_stalls_on_flat_likelihood():
    m = FluxModel(10.0, 0.5, GaussianPulse(0.1))
    x = np.r_[2.0 + np.linspace(-0.05, 0.05, 5), 8.0 + np.linspace(-0.05, 0.05, 5)]
    res = estimate(LikelihoodContext(m, TimeStamps(x), W, tau0=5.0), "gradient")
    assert not res.converged
    bm = BatchModel(np.array([10.0]), np.array([0.1]), 0.5)
    assert not estimate_batch(x, [0, 10], bm, [5.0], W, solver="gradient").converged[0]


def test_zero_solver_falls_back_without_sign_change():
    # a single stamp at the window edge: the score never turns negative inside
    m = FluxModel(5.0, 0.1, GaussianPulse(0.5))
    ctx = LikelihoodContext(m, TimeStamps(np.array([10.0])), W, tau0=9.0)
    res = estimate(ctx, "zero")
    assert res.fallback
    assert res.tau_hat == pytest.approx(10.0, abs=DT)


def test_score_matches_finite_difference():
    m = FluxModel(50.0, 2.0, GaussianPulse(0.4))
    ts = sample_gaussian(m, 5.0, W, make_rng(3))
    ctx = LikelihoodContext(m, ts, W)
    h = 1e-6
    for tau in (4.6, 5.0, 5.3):
        fd = (log_likelihood(ctx, tau + h) - log_likelihood(ctx, tau - h)) / (2 * h)
        assert score(ctx, tau) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("lam_b", [0.0, 30.0])
def test_score_statistics(lam_b):
    m = FluxModel(100.0, lam_b, GaussianPulse(0.5))
    st_ = score_statistics(m, 5.0, W, 5000, make_rng(21))
    assert abs(st_.mean_F1) <= 3 * np.sqrt(st_.var_F1 / st_.trials)
    assert st_.var_F1 == pytest.approx(_fisher_quad(100.0, 0.5, lam_b), rel=0.05)


def test_score_without_signal_is_zero():
    m = FluxModel(0.0, 5.0, GaussianPulse(0.5))
    st_ = score_statistics(m, 5.0, W, 50, make_rng(2))
    assert st_.mean_F1 == 0.0 and st_.var_F1 == 0.0


def test_bootstrap_examples():
    assert bootstrap_variance(np.full(20, 3.3), 3, 100, 0).variance == 0.0
    pool = make_rng(5).normal(0, 1, 20000)
    assert bootstrap_variance(pool, 3, 5000, make_rng(6)).variance == pytest.approx(1 / 3, rel=0.1)
    with pytest.raises(DomainError):
        bootstrap_variance(np.empty(0), 3, 10, 0)


def _instance(seed, lam_b=5.0, alpha=80.0, sigma=0.4):
    m = FluxModel(alpha, lam_b, GaussianPulse(sigma))
    ts = sample_gaussian(m, 5.0, W, make_rng(seed))
    return m, ts


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1.5, 1.5))
def test_shift_equivariance(seed, delta):
    m, ts = _instance(seed)
    w2 = ObservationWindow(W.t_min + delta, W.t_max + delta)
    for solver in SOLVERS:
        a = estimate(LikelihoodContext(m, ts, W, 5.0, DT), solver).tau_hat
        b = estimate(LikelihoodContext(m, TimeStamps(ts.times + delta), w2, 5.0 + delta, DT), solver).tau_hat
        assert b - a == pytest.approx(delta, abs=DT / 5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_scale_invariance(seed, c):
    m, ts = _instance(seed)
    m2 = FluxModel(m.alpha * c, m.lambda_b * c, m.pulse)
    for solver in SOLVERS:
        a = estimate(LikelihoodContext(m, ts, W, 5.0, DT), solver).tau_hat
        b = estimate(LikelihoodContext(m2, ts, W, 5.0, DT), solver).tau_hat
        assert a == pytest.approx(b, abs=DT / 5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 40.0), st.floats(20.0, 400.0), st.floats(0.2, 0.8))
def test_batch_matches_scalar(seed, lam_b, alpha, sigma):
    gen = make_rng(seed)
    taus = gen.uniform(3.0, 7.0, 6)
    m = FluxModel(alpha, lam_b, GaussianPulse(sigma))
    pixels = [sample_gaussian(m, tau, W, make_rng(seed, i), truncate=True) for i, tau in enumerate(taus)]
    times = np.concatenate([p.times for p in pixels])
    offsets = np.concatenate([[0], np.cumsum([len(p) for p in pixels])])
    bm = BatchModel(np.full(6, alpha), np.full(6, sigma), lam_b)
    for solver in SOLVERS:
        out = estimate_batch(times, offsets, bm, taus, W, solver=solver, dt=DT)
        for i, p in enumerate(pixels):
            if len(p) == 0:
                continue
            one = estimate(LikelihoodContext(m, p, W, taus[i], DT), solver)
            assert out.tau_hat[i] == pytest.approx(one.tau_hat, abs=DT / 2)
