"""Predicted bias, variance and MSE of N-pixel time-of-arrival reconstruction.

Conventions: ``alpha0`` is the total signal flux of the unit-length (or
unit-area) scene, so each of ``N`` pixels (``N^2`` in 2D) receives
``alpha0 / N`` (``alpha0 / N^2``). ``c_sq`` is the mean over pixels of the
squared per-pixel slope; in 2D ``c_norm_sq`` is the grid integral of the
squared gradient magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq, minimize_scalar

from .pulse import FluxModel, GaussianPulse, ObservationWindow
from .scene import (
    BinnedScene,
    ConfigurationError,
    PixelFlux,
    ToaProfile,
    bin_average,
    effective_pulses_exact,
    gradient,
    piecewise_reconstruction,
)

__all__ = [
    "MODES",
    "MsePrediction",
    "SimulatedPoint",
    "SweepCurve",
    "fisher_information",
    "single_pixel_variance",
    "optimal_boxcar_sigma",
    "kl_boxcar_gaussian",
    "minimize_kl_sigma",
    "bias_1d",
    "bias_numerical",
    "variance_1d",
    "mse_1d",
    "mse_1d_simplified",
    "mse_numerical",
    "bias_2d",
    "variance_2d",
    "mse_2d",
    "optimal_n_1d",
    "optimal_n_2d",
    "noisy_bias_correction",
]

MODES = ("closed_form", "numerical", "simplified")
FLUX_CUTOFF = 1e-300
DEFAULT_DT = 1.0 / 256


@dataclass(frozen=True)
class MsePrediction:
    N: int
    bias: float
    variance: float
    mode: str = "closed_form"
    total: float = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.bias < 0 or self.variance < 0:
            raise ValueError("bias and variance must be nonnegative")
        object.__setattr__(self, "total", self.bias + self.variance)


@dataclass(frozen=True)
class SimulatedPoint:
    mse_sim: float
    bias_sim: float
    var_sim: float
    trials: int


@dataclass(frozen=True)
class SweepCurve:
    """Predictions over ascending ``N`` with optional simulated counterparts."""

    predictions: tuple[MsePrediction, ...]
    simulated: tuple[SimulatedPoint, ...] | None = None
    seed: int | None = None
    label: str = ""

    def __post_init__(self):
        ns = [p.N for p in self.predictions]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("N values must be strictly ascending")
        if self.simulated is not None and len(self.simulated) != len(self.predictions):
            raise ValueError("one simulated point per prediction is required")

    @property
    def n_values(self) -> list[int]:
        return [p.N for p in self.predictions]

    def relative_gaps(self) -> np.ndarray:
        """``|mse_sim - mse_theory| / mse_theory`` per N."""
        if self.simulated is None:
            raise ValueError("curve has no simulated points")
        th = np.array([p.total for p in self.predictions])
        sim = np.array([s.mse_sim for s in self.simulated])
        return np.abs(sim - th) / th

    def sim_minimizer(self) -> int:
        if self.simulated is None:
            raise ValueError("curve has no simulated points")
        return self.predictions[int(np.argmin([s.mse_sim for s in self.simulated]))].N


# --------------------------------------------------------------------------
# single pixel


def _fisher_integrand(model: FluxModel, tau: float, t: np.ndarray) -> np.ndarray:
    u = t - tau
    if isinstance(model.pulse, GaussianPulse):
        ds = model.pulse.derivative(u)
    else:
        ds = model.pulse.derivative(u, strict=False)
    lam = model.signal(tau, t) + model.floor(t)
    num = (model.alpha * ds) ** 2
    out = np.zeros_like(lam)
    np.divide(num, lam, out=out, where=lam >= FLUX_CUTOFF)
    return out


def fisher_information(
    model: FluxModel | PixelFlux,
    window: ObservationWindow,
    dt: float = DEFAULT_DT,
    tau: float | None = None,
) -> float:
    """``int (alpha s'(t - tau))^2 / lambda(t) dt`` by the trapezoid rule.

    A :class:`PixelFlux` carries its own ``tau``. Otherwise ``tau`` defaults
    to the window centre.
    """
    if isinstance(model, PixelFlux):
        model, tau = model.model, model.tau
    if tau is None:
        tau = 0.5 * (window.t_min + window.t_max)
    t = window.grid(dt)
    return float(trapezoid(_fisher_integrand(model, float(tau), t), t))


def single_pixel_variance(
    model: FluxModel | PixelFlux,
    window: ObservationWindow,
    dt: float = DEFAULT_DT,
    tau: float | None = None,
) -> float:
    """Reciprocal Fisher information; ``inf`` when the information is zero."""
    info = fisher_information(model, window, dt, tau)
    return float(np.inf) if info <= 0 else 1.0 / info


# --------------------------------------------------------------------------
# boxcar approximation


def optimal_boxcar_sigma(W: float) -> float:
    """Width of the Gaussian closest in KL divergence to a boxcar of width ``W``."""
    if not W > 0:
        raise ValueError("W must be positive")
    return W / np.sqrt(12.0)


def kl_boxcar_gaussian(sigma: float, W: float) -> float:
    """``KL(boxcar_W || N(0, sigma^2))`` by adaptive quadrature."""
    if not (sigma > 0 and W > 0):
        raise ValueError("sigma and W must be positive")
    p = 1.0 / W

    def integrand(x):
        log_q = -0.5 * np.log(2 * np.pi * sigma**2) - x * x / (2 * sigma**2)
        return p * (np.log(p) - log_q)

    return float(quad(integrand, -W / 2, W / 2)[0])


def minimize_kl_sigma(W: float) -> float:
    """Numerically minimise :func:`kl_boxcar_gaussian` over ``sigma``."""
    res = minimize_scalar(
        lambda s: kl_boxcar_gaussian(s, W),
        bounds=(W * 1e-3, W * 10.0),
        method="bounded",
        options={"xatol": W * 1e-7},
    )
    return float(res.x)


# --------------------------------------------------------------------------
# 1D


def _check_n(N) -> None:
    if np.any(np.asarray(N) < 1):
        raise ValueError("N must be >= 1")


def bias_1d(c_sq: float, N) -> float:
    _check_n(N)
    return c_sq / (12.0 * N**2)


def variance_1d(c_sq: float, sigma_x: float, sigma_t: float, alpha0: float, N) -> float:
    _check_n(N)
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    return (N / alpha0) * (c_sq * sigma_x**2 + sigma_t**2)


def bias_numerical(profile: ToaProfile, N: int) -> float:
    """Grid integral of ``(tau - tau_bar)^2`` with ``tau_bar`` the per-pixel average."""
    rec = piecewise_reconstruction(bin_average(profile, N), profile.n_cells)
    return float(np.mean((profile.values - rec.values) ** 2))


def _scene_c_sq(scene, N):
    if isinstance(scene, BinnedScene):
        return scene.c_sq, scene.n_pixels
    if N is None:
        raise ValueError("N is required when passing a profile")
    return gradient(scene).binned_c_sq(N), N


def _gaussian_sigma_t(model: FluxModel) -> float:
    if not isinstance(model.pulse, GaussianPulse):
        raise ConfigurationError("closed-form MSE needs a Gaussian pulse; use mse_numerical")
    return model.pulse.sigma_t


def mse_1d(scene: ToaProfile | BinnedScene, model: FluxModel, N: int | None = None) -> MsePrediction:
    """Closed form: ``c^2/(12N^2) + (N/alpha0)(c^2 sigma_x^2 + sigma_t^2)``.

    ``model.alpha`` is the scene total ``alpha0``; the floor is ignored.
    """
    c_sq, N = _scene_c_sq(scene, N)
    sigma_x = 1.0 / (np.sqrt(12.0) * N)
    sigma_t = _gaussian_sigma_t(model)
    return MsePrediction(N, bias_1d(c_sq, N), variance_1d(c_sq, sigma_x, sigma_t, model.alpha, N))


def mse_1d_simplified(scene: ToaProfile | BinnedScene, model: FluxModel, N: int | None = None) -> MsePrediction:
    """As :func:`mse_1d` without the ``c^2 sigma_x^2`` broadening term."""
    c_sq, N = _scene_c_sq(scene, N)
    sigma_t = _gaussian_sigma_t(model)
    return MsePrediction(N, bias_1d(c_sq, N), variance_1d(0.0, 0.0, sigma_t, model.alpha, N), mode="simplified")


def mse_numerical(
    profile: ToaProfile,
    model: FluxModel,
    N: int,
    window: ObservationWindow,
    dt: float = DEFAULT_DT,
    *,
    representative: int | None = None,
) -> MsePrediction:
    """Bias ``c^2/(12N^2)`` plus the per-pixel Cramer-Rao variance.

    Each pixel's variance is the reciprocal Fisher information of its exact
    effective flux (spatially integrated pulse, ``1/N`` of every scene flux
    component). The variances are averaged over pixels, or taken from the
    single pixel ``representative`` when given.
    """
    c_sq = gradient(profile).binned_c_sq(N)
    eff = effective_pulses_exact(profile, model, N, window, dt)
    rows = eff.signal if representative is None else eff.signal[[representative]]
    ds = np.gradient(rows, eff.t, axis=1)
    lam = eff.alpha * rows + eff.floor[None, :]
    num = (eff.alpha * ds) ** 2
    integrand = np.zeros_like(lam)
    np.divide(num, lam, out=integrand, where=lam >= FLUX_CUTOFF)
    info = trapezoid(integrand, eff.t, axis=1)
    with np.errstate(divide="ignore"):
        var = np.where(info > 0, 1.0 / info, np.inf)
    return MsePrediction(N, bias_1d(c_sq, N), float(var.mean()), mode="numerical")


def optimal_n_1d(c_sq: float, sigma_t: float, alpha0: float) -> float:
    """Real-valued minimiser of the closed-form 1D MSE.

    Returns ``inf`` when ``sigma_t = 0`` and ``1.0`` for a flat scene.
    """
    if sigma_t == 0:
        return float(np.inf)
    if c_sq == 0:
        return 1.0

    def dmse(n):
        return sigma_t**2 / alpha0 - c_sq / (6 * n**3) - c_sq / (12 * alpha0 * n**2)

    lo, hi = 1e-6, 1.0
    while dmse(hi) < 0:
        hi *= 2
    return float(brentq(dmse, lo, hi, xtol=1e-12, rtol=1e-12))


# --------------------------------------------------------------------------
# 2D


def bias_2d(c_norm_sq: float, N) -> float:
    _check_n(N)
    return c_norm_sq / (12.0 * N**2)


def variance_2d(c_norm_sq: float, sigma_s: float, sigma_t: float, alpha0: float, N) -> float:
    _check_n(N)
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    return (N**2 / alpha0) * (c_norm_sq * sigma_s**2 + sigma_t**2)


def mse_2d(c_norm_sq: float, sigma_t: float, alpha0: float, N: int) -> MsePrediction:
    """``||c||^2/(12N^2) + (N^2/alpha0)(||c||^2 sigma_s^2 + sigma_t^2)``, ``sigma_s = 1/(sqrt(12) N)``."""
    sigma_s = 1.0 / (np.sqrt(12.0) * N)
    return MsePrediction(N, bias_2d(c_norm_sq, N), variance_2d(c_norm_sq, sigma_s, sigma_t, alpha0, N))


def optimal_n_2d(alpha0: float, c_norm: float, sigma_t: float) -> float:
    """``(sqrt(alpha0) ||c|| / (sqrt(12) sigma_t))^(1/2)``; ``inf`` when ``sigma_t = 0``."""
    if sigma_t == 0:
        return float(np.inf)
    return float(np.sqrt(np.sqrt(alpha0) * c_norm / (np.sqrt(12.0) * sigma_t)))


def noisy_bias_correction(c_sq_clean: float, N, sigma_e_sq: float) -> float:
    """Bias of a profile carrying white noise of variance ``sigma_e_sq``."""
    return bias_1d(c_sq_clean, N) + sigma_e_sq
