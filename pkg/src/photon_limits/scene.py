"""Ground-truth time-of-arrival profiles, N-pixel binning and effective pulses.

Profiles live on a cell-centred grid covering the unit interval (or unit
square): cell ``k`` has centre ``(k + 1/2) * dx``. A pixel of an ``N``-pixel
array groups ``K / N`` consecutive cells, so ``N`` must divide the grid size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import gaussian_filter

from .pulse import (
    FluxModel,
    GaussianPulse,
    ObservationWindow,
    TabulatedPulse,
    eval_flux,
)

__all__ = [
    "ConfigurationError",
    "UnsupportedModelError",
    "ToaProfile",
    "GradientField",
    "BinnedScene",
    "PixelFlux",
    "EffectivePulses",
    "make_profile",
    "make_sigmoid_profile",
    "make_ramp_profile",
    "make_flat_profile",
    "make_synthetic_depth_map",
    "gradient",
    "bin_scene",
    "effective_pulse_exact",
    "effective_pulses_exact",
    "effective_pulse_gaussian",
    "piecewise_reconstruction",
    "bin_average",
    "load_profile",
    "save_profile",
]


class ConfigurationError(ValueError):
    """Inconsistent scene or experiment configuration."""


class UnsupportedModelError(TypeError):
    """The requested operation does not support this flux model."""


@dataclass(frozen=True, eq=False)
class ToaProfile:
    """Time of arrival sampled on a cell-centred grid over ``[0,1]`` or ``[0,1]^2``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValueError("profile must be 1D or 2D")
        if v.ndim == 2 and v.shape[0] != v.shape[1]:
            raise ConfigurationError("2D profiles must be square")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def n_cells(self) -> int:
        """Grid cells per axis."""
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def check_window(self, window: ObservationWindow, margin: float = 0.0) -> bool:
        inside = self.values.min() - margin > window.t_min and self.values.max() + margin < window.t_max
        if not inside:
            warnings.warn("time-of-arrival profile is not well inside the observation window", stacklevel=2)
        return inside


@dataclass(frozen=True, eq=False)
class GradientField:
    """Finite-difference slopes of a profile.

    ``slopes`` has shape ``(K,)`` in 1D and ``(K, K, 2)`` in 2D, with the last
    axis ordered like the profile axes.
    """

    slopes: np.ndarray

    @property
    def ndim(self) -> int:
        return 1 if self.slopes.ndim == 1 else 2

    @property
    def squared(self) -> np.ndarray:
        if self.ndim == 1:
            return self.slopes**2
        return np.sum(self.slopes**2, axis=-1)

    @property
    def c_sq(self) -> float:
        """Grid integral of the squared slope (``||c||^2`` in 2D)."""
        return float(self.squared.mean())

    def binned(self, n_pixels: int) -> np.ndarray:
        """Mean slope per pixel, shape ``(N,)`` or ``(N, N, 2)``."""
        return _block_mean(self.slopes, n_pixels, spatial_dims=self.ndim)

    def binned_c_sq(self, n_pixels: int) -> float:
        """Mean over pixels of the squared per-pixel slope."""
        c = self.binned(n_pixels)
        sq = c**2 if self.ndim == 1 else np.sum(c**2, axis=-1)
        return float(sq.mean())


@dataclass(frozen=True, eq=False)
class BinnedScene:
    """N-pixel discretisation of a profile.

    ``tau``, ``slope_sq`` and ``sigma_n`` have shape ``(N,)`` in 1D and
    ``(N, N)`` in 2D. ``sigma_n`` is ``None`` unless the pulse is Gaussian.
    """

    n_pixels: int
    midpoints: np.ndarray
    tau: np.ndarray
    tau_bar: np.ndarray
    slopes: np.ndarray
    slope_sq: np.ndarray
    sigma_x: float
    sigma_n: np.ndarray | None

    @property
    def ndim(self) -> int:
        return self.tau.ndim

    @property
    def c_sq(self) -> float:
        return float(self.slope_sq.mean())

    @property
    def pixel_count(self) -> int:
        return self.tau.size


@dataclass(frozen=True)
class PixelFlux:
    """Per-pixel flux model together with the pixel's time of arrival."""

    model: FluxModel
    tau: float

    def flux(self, t):
        return eval_flux(self.model, self.tau, t)


@dataclass(frozen=True, eq=False)
class EffectivePulses:
    """Exact effective signal shapes of all pixels on a common time grid.

    ``signal[n]`` is the unit-mass effective pulse of pixel ``n`` in absolute
    time; the pixel flux is ``alpha * signal[n] + floor``.
    """

    t: np.ndarray
    signal: np.ndarray
    alpha: float
    model: FluxModel
    tau: np.ndarray

    @property
    def floor(self) -> np.ndarray:
        return self.model.floor(self.t)

    @property
    def flux(self) -> np.ndarray:
        return self.alpha * self.signal + self.floor[None, :]

    def pixel(self, n: int) -> PixelFlux:
        if not 0 <= n < self.signal.shape[0]:
            raise IndexError(f"pixel index {n} out of range")
        pulse = TabulatedPulse(self.t - self.tau[n], self.signal[n])
        return PixelFlux(self.model.with_pulse(pulse), float(self.tau[n]))


def _block_mean(a: np.ndarray, n: int, spatial_dims: int) -> np.ndarray:
    k = a.shape[0]
    b = k // n
    if spatial_dims == 1:
        return a.reshape(n, b, *a.shape[1:]).mean(axis=1)
    return a.reshape(n, b, n, b, *a.shape[2:]).mean(axis=(1, 3))


def _check_n(profile: ToaProfile, n_pixels: int) -> None:
    if n_pixels < 1:
        raise ConfigurationError("N must be >= 1")
    if n_pixels > profile.n_cells:
        raise ConfigurationError(f"N={n_pixels} exceeds the grid resolution {profile.n_cells}")
    if profile.n_cells % n_pixels:
        raise ConfigurationError(f"N={n_pixels} does not divide the grid size {profile.n_cells}")


def _grid_size(dx: float) -> int:
    k = int(round(1.0 / dx))
    if k < 2 or abs(k * dx - 1.0) > 1e-9:
        raise ConfigurationError(f"grid spacing {dx} must divide the unit interval")
    return k


def make_profile(func, dx: float) -> ToaProfile:
    """Sample ``func(x)`` on the 1D cell-centred grid of spacing ``dx``."""
    k = _grid_size(dx)
    x = (np.arange(k) + 0.5) / k
    return ToaProfile(func(x))


def sigmoid_tau(x):
    return 4.0 / (1.0 + np.exp(-20.0 * (np.asarray(x, dtype=float) - 0.5))) + 4.0


def make_sigmoid_profile(dx: float = 1 / 2048) -> ToaProfile:
    """Two-level scene with a smooth transition at ``x = 0.5``."""
    return make_profile(sigmoid_tau, dx)


def make_ramp_profile(dx: float = 1 / 2048, slope: float = 1.0, offset: float = 0.0) -> ToaProfile:
    return make_profile(lambda x: offset + slope * x, dx)


def make_flat_profile(dx: float = 1 / 2048, value: float = 5.0) -> ToaProfile:
    return make_profile(lambda x: np.full_like(x, value), dx)


def make_synthetic_depth_map(
    n_cells: int = 512,
    tau_min: float = 10.0,
    tau_max: float = 20.0,
    smooth_sigma: float = 2.0,
) -> ToaProfile:
    """Smooth synthetic 2D scene: a tilted background with two rounded objects.

    The map is rescaled to ``[tau_min, tau_max]`` and then blurred by a
    Gaussian of ``smooth_sigma`` grid cells.
    """
    x = (np.arange(n_cells) + 0.5) / n_cells
    yy, xx = np.meshgrid(x, x, indexing="ij")
    depth = 0.6 * xx + 0.3 * yy
    depth += 1.0 * np.exp(-((xx - 0.35) ** 2 + (yy - 0.4) ** 2) / (2 * 0.12**2))
    depth += 0.7 * np.exp(-((xx - 0.7) ** 2 / (2 * 0.15**2) + (yy - 0.7) ** 2 / (2 * 0.1**2)))
    depth = (depth - depth.min()) / (depth.max() - depth.min())
    tau = tau_min + (tau_max - tau_min) * depth
    if smooth_sigma > 0:
        tau = gaussian_filter(tau, smooth_sigma, mode="nearest")
    return ToaProfile(tau)


def gradient(profile: ToaProfile) -> GradientField:
    """Central-difference slopes divided by the grid spacing."""
    v = profile.values
    if v.shape[0] < 2:
        raise ConfigurationError("need at least two grid points per axis")
    if profile.ndim == 1:
        return GradientField(np.gradient(v, profile.dx))
    g0, g1 = np.gradient(v, profile.dx, profile.dx)
    return GradientField(np.stack([g0, g1], axis=-1))


def bin_average(profile: ToaProfile, n_pixels: int) -> np.ndarray:
    """Per-pixel average of the profile."""
    _check_n(profile, n_pixels)
    return _block_mean(profile.values, n_pixels, profile.ndim)


def _tau_at(profile: ToaProfile, midpoints: np.ndarray) -> np.ndarray:
    x = profile.x
    if profile.ndim == 1:
        return np.interp(midpoints, x, profile.values)
    interp = RegularGridInterpolator((x, x), profile.values, method="linear", bounds_error=False, fill_value=None)
    m0, m1 = np.meshgrid(midpoints, midpoints, indexing="ij")
    return interp(np.stack([m0, m1], axis=-1))


def bin_scene(profile: ToaProfile, model: FluxModel, n_pixels: int) -> BinnedScene:
    """Discretise a profile into ``N`` pixels (``N x N`` in 2D)."""
    _check_n(profile, n_pixels)
    midpoints = (2 * np.arange(n_pixels) + 1) / (2.0 * n_pixels)
    grad = gradient(profile)
    slopes = grad.binned(n_pixels)
    slope_sq = slopes**2 if profile.ndim == 1 else np.sum(slopes**2, axis=-1)
    sigma_x = 1.0 / (np.sqrt(12.0) * n_pixels)
    sigma_n = None
    if isinstance(model.pulse, GaussianPulse):
        sigma_n = np.sqrt(slope_sq * sigma_x**2 + model.pulse.sigma_t**2)
    return BinnedScene(
        n_pixels=n_pixels,
        midpoints=midpoints,
        tau=_tau_at(profile, midpoints),
        tau_bar=bin_average(profile, n_pixels),
        slopes=slopes,
        slope_sq=slope_sq,
        sigma_x=float(sigma_x),
        sigma_n=sigma_n,
    )


def effective_pulses_exact(
    profile: ToaProfile,
    model: FluxModel,
    n_pixels: int,
    window: ObservationWindow,
    dt: float,
) -> EffectivePulses:
    """Spatially integrated return pulses of every pixel (1D profiles).

    ``model`` describes the whole unit interval: its ``alpha`` is the total
    scene flux. Each pixel receives ``1/N`` of every flux component.
    """
    if profile.ndim != 1:
        raise ConfigurationError("exact effective pulses are computed for 1D profiles")
    _check_n(profile, n_pixels)
    t = window.grid(dt)
    cells = profile.values.reshape(n_pixels, -1)
    signal = np.empty((n_pixels, t.size))
    for n in range(n_pixels):
        # Riemann sum over the pixel footprint at the grid spacing
        signal[n] = model.pulse.density(t[None, :] - cells[n][:, None]).mean(axis=0)
    pixel_model = model.per_pixel(n_pixels)
    return EffectivePulses(
        t=t,
        signal=signal,
        alpha=pixel_model.alpha,
        model=pixel_model,
        tau=_tau_at(profile, (2 * np.arange(n_pixels) + 1) / (2.0 * n_pixels)),
    )


def effective_pulse_exact(
    profile: ToaProfile,
    model: FluxModel,
    n_pixels: int,
    n: int,
    window: ObservationWindow,
    dt: float,
) -> PixelFlux:
    """Exact effective pulse of pixel ``n`` as a tabulated per-pixel flux."""
    if not 0 <= n < n_pixels:
        raise IndexError(f"pixel index {n} out of range for N={n_pixels}")
    _check_n(profile, n_pixels)
    t = window.grid(dt)
    cells = profile.values.reshape(n_pixels, -1)[n]
    signal = model.pulse.density(t[None, :] - cells[:, None]).mean(axis=0)
    tau_n = float(_tau_at(profile, np.array([(2 * n + 1) / (2.0 * n_pixels)]))[0])
    pixel_model = model.per_pixel(n_pixels).with_pulse(TabulatedPulse(t - tau_n, signal))
    return PixelFlux(pixel_model, tau_n)


def effective_pulse_gaussian(binned: BinnedScene, model: FluxModel, n) -> PixelFlux:
    """Gaussian approximation of pixel ``n``'s return: width ``sigma_n``."""
    if not isinstance(model.pulse, GaussianPulse) or binned.sigma_n is None:
        raise UnsupportedModelError(
            "the Gaussian effective pulse needs a Gaussian pulse; use effective_pulse_exact"
        )
    idx = n if isinstance(n, tuple) else (n,)
    pixel_model = model.per_pixel(binned.pixel_count).with_pulse(GaussianPulse(float(binned.sigma_n[idx])))
    return PixelFlux(pixel_model, float(binned.tau[idx]))


def piecewise_reconstruction(estimates, n_cells: int) -> ToaProfile:
    """Piecewise-constant profile holding ``estimates[n]`` on pixel ``n``."""
    est = np.asarray(estimates, dtype=float)
    n = est.shape[0]
    if n_cells % n:
        raise ConfigurationError(f"N={n} does not divide the grid size {n_cells}")
    rep = n_cells // n
    if est.ndim == 1:
        return ToaProfile(np.repeat(est, rep))
    return ToaProfile(np.repeat(np.repeat(est, rep, axis=0), rep, axis=1))


def load_profile(path) -> ToaProfile:
    """Read an ``H W`` headed text grid; a ``1 K`` header gives a 1D profile."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        h, w = (int(v) for v in lines[0].split())
        rows = [np.array(ln.split(), dtype=float) for ln in lines[1:]]
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed profile file") from exc
    if len(rows) != h or any(r.size != w for r in rows):
        raise ValueError(f"{path}: expected {h} rows of {w} values")
    data = np.vstack(rows)
    return ToaProfile(data[0] if h == 1 else data)


def save_profile(profile: ToaProfile, path) -> None:
    v = profile.values[None, :] if profile.ndim == 1 else profile.values
    with open(path, "w") as fh:
        fh.write(f"{v.shape[0]} {v.shape[1]}\n")
        for row in v:
            fh.write(" ".join(repr(val) for val in row.tolist()) + "\n")
