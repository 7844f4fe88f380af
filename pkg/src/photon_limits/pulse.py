"""Pulse shapes and return-flux models.

A return flux is ``lambda(t) = alpha * s(t - tau) + floor(t)`` where the floor
collects the ambient level, an optional dark-count level and an optional
exponentially decaying pile-up term ``beta * gamma * exp(-gamma t)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr

__all__ = [
    "DomainError",
    "GaussianPulse",
    "TabulatedPulse",
    "PulseShape",
    "Pileup",
    "DarkCount",
    "FluxModel",
    "ObservationWindow",
    "eval_flux",
    "pulse_energy",
    "pulse_derivative",
    "load_tabulated_pulse",
    "save_tabulated_pulse",
]

NORMALIZATION_TOL = 1e-6
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


@dataclass(frozen=True)
class GaussianPulse:
    """Unit-mass Gaussian pulse centred at zero."""

    sigma_t: float

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be positive, got {self.sigma_t}")

    @property
    def width(self) -> float:
        return float(self.sigma_t)

    def density(self, t):
        u = np.asarray(t, dtype=float) / self.sigma_t
        return np.exp(-0.5 * u * u) / (_SQRT_2PI * self.sigma_t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return -t / self.sigma_t**2 * self.density(t)

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        s2 = self.sigma_t**2
        return (t * t / s2 - 1.0) / s2 * self.density(t)

    def mass(self, lo, hi):
        """Pulse mass inside ``[lo, hi]``."""
        return float(ndtr(hi / self.sigma_t) - ndtr(lo / self.sigma_t))


@dataclass(frozen=True, eq=False)
class TabulatedPulse:
    """Pulse sampled on a uniform, strictly ascending time grid.

    Values outside the grid replicate the edge samples. A table whose
    trapezoidal integral is off by more than ``1e-6`` is rescaled to unit mass
    and ``renormalized`` is set.
    """

    t_grid: np.ndarray
    s_values: np.ndarray
    renormalized: bool = field(default=False, init=False)

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        s = np.asarray(self.s_values, dtype=float)
        if t.ndim != 1 or t.shape != s.shape or t.size < 2:
            raise ValueError("t_grid and s_values must be 1D arrays of equal length >= 2")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("t_grid must be strictly ascending")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise ValueError("t_grid must be uniformly spaced")
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise ValueError("s_values must be finite and nonnegative")
        mass = trapezoid(s, t)
        if mass <= 0:
            raise ValueError("tabulated pulse has zero mass")
        renorm = abs(mass - 1.0) > NORMALIZATION_TOL
        if renorm:
            warnings.warn(
                f"tabulated pulse integrates to {mass:.8g}; rescaling to unit mass",
                stacklevel=3,
            )
            s = s / mass
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "s_values", s)
        object.__setattr__(self, "renormalized", renorm)

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def width(self) -> float:
        """Standard deviation of the tabulated shape."""
        t, s = self.t_grid, self.s_values
        mu = trapezoid(t * s, t)
        return float(np.sqrt(max(trapezoid((t - mu) ** 2 * s, t), 0.0)))

    def density(self, t):
        return np.interp(t, self.t_grid, self.s_values)

    def _slope_table(self):
        # np.gradient: central differences inside, one-sided at both edges
        return np.gradient(self.s_values, self.dt)

    def derivative(self, t, *, strict: bool = True):
        t = np.asarray(t, dtype=float)
        if strict and (np.any(t < self.t_grid[0]) or np.any(t > self.t_grid[-1])):
            raise DomainError("derivative requested outside the tabulated grid")
        return np.interp(t, self.t_grid, self._slope_table(), left=0.0, right=0.0)

    def mass(self, lo, hi):
        grid = np.linspace(lo, hi, max(int(np.ceil((hi - lo) / self.dt)) * 4 + 1, 3))
        return float(trapezoid(self.density(grid), grid))


PulseShape = Union[GaussianPulse, TabulatedPulse]


@dataclass(frozen=True)
class Pileup:
    """Early-trigger background ``beta * gamma * exp(-gamma t)`` for ``t >= 0``."""

    beta: float
    gamma: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("pile-up beta must be nonnegative")
        if not self.gamma > 0:
            raise DomainError("pile-up gamma must be positive")

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.beta * self.gamma * np.exp(-self.gamma * np.maximum(t, 0.0)), 0.0)

    def mass(self, lo, hi):
        lo, hi = max(lo, 0.0), max(hi, 0.0)
        return float(self.beta * (np.exp(-self.gamma * lo) - np.exp(-self.gamma * hi)))


@dataclass(frozen=True)
class DarkCount:
    """Dark-count rate shared by ``n_pixels`` pixels of equal area."""

    lambda_dark: float
    n_pixels: int = 1

    def __post_init__(self):
        if self.lambda_dark < 0 or self.n_pixels < 1:
            raise ValueError("lambda_dark must be >= 0 and n_pixels >= 1")

    @property
    def level(self) -> float:
        return self.lambda_dark / self.n_pixels


@dataclass(frozen=True)
class FluxModel:
    """Return flux ``alpha * s(t - tau)`` on top of a (possibly time-varying) floor."""

    alpha: float
    lambda_b: float
    pulse: PulseShape
    pileup: Pileup | None = None
    dark: DarkCount | None = None

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_b < 0:
            raise ValueError("alpha and lambda_b must be nonnegative")

    @property
    def floor_level(self) -> float:
        """Constant part of the floor (ambient plus dark count)."""
        return self.lambda_b + (self.dark.level if self.dark is not None else 0.0)

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.pulse, GaussianPulse)

    @property
    def has_constant_floor(self) -> bool:
        return self.pileup is None or self.pileup.beta == 0

    def floor(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.floor_level)
        if self.pileup is not None:
            out = out + self.pileup.rate(t)
        return out

    def signal(self, tau, t):
        return self.alpha * self.pulse.density(np.asarray(t, dtype=float) - tau)

    def per_pixel(self, n_pixels: int) -> "FluxModel":
        """Split a unit-space model evenly over ``n_pixels`` equal pixels."""
        if n_pixels < 1:
            raise ValueError("n_pixels must be >= 1")
        pileup = None if self.pileup is None else Pileup(self.pileup.beta / n_pixels, self.pileup.gamma)
        dark = None if self.dark is None else DarkCount(self.dark.lambda_dark, self.dark.n_pixels * n_pixels)
        return replace(
            self,
            alpha=self.alpha / n_pixels,
            lambda_b=self.lambda_b / n_pixels,
            pileup=pileup,
            dark=dark,
        )

    def with_pulse(self, pulse: PulseShape) -> "FluxModel":
        return replace(self, pulse=pulse)


@dataclass(frozen=True)
class ObservationWindow:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")

    @property
    def length(self) -> float:
        return self.t_max - self.t_min

    def grid(self, dt: float) -> np.ndarray:
        """Uniform grid of spacing ``dt`` including both endpoints."""
        n = int(round(self.length / dt))
        return np.linspace(self.t_min, self.t_min + n * dt, n + 1)

    def check_pulse(self, pulse: PulseShape) -> bool:
        """Warn (never raise) when six pulse widths do not fit in the window."""
        fits = 6.0 * pulse.width <= self.length
        if not fits:
            warnings.warn("pulse is not well inside the observation window", stacklevel=2)
        return fits


def eval_flux(model: FluxModel, tau: float, t):
    """Flux density ``lambda(t)`` for a return centred at ``tau``."""
    return model.signal(tau, t) + model.floor(t)


def pulse_energy(model: FluxModel, window: ObservationWindow) -> float:
    """Expected photon count ``Q`` over the window."""
    q = model.alpha + window.length * model.floor_level
    if model.pileup is not None:
        q += model.pileup.mass(window.t_min, window.t_max)
    return float(q)


def pulse_derivative(shape: PulseShape, t):
    """Time derivative of the pulse shape."""
    return shape.derivative(t)


def load_tabulated_pulse(path) -> TabulatedPulse:
    """Read a two-column ``t s(t)`` text file."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two whitespace-separated columns")
    return TabulatedPulse(data[:, 0], data[:, 1])


def save_tabulated_pulse(pulse: TabulatedPulse, path) -> None:
    np.savetxt(Path(path), np.column_stack([pulse.t_grid, pulse.s_values]), fmt="%.12g")
