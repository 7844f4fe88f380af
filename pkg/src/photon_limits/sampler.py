"""Photon time-stamp generation for inhomogeneous Poisson returns.

Random streams are derived from ``(seed, *stream)`` through
:class:`numpy.random.SeedSequence`, so a trial's output depends only on its
key and never on the order in which trials run.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .pulse import DomainError, FluxModel, GaussianPulse, ObservationWindow
from .scene import UnsupportedModelError

__all__ = [
    "SeededRng",
    "make_rng",
    "TimeStamps",
    "draw_count",
    "sample_gaussian",
    "sample_inverse_cdf",
    "sample_inverse_cdf_rows",
    "sample_pileup",
    "sample_background",
    "write_stamps",
    "read_stamps",
]


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random stream keyed by a seed and a stream id."""

    seed: int
    stream: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        return make_rng(self.seed, *self.stream)

    def child(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(key))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class TimeStamps:
    """Sorted arrival times of one pixel.

    ``counts`` holds the (signal, background, pile-up) tallies when the
    components are known.
    """

    times: np.ndarray
    counts: tuple[int, int, int] | None = None

    def __post_init__(self):
        t = np.sort(np.asarray(self.times, dtype=float))
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        if self.counts is not None and sum(self.counts) != t.size:
            raise ValueError("component counts do not add up to the number of stamps")

    def __len__(self) -> int:
        return self.times.size

    def tobytes(self) -> bytes:
        return self.times.tobytes()


def draw_count(rate: float, rng) -> int:
    """Poisson photon count with the given mean."""
    if not rate >= 0:
        raise DomainError(f"Poisson rate must be nonnegative, got {rate}")
    return int(_as_generator(rng).poisson(rate))


def _uniform(gen, window: ObservationWindow, size):
    return gen.uniform(window.t_min, window.t_max, size)


def _truncated_exponential(gen, gamma: float, window: ObservationWindow, size: int) -> np.ndarray:
    lo, hi = max(window.t_min, 0.0), window.t_max
    out = np.empty(0)
    while out.size < size:
        draw = gen.exponential(1.0 / gamma, size - out.size)
        out = np.concatenate([out, draw[(draw >= lo) & (draw <= hi)]])
    return out


def sample_background(model: FluxModel, window: ObservationWindow, rng) -> tuple[np.ndarray, int, int]:
    """Draw the uniform-floor and pile-up components of a flux model.

    Returns ``(times, n_uniform, n_pileup)``.
    """
    gen = _as_generator(rng)
    m_b = gen.poisson(model.floor_level * window.length)
    t_b = _uniform(gen, window, m_b)
    m_p = 0
    t_p = np.empty(0)
    if model.pileup is not None and model.pileup.beta > 0:
        m_p = gen.poisson(model.pileup.mass(window.t_min, window.t_max))
        t_p = _truncated_exponential(gen, model.pileup.gamma, window, m_p)
    return np.concatenate([t_b, t_p]), int(m_b), int(m_p)


def sample_gaussian(
    model: FluxModel,
    tau: float,
    window: ObservationWindow,
    rng,
    *,
    truncate: bool = False,
) -> TimeStamps:
    """Two-step sampler: Poisson counts per component, then their shapes.

    Signal stamps falling outside the window are kept unless ``truncate``.
    """
    if not isinstance(model.pulse, GaussianPulse):
        raise UnsupportedModelError("sample_gaussian needs a Gaussian pulse; use sample_inverse_cdf")
    if model.pileup is not None and model.pileup.beta > 0:
        raise UnsupportedModelError("model has a pile-up term; use sample_pileup")
    gen = _as_generator(rng)
    m_s = gen.poisson(model.alpha)
    t_s = gen.normal(tau, model.pulse.sigma_t, m_s)
    if truncate:
        t_s = t_s[(t_s >= window.t_min) & (t_s <= window.t_max)]
        m_s = t_s.size
    m_b = gen.poisson(model.floor_level * window.length)
    t_b = _uniform(gen, window, m_b)
    return TimeStamps(np.concatenate([t_s, t_b]), (int(m_s), int(m_b), 0))


def _cdf_table(flux: np.ndarray) -> np.ndarray:
    flux = np.asarray(flux, dtype=float)
    if np.any(~np.isfinite(flux)):
        raise DomainError("flux must be finite")
    if np.any(flux < 0):
        raise DomainError("flux must be nonnegative")
    return np.cumsum(flux, axis=-1)


def _nearest_index(cdf: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Index of the table entry closest to ``p`` (bisection, O(log K))."""
    i = np.searchsorted(cdf, p)
    i = np.clip(i, 1, cdf.size - 1)
    take_left = np.abs(cdf[i - 1] - p) <= np.abs(cdf[i] - p)
    return i - take_left


def sample_inverse_cdf(t_grid, flux, rng, *, mass: float | None = None) -> TimeStamps:
    """Sample from a tabulated flux by numerically inverting its CDF.

    The count is Poisson with mean ``mass`` (default: trapezoidal integral of
    ``flux``). Each stamp is the grid time whose normalised cumulative sum is
    nearest to a uniform draw.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    c = _cdf_table(flux)
    gen = _as_generator(rng)
    if mass is None:
        mass = float(trapezoid(flux, t_grid))
    if c[-1] <= 0 or mass <= 0:
        return TimeStamps(np.empty(0), (0, 0, 0))
    m = gen.poisson(mass)
    p = gen.random(m)
    idx = _nearest_index(c / c[-1], p)
    return TimeStamps(t_grid[idx])


def sample_inverse_cdf_rows(t_grid, flux_rows, masses, rng) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF sampling for many pixels at once.

    Row ``n`` of ``flux_rows`` is sampled ``Poisson(masses[n])`` times. Returns
    the stamps of all rows concatenated, sorted within each row, and CSR
    offsets of length ``rows + 1``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    c = _cdf_table(flux_rows)
    rows = c.shape[0]
    total = c[:, -1:].copy()
    total[total <= 0] = 1.0
    gen = _as_generator(rng)
    counts = gen.poisson(np.asarray(masses, dtype=float))
    counts[c[:, -1] <= 0] = 0
    offsets = np.concatenate([[0], np.cumsum(counts)])
    row_of = np.repeat(np.arange(rows), counts)
    p = gen.random(offsets[-1])
    # Stack rows into one ascending table: row n occupies (n, n + 1].
    stacked = (c / total + np.arange(rows)[:, None]).ravel()
    idx = _nearest_index(stacked, p + row_of)
    k = t_grid.size
    # Nearest-index can land on the previous row's last entry; fold it back.
    idx = np.clip(idx, row_of * k, row_of * k + k - 1)
    times = t_grid[idx - row_of * k]
    order = np.lexsort((times, row_of))
    return times[order], offsets


def sample_pileup(model: FluxModel, tau: float, window: ObservationWindow, rng) -> TimeStamps:
    """Three independent components: pulse, exponential pile-up, uniform floor."""
    if model.pileup is None:
        raise DomainError("model has no pile-up term")
    if not model.pileup.gamma > 0:
        raise DomainError("pile-up gamma must be positive")
    gen = _as_generator(rng)
    m_s = gen.poisson(model.alpha)
    if isinstance(model.pulse, GaussianPulse):
        t_s = gen.normal(tau, model.pulse.sigma_t, m_s)
    else:
        pulse = model.pulse
        c = _cdf_table(pulse.s_values)
        t_s = pulse.t_grid[_nearest_index(c / c[-1], gen.random(m_s))] + tau
    m_p = gen.poisson(model.pileup.mass(window.t_min, window.t_max))
    t_p = _truncated_exponential(gen, model.pileup.gamma, window, m_p)
    m_b = gen.poisson(model.floor_level * window.length)
    t_b = _uniform(gen, window, m_b)
    return TimeStamps(np.concatenate([t_s, t_p, t_b]), (int(m_s), int(m_b), int(m_p)))


def write_stamps(path, pixel_times, seed: int, n_pixels: int, trial: int) -> None:
    """Write ``pixel_index t`` lines under a ``# seed=.. N=.. trial=..`` header.

    ``pixel_times`` is a sequence of per-pixel time arrays.
    """
    with open(path, "w") as fh:
        fh.write(f"# seed={int(seed)} N={int(n_pixels)} trial={int(trial)}\n")
        for n, times in enumerate(pixel_times):
            for t in np.asarray(times, dtype=float).tolist():
                fh.write(f"{n} {t!r}\n")


def read_stamps(path) -> tuple[dict, list[np.ndarray]]:
    """Inverse of :func:`write_stamps`; returns ``(header, per-pixel times)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# seed=.. N=.. trial=..' header")
    header = {}
    for tok in lines[0][1:].split():
        key, _, val = tok.partition("=")
        header[key] = int(val)
    if not {"seed", "N", "trial"} <= header.keys():
        raise ValueError(f"{path}: header must define seed, N and trial")
    buckets: list[list[float]] = [[] for _ in range(header["N"])]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            idx, t = line.split()
            buckets[int(idx)].append(float(t))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed stamp line {line!r}") from exc
    return header, [np.sort(np.array(b, dtype=float)) for b in buckets]
