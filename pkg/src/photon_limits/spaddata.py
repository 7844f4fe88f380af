"""Timestamp cubes from SPAD arrays: cleaning, pseudo ground truth and bootstrap MSE.

A cube stores a variable-length list of stamps for every pixel of an
``H x W`` array, packed as CSR arrays in row-major pixel order. The same
pipeline runs on synthetic cubes made by :func:`make_fan_cube`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pulse import DomainError
from .sampler import _as_generator
from .scene import ConfigurationError

__all__ = [
    "TimestampCube",
    "PseudoGroundTruth",
    "SigmaEstimate",
    "BootstrapPoint",
    "load_cube",
    "save_cube",
    "make_fan_cube",
    "fan_tau_map",
    "reject_outliers",
    "pseudo_ground_truth",
    "estimate_sigma_t",
    "estimate_alpha0",
    "binned_bias",
    "binned_bootstrap_mse",
    "write_bootstrap_csv",
    "BOOTSTRAP_CSV_HEADER",
]

BOOTSTRAP_CSV_HEADER = "b,N_effective,mse_sim,mse_theory,resamples"
JITTER_BINS = 2.0
JITTER_PASSES = 5
COARSE_WIDTH_SIGMAS = 20.0
KEEP_SIGMAS = 3.0


@dataclass(frozen=True, eq=False)
class TimestampCube:
    """Per-pixel stamp lists of an ``H x W`` array.

    ``times[offsets[p]:offsets[p + 1]]`` are the sorted stamps of pixel
    ``p = y * width + x``.
    """

    height: int
    width: int
    frames: int
    tdc_resolution: float
    times: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.frames < 1:
            raise ValueError("height, width and frames must be positive")
        if not self.tdc_resolution > 0:
            raise ValueError("tdc_resolution must be positive")
        t = np.asarray(self.times, dtype=float)
        off = np.asarray(self.offsets, dtype=np.int64)
        if off.shape != (self.height * self.width + 1,) or off[0] != 0 or off[-1] != t.size:
            raise ValueError("offsets do not match the pixel grid and stamp count")
        if np.any(np.diff(off) < 0):
            raise ValueError("offsets must be nondecreasing")
        if t.size and (not np.all(np.isfinite(t)) or t.min() < 0):
            raise ValueError("stamps must be finite and nonnegative")
        t.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "offsets", off)

    @classmethod
    def from_pixels(cls, height, width, frames, tdc_resolution, pixels) -> "TimestampCube":
        """Build from a row-major sequence of per-pixel stamp arrays."""
        pixels = [np.sort(np.asarray(p, dtype=float)) for p in pixels]
        counts = [p.size for p in pixels]
        times = np.concatenate(pixels) if pixels else np.empty(0)
        return cls(height, width, frames, tdc_resolution, times, np.concatenate([[0], np.cumsum(counts)]))

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets).reshape(self.height, self.width)

    def pixel(self, y: int, x: int) -> np.ndarray:
        if not (0 <= y < self.height and 0 <= x < self.width):
            raise IndexError(f"pixel ({y}, {x}) outside a {self.height}x{self.width} cube")
        p = y * self.width + x
        return self.times[self.offsets[p] : self.offsets[p + 1]]

    def pixels(self):
        for p in range(self.n_pixels):
            yield self.times[self.offsets[p] : self.offsets[p + 1]]


@dataclass(frozen=True, eq=False)
class PseudoGroundTruth:
    """Per-pixel mean of the retained stamps; ``nan`` where nothing was retained."""

    tau: np.ndarray
    counts: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        return self.counts == 0

    @property
    def coverage(self) -> float:
        return float(np.mean(~self.missing))


@dataclass(frozen=True, eq=False)
class SigmaEstimate:
    map: np.ndarray
    mean: float


@dataclass(frozen=True)
class BootstrapPoint:
    b: int
    n_effective: int
    mse_sim: float
    mse_theory: float
    bias: float
    var_sim: float
    resamples: int
    coverage: float


# --------------------------------------------------------------------------
# I/O


def load_cube(path) -> TimestampCube:
    """Read ``# H W frames tdc_resolution`` followed by ``y x t`` lines."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# H W frames tdc_resolution' header")
    try:
        h, w, frames = (int(v) for v in lines[0][1:].split()[:3])
        res = float(lines[0][1:].split()[3])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from exc
    ys, xs, ts = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            y, x, t = int(parts[0]), int(parts[1]), float(parts[2])
            if len(parts) != 3:
                raise ValueError
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed stamp line {line!r}") from exc
        if not (0 <= y < h and 0 <= x < w):
            raise ValueError(f"{path}:{lineno}: pixel ({y}, {x}) outside a {h}x{w} cube")
        if not (np.isfinite(t) and t >= 0):
            raise ValueError(f"{path}:{lineno}: stamp {t} outside the TDC range")
        ys.append(y)
        xs.append(x)
        ts.append(t)
    pix = np.asarray(ys, dtype=np.int64) * w + np.asarray(xs, dtype=np.int64)
    t = np.asarray(ts, dtype=float)
    order = np.lexsort((t, pix))
    counts = np.bincount(pix, minlength=h * w)
    return TimestampCube(h, w, frames, res, t[order], np.concatenate([[0], np.cumsum(counts)]))


def save_cube(cube: TimestampCube, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {cube.height} {cube.width} {cube.frames} {float(cube.tdc_resolution)!r}\n")
        for p, stamps in enumerate(cube.pixels()):
            y, x = divmod(p, cube.width)
            for t in stamps:
                fh.write(f"{y} {x} {float(t)!r}\n")


# --------------------------------------------------------------------------
# synthetic cubes


def fan_tau_map(size: int, background: float = 7.0, near: float = 4.5, blades: int = 4) -> np.ndarray:
    """Fan-like object in front of a flat background.

    Blades sit inside a disc around the centre and tilt slightly with radius.
    """
    c = (np.arange(size) + 0.5) / size - 0.5
    yy, xx = np.meshgrid(c, c, indexing="ij")
    r = np.hypot(xx, yy)
    theta = np.arctan2(yy, xx)
    blade = (np.cos(blades * theta) > 0.2) & (r < 0.4) | (r < 0.06)
    return np.where(blade, near + 1.5 * r, background)


def make_fan_cube(
    size: int = 32,
    frames: int = 1000,
    *,
    sigma_t: float = 0.5,
    signal_fraction: float = 0.6,
    secondary_fraction: float = 0.0,
    secondary_delay: float | None = None,
    spike_fraction: float = 0.0,
    background_fraction: float = 0.0,
    t_range: float = 10.0,
    tdc_resolution: float = 0.01,
    tau_map: np.ndarray | None = None,
    rng=0,
) -> tuple[TimestampCube, np.ndarray]:
    """Synthetic cube with one detection per pixel per frame at most.

    Each frame records a primary-pulse stamp with probability
    ``signal_fraction``, a secondary pulse ``secondary_delay`` later (default
    ten pulse widths), a spike at the start or end of the range, or a uniform
    background stamp; otherwise nothing. Stamps are quantised to the TDC grid
    and clipped to ``[0, t_range]``. Returns the cube and the true map.
    """
    probs = np.array([signal_fraction, secondary_fraction, spike_fraction, background_fraction])
    if np.any(probs < 0) or probs.sum() > 1:
        raise ValueError("event fractions must be nonnegative and sum to at most 1")
    gen = _as_generator(rng)
    tau = fan_tau_map(size) if tau_map is None else np.asarray(tau_map, dtype=float)
    if tau.shape[0] != tau.shape[1]:
        raise ConfigurationError("tau map must be square")
    delay = 10.0 * sigma_t if secondary_delay is None else secondary_delay
    n_pix = tau.size
    kinds = gen.choice(5, size=(n_pix, frames), p=np.append(probs, 1 - probs.sum()))
    flat_tau = tau.ravel()
    pixels = []
    for p in range(n_pix):
        k = np.bincount(kinds[p], minlength=5)
        parts = [
            gen.normal(flat_tau[p], sigma_t, k[0]),
            gen.normal(flat_tau[p] + delay, sigma_t, k[1]),
            np.where(gen.random(k[2]) < 0.7, 0.0, t_range) + gen.uniform(-2, 2, k[2]) * tdc_resolution,
            gen.uniform(0.0, t_range, k[3]),
        ]
        t = np.clip(np.concatenate(parts), 0.0, t_range)
        pixels.append(np.round(t / tdc_resolution) * tdc_resolution)
    cube = TimestampCube.from_pixels(tau.shape[0], tau.shape[1], frames, tdc_resolution, pixels)
    return cube, tau


# --------------------------------------------------------------------------
# cleaning


def _peak(stamps: np.ndarray, bin_width: float, gen) -> float:
    """Mode of a histogram smoothed by averaging jittered copies of the stamps."""
    lo, hi = stamps.min(), stamps.max()
    n_bins = max(int(np.ceil((hi - lo) / bin_width)), 1)
    edges = lo + bin_width * np.arange(n_bins + 1)
    hist = np.zeros(n_bins)
    for _ in range(JITTER_PASSES):
        jittered = stamps + gen.normal(0.0, JITTER_BINS * bin_width, stamps.size)
        hist += np.histogram(jittered, bins=edges)[0]
    i = int(np.argmax(hist))
    return 0.5 * (edges[i] + edges[i + 1])


def _mean_shift(stamps: np.ndarray, start: float, half: float, max_iter: int = 100) -> np.ndarray:
    """Iterate ``window -> mean`` until the retained set stops changing."""
    keep = np.abs(stamps - start) <= half
    for _ in range(max_iter):
        if not keep.any():
            break
        nxt = np.abs(stamps - stamps[keep].mean()) <= half
        if np.array_equal(nxt, keep):
            break
        keep = nxt
    return keep


def reject_outliers(
    cube: TimestampCube,
    sigma_t_guess: float,
    *,
    coarse_width: float | None = None,
    rng=0,
) -> TimestampCube:
    """Keep the stamps within ``3 sigma_t`` of each pixel's primary pulse.

    A wide window (``20 sigma_t`` by default) around the stamp mean bounds
    the search. The pulse centre is the mode of a jitter-smoothed histogram
    whose bins are half a pulse width (never finer than the TDC), refined
    by mean shift over a ``+-3 sigma_t`` window. A second mean shift started
    from the window mean wins when its retained set contains the first one,
    which makes the operation idempotent. Empty pixels stay empty.
    """
    if not sigma_t_guess > 0:
        raise DomainError("sigma_t_guess must be positive")
    gen = _as_generator(rng)
    width = COARSE_WIDTH_SIGMAS * sigma_t_guess if coarse_width is None else coarse_width
    bin_width = max(cube.tdc_resolution, sigma_t_guess / 2.0)
    half = KEEP_SIGMAS * sigma_t_guess
    kept = []
    for stamps in cube.pixels():
        if stamps.size == 0:
            kept.append(stamps)
            continue
        c0 = stamps.mean()
        coarse = stamps[np.abs(stamps - c0) <= width / 2]
        if coarse.size == 0:
            coarse = stamps
        keep = _mean_shift(coarse, _peak(coarse, bin_width, gen), half)
        # TDC quantisation allows several nearby fixed points; prefer the one
        # reached from the mean when it contains the peak's set, so that a
        # pixel which is already clean is kept whole.
        from_mean = _mean_shift(coarse, coarse.mean(), half)
        if np.all(from_mean[keep]):
            keep = from_mean
        kept.append(coarse[keep])
    return TimestampCube.from_pixels(cube.height, cube.width, cube.frames, cube.tdc_resolution, kept)


def _segment_sums(times: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    counts = np.diff(offsets)
    return np.bincount(np.repeat(np.arange(counts.size), counts), weights=times, minlength=counts.size)


def pseudo_ground_truth(clean: TimestampCube) -> PseudoGroundTruth:
    counts = clean.counts
    sums = _segment_sums(clean.times, clean.offsets)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(counts > 0, sums.reshape(counts.shape) / counts, np.nan)
    return PseudoGroundTruth(tau, counts)


def estimate_sigma_t(clean: TimestampCube) -> SigmaEstimate:
    """Per-pixel standard deviation of retained stamps and its average."""
    out = np.full(clean.n_pixels, np.nan)
    for p, stamps in enumerate(clean.pixels()):
        if stamps.size:
            out[p] = stamps.std()
    sig = out.reshape(clean.height, clean.width)
    mean = float(np.nanmean(sig)) if np.any(np.isfinite(sig)) else float("nan")
    return SigmaEstimate(sig, mean)


def estimate_alpha0(clean: TimestampCube, K: int) -> float:
    """Retained stamps per frame, summed over pixels, times ``K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return float(clean.times.size / clean.frames * K)


# --------------------------------------------------------------------------
# binned bootstrap


def _blocks(clean: TimestampCube, b: int):
    """Pool stamps of ``b x b`` blocks; returns ``(times, offsets, nb)``."""
    if b < 1 or clean.height % b or clean.width % b:
        raise ConfigurationError(f"bin size {b} must divide the {clean.height}x{clean.width} array")
    nby, nbx = clean.height // b, clean.width // b
    yy, xx = np.divmod(np.arange(clean.n_pixels), clean.width)
    block_of_pixel = (yy // b) * nbx + (xx // b)
    counts = np.diff(clean.offsets)
    block = np.repeat(block_of_pixel, counts)
    order = np.argsort(block, kind="stable")
    bc = np.bincount(block, minlength=nby * nbx)
    return clean.times[order], np.concatenate([[0], np.cumsum(bc)]), (nby, nbx)


def _upsample(a: np.ndarray, b: int) -> np.ndarray:
    return np.repeat(np.repeat(a, b, axis=0), b, axis=1)


def binned_bias(clean: TimestampCube, pgt: PseudoGroundTruth, b: int) -> float:
    """Mean squared gap between the ``b x b`` block-averaged pseudo ground truth and itself.

    Blocks average the covered pixels only; missing pixels are left out of
    both the averages and the integral. On nested bin sizes the result is
    nondecreasing in ``b``.
    """
    if b < 1 or clean.height % b or clean.width % b:
        raise ConfigurationError(f"bin size {b} must divide the {clean.height}x{clean.width} array")
    ok = ~pgt.missing
    vals = np.where(ok, pgt.tau, 0.0)
    shape = (clean.height // b, b, clean.width // b, b)
    sums = vals.reshape(shape).sum(axis=(1, 3))
    cover = ok.reshape(shape).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(cover > 0, sums / np.maximum(cover, 1), np.nan)
    if not ok.any():
        return float("nan")
    return float(np.mean((_upsample(means, b)[ok] - pgt.tau[ok]) ** 2))


def binned_bootstrap_mse(
    clean: TimestampCube,
    pgt: PseudoGroundTruth,
    bins,
    *,
    K: int = 3,
    resamples: int = 100,
    sigma_t: float | None = None,
    rng=0,
) -> list[BootstrapPoint]:
    """Bootstrap MSE of ``b x b`` binned mean estimates against the pseudo ground truth.

    Every repeat draws ``K b^2`` stamps with replacement from each block's
    pool, averages them and compares the upsampled map with the pseudo ground
    truth over covered pixels. The theory overlay is the numerical bias plus
    ``sigma_t^2 N^2 / alpha0`` with ``N`` blocks per side.
    """
    if resamples < 2:
        raise ValueError("need at least two resamples")
    gen = _as_generator(rng)
    sig = estimate_sigma_t(clean).mean if sigma_t is None else sigma_t
    alpha0 = estimate_alpha0(clean, K)
    ok = ~pgt.missing
    out = []
    for b in bins:
        times, offsets, shape = _blocks(clean, b)
        counts = np.diff(offsets)
        draws = K * b * b
        has = counts > 0
        idx = offsets[:-1][has, None, None] + np.floor(
            gen.random((int(has.sum()), resamples, draws)) * counts[has, None, None]
        ).astype(np.int64)
        est = np.full((counts.size, resamples), np.nan)
        est[has] = times[idx].mean(axis=2)
        maps = _upsample(est.reshape(*shape, resamples), b)
        err = (maps[ok] - pgt.tau[ok][:, None]) ** 2
        mse_sim = float(np.mean(err))
        mean_map = np.mean(maps[ok], axis=1)
        var_sim = float(np.mean((maps[ok] - mean_map[:, None]) ** 2))
        bias = binned_bias(clean, pgt, b)
        n_eff = shape[0]
        theory = bias + sig**2 * n_eff**2 / alpha0 if alpha0 > 0 else float("inf")
        out.append(BootstrapPoint(int(b), int(n_eff), mse_sim, float(theory), bias, var_sim, resamples, pgt.coverage))
    return out


def write_bootstrap_csv(points, path=None) -> str:
    lines = [BOOTSTRAP_CSV_HEADER]
    for p in points:
        lines.append(f"{p.b},{p.n_effective},{p.mse_sim:.10g},{p.mse_theory:.10g},{p.resamples}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
