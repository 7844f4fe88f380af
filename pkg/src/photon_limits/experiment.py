"""Monte Carlo sweeps of reconstruction MSE against pixel count.

Each trial is keyed by ``(N, trial)`` and draws from its own random stream, so
results do not depend on how trials are scheduled across worker threads.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence
from xml.sax.saxutils import escape

import numpy as np
from scipy.integrate import trapezoid

from .estimator import SOLVERS, BatchModel, LikelihoodContext, estimate, estimate_batch
from .pulse import (
    DarkCount,
    FluxModel,
    GaussianPulse,
    ObservationWindow,
    Pileup,
    PulseShape,
    load_tabulated_pulse,
)
from .sampler import TimeStamps, _truncated_exponential, make_rng, sample_inverse_cdf_rows
from .scene import (
    ConfigurationError,
    ToaProfile,
    UnsupportedModelError,
    bin_scene,
    effective_pulses_exact,
    gradient,
    load_profile,
    make_flat_profile,
    make_ramp_profile,
    make_sigmoid_profile,
    make_synthetic_depth_map,
    piecewise_reconstruction,
)
from .theory import (
    MsePrediction,
    SimulatedPoint,
    SweepCurve,
    mse_1d,
    mse_1d_simplified,
    mse_2d,
    mse_numerical,
)

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "load_config",
    "config_to_text",
    "worker_count",
    "empirical_mse",
    "decompose_empirical",
    "simulate_1d",
    "simulate_2d",
    "run_1d_sweep",
    "run_ablation",
    "run_2d_sweep",
    "run_pileup",
    "run_noise_floor_sweep",
    "convert_units",
    "write_csv",
    "write_svg",
    "CSV_HEADER",
]

CSV_HEADER = "N,bias_theory,var_theory,mse_theory,mse_sim,bias_sim,var_sim,trials,seed"
THREADS_ENV = "PHOTON_LIMITS_THREADS"
SCENES_1D = ("sigmoid", "ramp", "flat")
_NOISE_STREAM = 0x5EED


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a sweep.

    ``scene`` is ``sigmoid``, ``ramp``, ``flat``, ``depthmap`` (synthetic 2D
    map) or a path to a profile file. ``pulse`` is ``gaussian`` or a path to
    a two-column tabulated pulse. ``alpha0``, ``lambda_b``, ``pileup_beta``
    and ``lambda_dark`` are scene totals; pixels receive their share.
    ``noise_sigma`` adds white noise to the ground-truth profile and
    ``smooth_sigma`` (grid cells) blurs the synthetic depth map. ``workers =
    0`` uses every available core, capped by ``PHOTON_LIMITS_THREADS``.
    """

    dx: float = 1 / 2048
    dt: float = 1 / 256
    t_min: float = 0.0
    t_max: float = 10.0
    sigma_t: float = 0.5
    alpha0: float = 1e4
    lambda_b: float = 0.0
    n_values: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    trials: int = 200
    seed: int = 0
    solver: str = "zero"
    scene: str = "sigmoid"
    pulse: str = "gaussian"
    pileup_beta: float = 0.0
    pileup_gamma: float = 4.0
    lambda_dark: float = 0.0
    floor_values: tuple[float, ...] = (0.0, 10.0, 30.0)
    init: str = "oracle"
    noise_sigma: float = 0.0
    smooth_sigma: float = 2.0
    workers: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "floor_values", tuple(float(v) for v in self.floor_values))
        for name in ("dx", "dt", "sigma_t", "alpha0", "pileup_gamma"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("lambda_b", "pileup_beta", "lambda_dark", "noise_sigma", "smooth_sigma"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")
        if any(v < 0 for v in self.floor_values):
            raise ConfigurationError("floor_values must be nonnegative")
        if not self.t_max > self.t_min:
            raise ConfigurationError("t_max must exceed t_min")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ConfigurationError("n_values must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigurationError("n_values must be strictly ascending")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"solver must be one of {', '.join(SOLVERS)}")
        if self.init not in ("oracle", "mean"):
            raise ConfigurationError("init must be 'oracle' or 'mean'")
        if self.workers < 0:
            raise ConfigurationError("workers must be >= 0")
        k = round(1 / self.dx)
        if abs(k * self.dx - 1) > 1e-9:
            raise ConfigurationError(f"dx={self.dx} does not divide the unit interval")

    @property
    def window(self) -> ObservationWindow:
        return ObservationWindow(self.t_min, self.t_max)

    @property
    def n_cells(self) -> int:
        return int(round(1 / self.dx))

    def pulse_shape(self) -> PulseShape:
        if self.pulse == "gaussian":
            return GaussianPulse(self.sigma_t)
        return load_tabulated_pulse(self.pulse)

    def flux_model(self, lambda_b: float | None = None) -> FluxModel:
        """Scene-level flux model (``alpha = alpha0``)."""
        pileup = Pileup(self.pileup_beta, self.pileup_gamma) if self.pileup_beta > 0 else None
        dark = DarkCount(self.lambda_dark) if self.lambda_dark > 0 else None
        lb = self.lambda_b if lambda_b is None else lambda_b
        return FluxModel(self.alpha0, lb, self.pulse_shape(), pileup=pileup, dark=dark)

    def profile(self) -> ToaProfile:
        if self.scene == "sigmoid":
            prof = make_sigmoid_profile(self.dx)
        elif self.scene == "ramp":
            prof = make_ramp_profile(self.dx, slope=1.0, offset=0.5 * (self.t_min + self.t_max) - 0.5)
        elif self.scene == "flat":
            prof = make_flat_profile(self.dx, 0.5 * (self.t_min + self.t_max))
        elif self.scene == "depthmap":
            span = self.t_max - self.t_min
            prof = make_synthetic_depth_map(
                self.n_cells,
                tau_min=self.t_min + 0.3 * span,
                tau_max=self.t_min + 0.7 * span,
                smooth_sigma=self.smooth_sigma,
            )
        else:
            prof = load_profile(self.scene)
        if self.noise_sigma > 0:
            gen = make_rng(self.seed, _NOISE_STREAM)
            prof = ToaProfile(prof.values + gen.normal(0.0, self.noise_sigma, prof.values.shape))
        return prof


def _parse_number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"not a number: {text!r}") from exc


def _parse_value(field: dataclasses.Field, text: str):
    kind = field.type
    text = text.strip()
    if kind == "float":
        return float(_parse_number(text))
    if kind == "int":
        val = _parse_number(text)
        if val.denominator != 1:
            raise ConfigurationError(f"{field.name} must be an integer, got {text!r}")
        return int(val)
    if kind.startswith("tuple"):
        items = [t for t in text.replace(",", " ").split() if t]
        inner = int if "int" in kind else float
        vals = [_parse_number(t) for t in items]
        if inner is int and any(v.denominator != 1 for v in vals):
            raise ConfigurationError(f"{field.name} must hold integers")
        return tuple(inner(v) for v in vals)
    return text


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a flat ``key = value`` file. ``#`` starts a comment; unknown keys are errors."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        if key not in fields:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(fields[key], val)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**values)


def config_to_text(config: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = ", ".join(repr(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def worker_count(requested: int = 0) -> int:
    n = requested if requested > 0 else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def _map_trials(fn: Callable[[int], "TrialRecord"], trials: int, workers: int) -> list["TrialRecord"]:
    if workers <= 1 or trials <= 1:
        return [fn(k) for k in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


# --------------------------------------------------------------------------
# empirical measures


@dataclass(frozen=True, eq=False)
class TrialRecord:
    N: int
    trial: int
    tau_hat: np.ndarray
    mse: float
    empty: int = 0
    fallback: int = 0

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("MSE must be nonnegative")


def empirical_mse(reconstruction: ToaProfile, truth: ToaProfile) -> float:
    """Grid integral of ``(tau_hat - tau)^2`` over the unit domain."""
    if reconstruction.values.shape != truth.values.shape:
        raise ConfigurationError("reconstruction and truth grids differ")
    return float(np.mean((reconstruction.values - truth.values) ** 2))


def decompose_empirical(records: Sequence[TrialRecord], truth: ToaProfile, N: int | None = None) -> dict:
    """Split the mean empirical MSE into squared bias and variance.

    ``bias_sim`` is the error of the across-trial mean reconstruction and
    ``var_sim`` the mean spread of single reconstructions around it. ``gap``
    is ``|bias_sim + var_sim - mse_sim| / mse_sim``.
    """
    if not records:
        raise ValueError("no trial records")
    if N is not None and any(r.N != N for r in records):
        raise ValueError("records belong to a different N")
    recs = np.stack([piecewise_reconstruction(r.tau_hat, truth.n_cells).values for r in records])
    mean_rec = recs.mean(axis=0)
    axes = tuple(range(1, recs.ndim))
    bias_sim = float(np.mean((mean_rec - truth.values) ** 2))
    var_sim = float(np.mean(np.mean((recs - mean_rec) ** 2, axis=axes)))
    mse_sim = float(np.mean([r.mse for r in records]))
    gap = abs(bias_sim + var_sim - mse_sim) / mse_sim if mse_sim > 0 else 0.0
    return {"bias_sim": bias_sim, "var_sim": var_sim, "mse_sim": mse_sim, "gap": gap}


# --------------------------------------------------------------------------
# 1D simulation


def _pack_rows(times_list, rows_list, n_rows):
    times = np.concatenate(times_list)
    rows = np.concatenate(rows_list)
    order = np.lexsort((times, rows))
    counts = np.bincount(rows, minlength=n_rows)
    return times[order], np.concatenate([[0], np.cumsum(counts)])


def _draw_floor(pixel_model: FluxModel, window: ObservationWindow, n_rows: int, gen):
    """Uniform floor and pile-up stamps for ``n_rows`` pixels."""
    counts = gen.poisson(pixel_model.floor_level * window.length, n_rows)
    times = [gen.uniform(window.t_min, window.t_max, counts.sum())]
    rows = [np.repeat(np.arange(n_rows), counts)]
    if pixel_model.pileup is not None and pixel_model.pileup.beta > 0:
        pc = gen.poisson(pixel_model.pileup.mass(window.t_min, window.t_max), n_rows)
        times.append(_truncated_exponential(gen, pixel_model.pileup.gamma, window, int(pc.sum())))
        rows.append(np.repeat(np.arange(n_rows), pc))
    return times, rows


def _initial_tau(config: ExperimentConfig, oracle: np.ndarray, times, offsets) -> np.ndarray:
    if config.init == "oracle":
        return np.asarray(oracle, dtype=float).ravel()
    counts = np.diff(offsets)
    seg = np.repeat(np.arange(counts.size), counts)
    sums = np.bincount(seg, weights=times, minlength=counts.size)
    centre = 0.5 * (config.t_min + config.t_max)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / counts, centre)


def _draw_trial(eff, masses, window, seed, N, k):
    gen = make_rng(seed, N, k)
    ts, off = sample_inverse_cdf_rows(eff.t, eff.signal, masses, gen)
    bt, br = _draw_floor(eff.model, window, N, gen)
    return _pack_rows([ts] + bt, [np.repeat(np.arange(N), np.diff(off))] + br, N)


def draw_trial_1d(config: ExperimentConfig, N: int, trial: int = 0, profile: ToaProfile | None = None):
    """Stamps of one simulated trial as ``(times, offsets)``, identical to what ``simulate_1d`` sees."""
    profile = config.profile() if profile is None else profile
    eff = effective_pulses_exact(profile, config.flux_model(), N, config.window, config.dt)
    masses = eff.alpha * trapezoid(eff.signal, eff.t, axis=1)
    return _draw_trial(eff, masses, config.window, config.seed, N, trial)


def simulate_1d(config: ExperimentConfig, N: int, profile: ToaProfile | None = None, lambda_b: float | None = None):
    """Run ``config.trials`` trials at pixel count ``N``; returns trial records."""
    profile = config.profile() if profile is None else profile
    if profile.ndim != 1:
        raise ConfigurationError("simulate_1d needs a 1D profile")
    model = config.flux_model(lambda_b)
    window = config.window
    binned = bin_scene(profile, model, N)
    eff = effective_pulses_exact(profile, model, N, window, config.dt)
    pixel_model = eff.model
    masses = eff.alpha * trapezoid(eff.signal, eff.t, axis=1)
    rep = profile.n_cells // N
    gaussian = binned.sigma_n is not None
    if gaussian:
        beta = pixel_model.pileup.beta if pixel_model.pileup is not None else 0.0
        gamma = pixel_model.pileup.gamma if pixel_model.pileup is not None else 1.0
        batch_model = BatchModel(
            alpha=np.full(N, pixel_model.alpha),
            sigma=binned.sigma_n,
            floor_level=np.full(N, pixel_model.floor_level),
            beta=np.full(N, beta),
            gamma=gamma,
        )
    else:
        pixels = [eff.pixel(n).model for n in range(N)]

    def trial(k: int) -> TrialRecord:
        times, offsets = _draw_trial(eff, masses, window, config.seed, N, k)
        tau0 = _initial_tau(config, binned.tau, times, offsets)
        if gaussian:
            est = estimate_batch(times, offsets, batch_model, tau0, window, solver=config.solver, dt=config.dt)
            tau_hat, empty, fb = est.tau_hat, int(est.empty.sum()), int(est.fallback.sum())
        else:
            tau_hat = tau0.copy()
            empty = fb = 0
            for n in range(N):
                stamps = times[offsets[n] : offsets[n + 1]]
                if stamps.size == 0:
                    empty += 1
                    continue
                ctx = LikelihoodContext(pixels[n], TimeStamps(stamps), window, float(tau0[n]), config.dt)
                res = estimate(ctx, config.solver)
                tau_hat[n] = res.tau_hat
                fb += int(res.fallback)
        mse = float(np.mean((np.repeat(tau_hat, rep) - profile.values) ** 2))
        return TrialRecord(N, k, tau_hat, mse, empty, fb)

    return _map_trials(trial, config.trials, worker_count(config.workers))


def _check_sweep(config: ExperimentConfig, profile: ToaProfile) -> None:
    for n in config.n_values:
        if n > profile.n_cells or profile.n_cells % n:
            raise ConfigurationError(f"N={n} must divide the grid size {profile.n_cells}")
    profile.check_window(config.window)


def _simulated(records, profile) -> SimulatedPoint:
    d = decompose_empirical(records, profile)
    return SimulatedPoint(d["mse_sim"], d["bias_sim"], d["var_sim"], len(records))


def _theory_fn(kind: str, config: ExperimentConfig, profile: ToaProfile, model: FluxModel):
    if kind == "auto":
        simple = model.is_gaussian and model.floor_level == 0 and model.has_constant_floor
        kind = "closed_form" if simple else "numerical"
    if kind == "closed_form":
        return lambda n: mse_1d(profile, model, n)
    if kind == "simplified":
        return lambda n: mse_1d_simplified(profile, model, n)
    if kind == "numerical":
        return lambda n: mse_numerical(profile, model, n, config.window, config.dt)
    raise ValueError(f"unknown theory mode {kind!r}")


def _sweep_1d(config, profile, theories: Sequence[str], lambda_b=None, label="") -> list[SweepCurve]:
    profile = config.profile() if profile is None else profile
    _check_sweep(config, profile)
    model = config.flux_model(lambda_b)
    fns = [_theory_fn(kind, config, profile, model) for kind in theories]
    preds: list[list[MsePrediction]] = [[] for _ in fns]
    sims = []
    for n in config.n_values:
        for i, fn in enumerate(fns):
            preds[i].append(fn(n))
        sims.append(_simulated(simulate_1d(config, n, profile, lambda_b), profile))
    return [SweepCurve(tuple(p), tuple(sims), config.seed, label) for p in preds]


def run_1d_sweep(config: ExperimentConfig, profile: ToaProfile | None = None, theory: str = "auto") -> SweepCurve:
    """Simulated and predicted MSE over ``config.n_values``.

    The default theory is the closed form for a Gaussian pulse with no floor
    and the numerical (Fisher quadrature) form otherwise.
    """
    return _sweep_1d(config, profile, [theory], label="1d")[0]


def run_ablation(config: ExperimentConfig, profile: ToaProfile | None = None) -> tuple[SweepCurve, SweepCurve]:
    """One simulation with the full and the simplified closed forms overlaid."""
    full, simple = _sweep_1d(config, profile, ["closed_form", "simplified"], label="ablation")
    return full, simple


def run_pileup(config: ExperimentConfig, profile: ToaProfile | None = None) -> SweepCurve:
    """Sweep with the pile-up background known to the estimator; numerical theory."""
    if config.pileup_beta <= 0:
        raise ConfigurationError("run_pileup needs pileup_beta > 0")
    return _sweep_1d(config, profile, ["numerical"], label="pileup")[0]


def run_noise_floor_sweep(config: ExperimentConfig, profile: ToaProfile | None = None) -> list[tuple[float, SweepCurve]]:
    """One sweep per ``config.floor_values`` entry, numerical theory throughout."""
    profile = config.profile() if profile is None else profile
    return [
        (lb, _sweep_1d(config, profile, ["numerical"], lambda_b=lb, label=f"lambda_b={lb:g}")[0])
        for lb in config.floor_values
    ]


# --------------------------------------------------------------------------
# 2D simulation


def _block_sum(a: np.ndarray, n: int) -> np.ndarray:
    b = a.shape[0] // n
    return a.reshape(n, b, n, b).sum(axis=(1, 3))


def simulate_2d(config: ExperimentConfig, N: int, profile: ToaProfile) -> list[TrialRecord]:
    """Trials of the ``N x N`` reconstruction of a 2D profile.

    With a Gaussian pulse and no floor the ML estimate is the stamp mean, and
    only per-cell photon counts plus one Gaussian draw per pixel are needed.
    Otherwise stamps are drawn explicitly and the batched solver is used.
    """
    if profile.ndim != 2:
        raise ConfigurationError("simulate_2d needs a 2D profile")
    model = config.flux_model()
    if not model.is_gaussian:
        raise UnsupportedModelError("2D sweeps support Gaussian pulses only")
    binned = bin_scene(profile, model, N)
    k_cells = profile.n_cells
    cell_rate = config.alpha0 / k_cells**2
    tau = profile.values
    sigma_t = config.sigma_t
    rep = k_cells // N
    fast = model.floor_level == 0 and model.has_constant_floor
    window = config.window
    pixel_model = model.per_pixel(N * N)
    if not fast:
        beta = pixel_model.pileup.beta if pixel_model.pileup is not None else 0.0
        batch_model = BatchModel(
            alpha=np.full(N * N, pixel_model.alpha),
            sigma=binned.sigma_n.ravel(),
            floor_level=np.full(N * N, pixel_model.floor_level),
            beta=np.full(N * N, beta),
            gamma=pixel_model.pileup.gamma if pixel_model.pileup is not None else 1.0,
        )
        pix_of_cell = (np.arange(k_cells)[:, None] // rep) * N + (np.arange(k_cells)[None, :] // rep)

    def trial(k: int) -> TrialRecord:
        gen = make_rng(config.seed, N, k)
        counts = gen.poisson(cell_rate, tau.shape)
        if fast:
            m = _block_sum(counts, N)
            s = _block_sum(counts * tau, N) + sigma_t * np.sqrt(m) * gen.standard_normal((N, N))
            empty = m == 0
            with np.errstate(invalid="ignore", divide="ignore"):
                tau_hat = np.where(empty, binned.tau, s / np.maximum(m, 1))
            n_empty, fb = int(empty.sum()), 0
        else:
            flat_counts = counts.ravel()
            ts = np.repeat(tau.ravel(), flat_counts) + sigma_t * gen.standard_normal(int(flat_counts.sum()))
            rows = np.repeat(pix_of_cell.ravel(), flat_counts)
            bt, br = _draw_floor(pixel_model, window, N * N, gen)
            times, offsets = _pack_rows([ts] + bt, [rows] + br, N * N)
            tau0 = _initial_tau(config, binned.tau, times, offsets)
            est = estimate_batch(times, offsets, batch_model, tau0, window, solver=config.solver, dt=config.dt)
            tau_hat = est.tau_hat.reshape(N, N)
            n_empty, fb = int(est.empty.sum()), int(est.fallback.sum())
        rec = np.repeat(np.repeat(tau_hat, rep, axis=0), rep, axis=1)
        return TrialRecord(N, k, tau_hat, float(np.mean((rec - tau) ** 2)), n_empty, fb)

    return _map_trials(trial, config.trials, worker_count(config.workers))


def run_2d_sweep(config: ExperimentConfig, profile: ToaProfile | None = None) -> SweepCurve:
    """Square ``N x N`` sweep against the 2D closed form."""
    if profile is None:
        cfg = config if config.scene != "sigmoid" else dataclasses.replace(config, scene="depthmap")
        profile = cfg.profile()
    if profile.ndim != 2:
        raise ConfigurationError("run_2d_sweep needs a 2D profile")
    _check_sweep(config, profile)
    c_norm_sq = gradient(profile).c_sq
    preds, sims = [], []
    for n in config.n_values:
        preds.append(mse_2d(c_norm_sq, config.sigma_t, config.alpha0, n))
        sims.append(_simulated(simulate_2d(config, n, profile), profile))
    return SweepCurve(tuple(preds), tuple(sims), config.seed, "2d")


# --------------------------------------------------------------------------
# units


def convert_units(
    array_mm: float = 10.0,
    grid: int = 1024,
    group: int = 32,
    window_ns: float = 100.0,
    time_points: int = 2048,
    sigma_t_points: float = 20.0,
) -> dict:
    """Physical sizes of grid cells, super-pixels and pulse widths.

    The sensor spans one unit of space and the measurement window one unit
    of time.
    """
    if min(array_mm, grid, group, window_ns, time_points) <= 0 or sigma_t_points < 0:
        raise ConfigurationError("unit conversion inputs must be positive")
    dx_um = array_mm * 1000.0 / grid
    sigma_x_px = group / np.sqrt(12.0)
    dt_ns = window_ns / time_points
    return {
        "dx_um": dx_um,
        "dx_unit": 1.0 / grid,
        "superpixel_um": group * dx_um,
        "sigma_x_px": sigma_x_px,
        "sigma_x_um": sigma_x_px * dx_um,
        "sigma_x_unit": group / (grid * np.sqrt(12.0)),
        "dt_ns": dt_ns,
        "dt_unit": 1.0 / time_points,
        "sigma_t_ns": sigma_t_points * dt_ns,
        "sigma_t_unit": sigma_t_points / time_points,
        "pulse_width_points": 6.0 * sigma_t_points,
        "pulse_width_ns": 6.0 * sigma_t_points * dt_ns,
    }


# --------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return f"{float(x):.10g}"


def write_csv(curve: SweepCurve, path=None) -> str:
    """Render a sweep as CSV; written to ``path`` when given."""
    lines = [CSV_HEADER]
    sims = curve.simulated or [None] * len(curve.predictions)
    seed = "" if curve.seed is None else str(curve.seed)
    for p, s in zip(curve.predictions, sims):
        sim = ["", "", "", ""] if s is None else [_fmt(s.mse_sim), _fmt(s.bias_sim), _fmt(s.var_sim), str(s.trials)]
        lines.append(",".join([str(p.N), _fmt(p.bias), _fmt(p.variance), _fmt(p.total), *sim[:3], sim[3], seed]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg(curves: Sequence[SweepCurve], path, title: str = "MSE vs N") -> None:
    """Log-log line chart: theory as lines, simulation as markers."""
    width, height, pad = 640, 420, 60
    xs, ys = [], []
    for c in curves:
        xs += c.n_values
        ys += [p.total for p in c.predictions if p.total > 0]
        if c.simulated:
            ys += [s.mse_sim for s in c.simulated if s.mse_sim > 0]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    lx0, lx1 = np.log10(min(xs)), np.log10(max(xs))
    ly0, ly1 = np.log10(min(ys)), np.log10(max(ys))
    lx1 = lx1 if lx1 > lx0 else lx0 + 1
    ly1 = ly1 if ly1 > ly0 else ly0 + 1

    def px(x):
        return pad + (np.log10(x) - lx0) / (lx1 - lx0) * (width - 2 * pad)

    def py(y):
        return height - pad - (np.log10(y) - ly0) / (ly1 - ly0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle">N</text>',
        f'<text x="15" y="{height / 2:.1f}" transform="rotate(-90 15 {height / 2:.1f})" text-anchor="middle">MSE</text>',
    ]
    for n in sorted(set(xs)):
        out.append(f'<text x="{px(n):.1f}" y="{height - pad + 16}" text-anchor="middle">{n}</text>')
    for e in range(int(np.floor(ly0)), int(np.ceil(ly1)) + 1):
        if ly0 <= e <= ly1:
            out.append(f'<text x="{pad - 6}" y="{py(10.0**e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i, c in enumerate(curves):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(p.N):.1f},{py(p.total):.1f}" for p in c.predictions if p.total > 0)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        if c.simulated:
            for p, s in zip(c.predictions, c.simulated):
                if s.mse_sim > 0:
                    out.append(f'<circle cx="{px(p.N):.1f}" cy="{py(s.mse_sim):.1f}" r="4" fill="{color}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 16 * i}" text-anchor="end" fill="{color}">{escape(c.label or f"curve {i}")}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
