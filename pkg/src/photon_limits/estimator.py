"""Maximum-likelihood time-of-arrival estimation.

The log-likelihood of stamps ``t_1..t_M`` under a return centred at ``tau`` is
``L(tau) = sum_j log lambda(t_j; tau)`` (the ``-Q`` term does not depend on
``tau``). Three solvers maximise it:

* ``gradient``: curvature-scaled ascent on ``L`` with backtracking;
* ``search``: matched filter, i.e. a scan of the window followed by a local
  derivative-free refinement;
* ``zero``: root of ``dL/dtau`` between a bracket grown around ``tau0``.

Single-pixel solvers take a :class:`LikelihoodContext` and accept any flux
model. The batched solvers handle many pixels with Gaussian effective pulses
in one vectorised pass and are what the Monte Carlo harness uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .pulse import DomainError, FluxModel, GaussianPulse, ObservationWindow
from .sampler import (
    TimeStamps,
    _as_generator,
    sample_gaussian,
    sample_inverse_cdf,
    sample_pileup,
)

__all__ = [
    "SOLVERS",
    "EvaluationError",
    "LikelihoodContext",
    "MlEstimate",
    "BootstrapResult",
    "ScoreStatistics",
    "BatchModel",
    "BatchEstimate",
    "log_likelihood",
    "score",
    "estimate",
    "estimate_gradient",
    "estimate_search",
    "estimate_zero",
    "estimate_batch",
    "score_statistics",
    "bootstrap_variance",
]

SOLVERS = ("gradient", "search", "zero")
DEFAULT_DT = 1.0 / 256
TIE_NATS = 1.0
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class EvaluationError(ArithmeticError):
    """The flux is not positive at some stamp, so ``log`` is undefined."""


@dataclass(frozen=True, eq=False)
class LikelihoodContext:
    """Stamps of one pixel together with the flux model they are scored against.

    ``model.pulse`` is centred at zero; a candidate ``tau`` shifts it. Tabulated
    pulses replicate their edge values outside the table. ``tau0`` defaults to
    the stamp mean. ``dt`` is the temporal grid step; solvers stop once their
    steps fall below ``dt / 10``.
    """

    model: FluxModel
    stamps: TimeStamps
    window: ObservationWindow
    tau0: float | None = None
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not isinstance(self.stamps, TimeStamps):
            object.__setattr__(self, "stamps", TimeStamps(self.stamps))
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.stamps.times

    @property
    def start(self) -> float:
        if self.tau0 is not None:
            return float(self.tau0)
        if len(self.stamps) == 0:
            raise DomainError("cannot initialise from an empty stamp set")
        return float(self.times.mean())

    @property
    def tol(self) -> float:
        return self.dt / 10.0


@dataclass(frozen=True)
class MlEstimate:
    tau_hat: float
    solver: str
    iterations: int
    converged: bool
    multimodal: bool = False
    fallback: bool = False


@dataclass(frozen=True)
class BootstrapResult:
    variance: float
    resamples: int
    K: int


@dataclass(frozen=True)
class ScoreStatistics:
    mean_F1: float
    var_F1: float
    trials: int


# --------------------------------------------------------------------------
# single-pixel likelihood


def _log_terms(model: FluxModel, t: np.ndarray, tau: float) -> np.ndarray:
    floor = model.floor(t)
    if isinstance(model.pulse, GaussianPulse):
        sig = model.pulse.sigma_t
        u = t - tau
        with np.errstate(divide="ignore"):
            log_sig = np.log(model.alpha) - np.log(sig) - _LOG_SQRT_2PI - 0.5 * (u / sig) ** 2
            return np.logaddexp(log_sig, np.log(floor))
    with np.errstate(divide="ignore"):
        return np.log(model.signal(tau, t) + floor)


def _score_terms(model: FluxModel, t: np.ndarray, tau: float) -> np.ndarray:
    """Per-stamp ``d log lambda / d tau``."""
    floor = model.floor(t)
    if isinstance(model.pulse, GaussianPulse):
        sig = model.pulse.sigma_t
        u = t - tau
        with np.errstate(divide="ignore", invalid="ignore"):
            log_sig = np.log(model.alpha) - np.log(sig) - _LOG_SQRT_2PI - 0.5 * (u / sig) ** 2
            weight = expit(log_sig - np.log(floor))
        return np.nan_to_num(weight) * u / sig**2
    lam = model.signal(tau, t) + floor
    dlam = -model.alpha * model.pulse.derivative(t - tau, strict=False)
    out = np.zeros_like(lam)
    np.divide(dlam, lam, out=out, where=lam > 0)
    return out


def log_likelihood(ctx: LikelihoodContext, tau: float) -> float:
    """``sum_j log lambda(t_j; tau)``.

    Raises :class:`EvaluationError` when the flux vanishes at a stamp.
    """
    terms = _log_terms(ctx.model, ctx.times, float(tau))
    if np.any(~np.isfinite(terms)):
        raise EvaluationError(f"flux is not positive at every stamp for tau={tau}")
    return float(terms.sum())


def _loglik_or_inf(ctx: LikelihoodContext, tau: float) -> float:
    val = float(_log_terms(ctx.model, ctx.times, float(tau)).sum())
    return val if np.isfinite(val) else -np.inf


def score(ctx: LikelihoodContext, tau: float) -> float:
    """``dL/dtau = -sum_j alpha s'(t_j - tau) / lambda(t_j; tau)``."""
    return float(_score_terms(ctx.model, ctx.times, float(tau)).sum())


def _require_stamps(ctx: LikelihoodContext) -> None:
    if len(ctx.stamps) == 0:
        raise DomainError("estimation needs at least one stamp")


# --------------------------------------------------------------------------
# single-pixel solvers


def estimate_gradient(ctx: LikelihoodContext, *, max_iter: int = 200) -> MlEstimate:
    """Curvature-scaled ascent with Armijo backtracking, started at ``tau0``."""
    _require_stamps(ctx)
    tau = ctx.start
    cur = _loglik_or_inf(ctx, tau)
    h = ctx.dt
    max_step = max(2.0 * ctx.model.pulse.width, 4.0 * ctx.dt)
    for it in range(1, max_iter + 1):
        terms = _score_terms(ctx.model, ctx.times, tau)
        g = terms.sum()
        # curvature from a central difference of the score; outer product
        # of the score terms where the likelihood is not locally concave
        info = (score(ctx, tau - h) - score(ctx, tau + h)) / (2 * h)
        if not info > 0:
            info = np.dot(terms, terms)
        if info <= 0:
            return MlEstimate(tau, "gradient", it, False)
        # trust region: at most two pulse widths per step, inside the window
        step = float(np.clip(g / info, -max_step, max_step))
        eta = 1.0
        while True:
            cand = float(np.clip(tau + eta * step, ctx.window.t_min, ctx.window.t_max))
            val = _loglik_or_inf(ctx, cand)
            if val >= cur + 1e-4 * eta * g * step or abs(eta * step) < ctx.tol / 16:
                break
            eta *= 0.5
        moved = abs(cand - tau)
        if val >= cur:
            tau, cur = cand, val
        if moved < ctx.tol:
            return MlEstimate(float(tau), "gradient", it, True)
    return MlEstimate(float(tau), "gradient", max_iter, False)


def _local_maxima(values: np.ndarray) -> np.ndarray:
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    return (values >= left) & (values >= right) & np.isfinite(values)


def _scan(ctx: LikelihoodContext, grid: np.ndarray) -> np.ndarray:
    out = np.empty(grid.size)
    # keep each block under ~2e6 stamp evaluations
    block = max(1, int(2e6 // max(len(ctx.stamps), 1)))
    for i in range(0, grid.size, block):
        cand = grid[i : i + block]
        if isinstance(ctx.model.pulse, GaussianPulse):
            terms = np.stack([_log_terms(ctx.model, ctx.times, c) for c in cand])
        else:
            lam = ctx.model.signal(cand[:, None], ctx.times[None, :]) + ctx.model.floor(ctx.times)[None, :]
            with np.errstate(divide="ignore"):
                terms = np.log(lam)
        out[i : i + block] = terms.sum(axis=1)
    out[~np.isfinite(out)] = -np.inf
    return out


def estimate_search(ctx: LikelihoodContext, *, tie_nats: float = TIE_NATS) -> MlEstimate:
    """Matched-filter search: scan the window at ``dt``, then refine locally.

    When several separated local maxima lie within ``tie_nats`` of the best
    one, the mode nearest ``tau0`` is returned and ``multimodal`` is set.
    """
    _require_stamps(ctx)
    grid = ctx.window.grid(ctx.dt)
    values = _scan(ctx, grid)
    if not np.any(np.isfinite(values)):
        return MlEstimate(ctx.start, "search", grid.size, False)
    peaks = np.flatnonzero(_local_maxima(values))
    near = peaks[values[peaks] >= values.max() - tie_nats]
    multimodal = near.size > 1
    if multimodal:
        best = near[np.argmin(np.abs(grid[near] - ctx.start))]
    else:
        best = int(np.argmax(values))
    centre = grid[best]
    res = minimize_scalar(
        lambda x: -_loglik_or_inf(ctx, x),
        bounds=(centre - ctx.dt, centre + ctx.dt),
        method="bounded",
        options={"xatol": ctx.tol / 2},
    )
    tau = float(res.x) if -res.fun >= values[best] else float(centre)
    return MlEstimate(tau, "search", grid.size + int(res.nfev), bool(res.success), multimodal)


def _bracket(f, start: float, width: float, window: ObservationWindow, max_expand: int = 12):
    """Grow ``[a, b]`` around ``start`` until ``f(a) > 0 > f(b)``."""
    lo, hi = window.t_min, window.t_max
    a, b = max(start - width, lo), min(start + width, hi)
    fa, fb = f(a), f(b)
    calls = 2
    step = width
    for _ in range(max_expand):
        if fa > 0 and fb < 0:
            return a, b, fa, fb, calls
        step *= 2
        if fa <= 0 and a > lo:
            a = max(a - step, lo)
            fa = f(a)
            calls += 1
        if fb >= 0 and b < hi:
            b = min(b + step, hi)
            fb = f(b)
            calls += 1
    if fa > 0 and fb < 0:
        return a, b, fa, fb, calls
    return None


def estimate_zero(ctx: LikelihoodContext, *, max_iter: int = 200) -> MlEstimate:
    """Zero crossing of the score by bisection, polished with a secant step.

    The bracket keeps a positive score on its left end and a negative score
    on its right end, so the root found is a local maximum of ``L``. If no
    such bracket exists inside the window the search solver is used instead
    and ``fallback`` is set.
    """
    _require_stamps(ctx)
    f = lambda x: score(ctx, x)  # noqa: E731
    width = max(2.0 * ctx.model.pulse.width, 4.0 * ctx.dt)
    found = _bracket(f, ctx.start, width, ctx.window)
    if found is None:
        fb = estimate_search(ctx)
        return MlEstimate(fb.tau_hat, "zero", fb.iterations, fb.converged, fb.multimodal, fallback=True)
    a, b, fa, fb, calls = found
    it = 0
    while b - a > ctx.tol and it < max_iter:
        m = 0.5 * (a + b)
        fm = f(m)
        it += 1
        if fm > 0:
            a, fa = m, fm
        elif fm < 0:
            b, fb = m, fm
        else:
            return MlEstimate(float(m), "zero", calls + it, True)
    tau = a + fa * (b - a) / (fa - fb)
    return MlEstimate(float(tau), "zero", calls + it, b - a <= ctx.tol)


_DISPATCH = {"gradient": estimate_gradient, "search": estimate_search, "zero": estimate_zero}


def estimate(ctx: LikelihoodContext, solver: str = "zero") -> MlEstimate:
    try:
        fn = _DISPATCH[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}") from None
    return fn(ctx)


# --------------------------------------------------------------------------
# batched solvers


@dataclass(frozen=True, eq=False)
class BatchModel:
    """Gaussian flux models for ``P`` pixels.

    Pixel ``p`` has flux ``alpha[p] N(t | tau, sigma[p]^2) + floor_level[p]
    + beta[p] gamma exp(-gamma t) [t >= 0]``. Scalars broadcast.
    """

    alpha: np.ndarray
    sigma: np.ndarray
    floor_level: np.ndarray | float = 0.0
    beta: np.ndarray | float = 0.0
    gamma: float = 1.0

    @classmethod
    def from_model(cls, model: FluxModel, sigma, n_pixels: int | None = None) -> "BatchModel":
        """Per-pixel batch from an already per-pixel flux model and widths."""
        if not model.is_gaussian:
            raise DomainError("batched solvers need Gaussian effective pulses")
        sigma = np.asarray(sigma, dtype=float).ravel()
        p = sigma.size if n_pixels is None else n_pixels
        beta, gamma = 0.0, 1.0
        if model.pileup is not None:
            beta, gamma = model.pileup.beta, model.pileup.gamma
        return cls(
            alpha=np.full(p, model.alpha),
            sigma=np.broadcast_to(sigma, (p,)).copy(),
            floor_level=np.full(p, model.floor_level),
            beta=np.full(p, beta),
            gamma=gamma,
        )


@dataclass(frozen=True, eq=False)
class BatchEstimate:
    tau_hat: np.ndarray
    converged: np.ndarray
    empty: np.ndarray
    multimodal: np.ndarray
    fallback: np.ndarray
    iterations: int
    solver: str


class _Batch:
    """Precomputed per-stamp quantities for vectorised likelihood evaluation."""

    def __init__(self, times, offsets, model: BatchModel):
        self.t = np.asarray(times, dtype=float)
        offsets = np.asarray(offsets)
        counts = np.diff(offsets)
        self.P = counts.size
        self.counts = counts
        self.seg = np.repeat(np.arange(self.P), counts)

        def per_stamp(v):
            return np.broadcast_to(np.asarray(v, dtype=float), (self.P,))[self.seg]

        sigma = per_stamp(model.sigma)
        alpha = per_stamp(model.alpha)
        self.inv_s2 = 1.0 / sigma**2
        with np.errstate(divide="ignore"):
            self.log_norm = np.log(alpha) - np.log(sigma) - _LOG_SQRT_2PI
            floor = per_stamp(model.floor_level) + per_stamp(model.beta) * model.gamma * np.exp(
                -model.gamma * np.maximum(self.t, 0.0)
            ) * (self.t >= 0)
            self.log_floor = np.log(floor)

    def _sum(self, v):
        return np.bincount(self.seg, weights=v, minlength=self.P)

    def _log_sig(self, tau):
        u = self.t - tau[self.seg]
        return u, self.log_norm - 0.5 * u * u * self.inv_s2

    def loglik(self, tau):
        _, ls = self._log_sig(tau)
        with np.errstate(invalid="ignore"):
            out = self._sum(np.logaddexp(ls, self.log_floor))
        out[np.isnan(out)] = -np.inf
        return out

    def score_terms(self, tau):
        u, ls = self._log_sig(tau)
        with np.errstate(invalid="ignore"):
            w = np.nan_to_num(expit(ls - self.log_floor))
        return u * self.inv_s2 * w

    def score(self, tau):
        return self._sum(self.score_terms(tau))

    def score_and_curvature(self, tau):
        """Score and ``-d^2 L / d tau^2`` per pixel."""
        u, ls = self._log_sig(tau)
        with np.errstate(invalid="ignore"):
            w = np.nan_to_num(expit(ls - self.log_floor))
        z = u * self.inv_s2
        return self._sum(z * w), self._sum(w * self.inv_s2 - w * (1.0 - w) * z * z)


def _batch_gradient(b: _Batch, tau0, tol, window, sigma, max_iter=200):
    tau = tau0.copy()
    cur = b.loglik(tau)
    max_step = np.maximum(2.0 * sigma, 4.0 * tol * 10)
    active = b.counts > 0
    done = ~active
    stalled = np.zeros(b.P, dtype=bool)
    it = 0
    while it < max_iter and not done.all():
        it += 1
        g, info = b.score_and_curvature(tau)
        # outside the concave region fall back to the outer-product curvature
        weak = info <= 0
        if weak.any():
            terms = b.score_terms(tau)
            info = np.where(weak, b._sum(terms * terms), info)
        step = np.zeros(b.P)
        ok = (info > 0) & ~done
        step[ok] = g[ok] / info[ok]
        np.clip(step, -max_step, max_step, out=step)
        eta = np.ones(b.P)
        pending = ok.copy()
        new_tau, new_val = tau.copy(), cur.copy()
        for _ in range(40):
            if not pending.any():
                break
            cand = np.where(pending, np.clip(tau + eta * step, window.t_min, window.t_max), tau)
            val = b.loglik(cand)
            accept = pending & ((val >= cur + 1e-4 * eta * g * step) | (np.abs(eta * step) < tol / 16))
            take = accept & (val >= cur)
            new_tau[take], new_val[take] = cand[take], val[take]
            pending &= ~accept
            eta[pending] *= 0.5
        moved = np.abs(new_tau - tau)
        tau, cur = new_tau, new_val
        stalled |= ~ok & ~done
        done |= ~ok | (moved < tol)
    converged = done & active & ~stalled
    return tau, converged, it


def _batch_bracket(b: _Batch, tau0, width, window, max_expand=12):
    lo, hi = window.t_min, window.t_max
    a = np.maximum(tau0 - width, lo)
    c = np.minimum(tau0 + width, hi)
    fa, fc = b.score(a), b.score(c)
    step = width.copy()
    for _ in range(max_expand):
        bad_a = (fa <= 0) & (a > lo)
        bad_c = (fc >= 0) & (c < hi)
        if not (bad_a.any() or bad_c.any()):
            break
        step *= 2
        a = np.where(bad_a, np.maximum(a - step, lo), a)
        c = np.where(bad_c, np.minimum(c + step, hi), c)
        fa = np.where(bad_a, b.score(a), fa)
        fc = np.where(bad_c, b.score(c), fc)
    return a, c, fa, fc


def _batch_zero(b: _Batch, tau0, tol, window, sigma, max_iter=200):
    a, c, fa, fc = _batch_bracket(b, tau0, 2.0 * sigma, window)
    ok = (fa > 0) & (fc < 0) & (b.counts > 0)
    it = 0
    while it < max_iter and np.any(ok & (c - a > tol)):
        it += 1
        m = 0.5 * (a + c)
        fm = b.score(m)
        live = ok & (c - a > tol)
        right = live & (fm > 0)
        left = live & (fm <= 0)
        a, fa = np.where(right, m, a), np.where(right, fm, fa)
        c, fc = np.where(left, m, c), np.where(left, fm, fc)
    with np.errstate(invalid="ignore", divide="ignore"):
        secant = a + fa * (c - a) / (fa - fc)
    tau = np.where(ok, np.where(np.isfinite(secant), secant, 0.5 * (a + c)), tau0)
    return tau, ok, ok & (c - a <= tol), it


def _batch_search(b: _Batch, tau0, tol, window, sigma, tie_nats=TIE_NATS):
    h = float(np.min(sigma)) / 2.0
    n = max(int(np.ceil(window.length / h)), 2)
    grid = np.linspace(window.t_min, window.t_max, n + 1)
    values = np.stack([b.loglik(np.full(b.P, g)) for g in grid])  # (G, P)
    left = np.vstack([np.full((1, b.P), -np.inf), values[:-1]])
    right = np.vstack([values[1:], np.full((1, b.P), -np.inf)])
    peaks = (values >= left) & (values >= right) & np.isfinite(values)
    near = peaks & (values >= values.max(axis=0) - tie_nats)
    multimodal = near.sum(axis=0) > 1
    dist = np.where(near, np.abs(grid[:, None] - tau0[None, :]), np.inf)
    pick = np.where(multimodal, dist.argmin(axis=0), values.argmax(axis=0))
    centre = grid[pick]
    # golden-section refinement on [centre - h, centre + h]
    lo, hi = centre - h, centre + h
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = b.loglik(x1), b.loglik(x2)
    it = 0
    while np.max(hi - lo) > tol and it < 200:
        it += 1
        move_right = f1 < f2
        lo = np.where(move_right, x1, lo)
        hi = np.where(move_right, hi, x2)
        nx1 = np.where(move_right, x2, hi - _INV_PHI * (hi - lo))
        nx2 = np.where(move_right, lo + _INV_PHI * (hi - lo), x1)
        f_new = b.loglik(np.where(move_right, nx2, nx1))
        f1, f2 = np.where(move_right, f2, f_new), np.where(move_right, f_new, f1)
        x1, x2 = nx1, nx2
    tau = 0.5 * (lo + hi)
    best_grid = values[pick, np.arange(b.P)]
    tau = np.where(b.loglik(tau) >= best_grid, tau, centre)
    finite = np.isfinite(values).any(axis=0)
    return tau, finite, multimodal, grid.size + it


def _subset(times, offsets, idx):
    offsets = np.asarray(offsets)
    parts = [times[offsets[i] : offsets[i + 1]] for i in idx]
    counts = [p.size for p in parts]
    sub_times = np.concatenate(parts) if parts else np.empty(0)
    return sub_times, np.concatenate([[0], np.cumsum(counts)]).astype(int)


def _subset_model(model: BatchModel, idx, P):
    def take(v):
        return np.broadcast_to(np.asarray(v, dtype=float), (P,))[idx]

    return BatchModel(take(model.alpha), take(model.sigma), take(model.floor_level), take(model.beta), model.gamma)


def estimate_batch(
    times,
    offsets,
    model: BatchModel,
    tau0,
    window: ObservationWindow,
    *,
    solver: str = "zero",
    dt: float = DEFAULT_DT,
) -> BatchEstimate:
    """Estimate ``tau`` for every pixel of a CSR-packed stamp batch.

    ``times[offsets[p]:offsets[p+1]]`` are the stamps of pixel ``p``. Pixels
    without stamps keep ``tau0`` and are flagged in ``empty``.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    times = np.asarray(times, dtype=float)
    b = _Batch(times, offsets, model)
    tau0 = np.broadcast_to(np.asarray(tau0, dtype=float), (b.P,)).astype(float)
    sigma = np.broadcast_to(np.asarray(model.sigma, dtype=float), (b.P,))
    tol = dt / 10.0
    empty = b.counts == 0
    multimodal = np.zeros(b.P, dtype=bool)
    fallback = np.zeros(b.P, dtype=bool)
    if solver == "gradient":
        tau, converged, it = _batch_gradient(b, tau0, tol, window, sigma)
    elif solver == "search":
        tau, converged, multimodal, it = _batch_search(b, tau0, tol, window, sigma)
    else:
        tau, bracketed, converged, it = _batch_zero(b, tau0, tol, window, sigma)
        redo = np.flatnonzero(~bracketed & ~empty)
        if redo.size:
            sub_t, sub_off = _subset(times, offsets, redo)
            sb = _Batch(sub_t, sub_off, _subset_model(model, redo, b.P))
            t2, c2, m2, it2 = _batch_search(sb, tau0[redo], tol, window, sigma[redo])
            tau[redo], converged[redo], multimodal[redo] = t2, c2, m2
            fallback[redo] = True
            it += it2
    tau = np.where(empty, tau0, tau)
    converged = converged & ~empty
    return BatchEstimate(tau, converged, empty, multimodal & ~empty, fallback, int(it), solver)


# --------------------------------------------------------------------------
# diagnostics


def _draw(model: FluxModel, tau: float, window: ObservationWindow, gen, dt: float) -> TimeStamps:
    if model.pileup is not None and model.pileup.beta > 0:
        return sample_pileup(model, tau, window, gen)
    if isinstance(model.pulse, GaussianPulse):
        return sample_gaussian(model, tau, window, gen)
    t = window.grid(dt)
    flux = model.signal(tau, t) + model.floor(t)
    return sample_inverse_cdf(t, flux, gen)


def score_statistics(
    model: FluxModel,
    tau0: float,
    window: ObservationWindow,
    trials: int,
    rng,
    *,
    dt: float = DEFAULT_DT,
) -> ScoreStatistics:
    """Monte Carlo mean and variance of the score ``dL/dtau`` at the true ``tau0``."""
    if trials < 2:
        raise ValueError("need at least two trials")
    gen = _as_generator(rng)
    f1 = np.empty(trials)
    for i in range(trials):
        stamps = _draw(model, tau0, window, gen, dt)
        f1[i] = _score_terms(model, stamps.times, tau0).sum() if len(stamps) else 0.0
    return ScoreStatistics(float(f1.mean()), float(f1.var(ddof=1)), trials)


def bootstrap_variance(stamps, K: int, resamples: int, rng) -> BootstrapResult:
    """Variance of the mean of ``K`` stamps drawn with replacement."""
    t = stamps.times if isinstance(stamps, TimeStamps) else np.asarray(stamps, dtype=float)
    if t.size == 0:
        raise DomainError("bootstrap needs a nonempty stamp set")
    if K < 1 or resamples < 2:
        raise ValueError("need K >= 1 and resamples >= 2")
    gen = _as_generator(rng)
    est = t[gen.integers(0, t.size, size=(resamples, K))].mean(axis=1)
    var = 0.0 if np.ptp(est) == 0 else float(est.var(ddof=1))
    return BootstrapResult(var, int(resamples), int(K))
