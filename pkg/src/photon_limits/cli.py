"""Command-line entry points.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .estimator import SOLVERS, BatchModel, estimate_batch
from .pulse import DomainError
from .sampler import read_stamps, write_stamps
from .scene import ConfigurationError, bin_scene, gradient
from .spaddata import (
    binned_bootstrap_mse,
    estimate_alpha0,
    estimate_sigma_t,
    load_cube,
    pseudo_ground_truth,
    reject_outliers,
    save_cube,
    write_bootstrap_csv,
)
from .theory import mse_1d, mse_2d, mse_numerical, optimal_n_1d

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _add_config_flags(p: argparse.ArgumentParser, solver: bool = True) -> None:
    p.add_argument("--config", type=Path, help="key = value experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    if solver:
        p.add_argument("--solver", choices=SOLVERS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photon-limits", description="Resolution limits of single-photon LiDAR arrays.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in [
        ("sweep1d", "1D MSE against N, simulation and theory"),
        ("ablation", "1D sweep with the full and simplified closed forms"),
        ("sweep2d", "2D MSE against N on a depth map"),
        ("pileup", "1D sweep with an exponential pile-up background"),
        ("floor-sweep", "1D sweeps over several noise floors"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
        p.add_argument("--svg", type=Path, help="also write a line chart")

    p = sub.add_parser("sample", help="draw one trial of stamps for N pixels")
    _add_config_flags(p, solver=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("estimate", help="per-pixel ML estimates from a stamp dump")
    _add_config_flags(p)
    p.add_argument("--stamps", type=Path, required=True)

    p = sub.add_parser("preprocess", help="outlier rejection on a timestamp cube")
    p.add_argument("--cube", type=Path, required=True)
    p.add_argument("--sigma-t", type=float, required=True, help="pulse width guess in stamp units")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bootstrap", help="binned bootstrap MSE of a cleaned cube")
    p.add_argument("--cube", type=Path, required=True)
    p.add_argument("--bins", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--resamples", type=int, default=100)
    p.add_argument("--sigma-t", type=float, help="reject outliers first with this width guess")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("units", help="physical sizes of grid cells and pulses")
    p.add_argument("--array-mm", type=float, default=10.0)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--group", type=int, default=32)
    p.add_argument("--window-ns", type=float, default=100.0)
    p.add_argument("--time-points", type=int, default=2048)
    p.add_argument("--sigma-t-points", type=float, default=20.0)

    p = sub.add_parser("theory", help="predicted bias, variance and MSE")
    p.add_argument("--config", type=Path)
    p.add_argument("--n", type=int, help="single N (default: the configured list)")
    return parser


def _config(args) -> ex.ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in ("seed", "trials", "solver")}
    if getattr(args, "config", None) is not None:
        return ex.load_config(args.config, **overrides)
    return ex.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _suffixed(out: Path | None, tag: str) -> Path | None:
    return None if out is None else out.with_name(f"{out.stem}.{tag}{out.suffix}")


def _summary(curve) -> str:
    n = curve.sim_minimizer()
    i = curve.n_values.index(n)
    gap = float(np.max(curve.relative_gaps()))
    return f"minimizing N={n} mse_sim={curve.simulated[i].mse_sim:.6g} max_rel_gap={gap:.3f}"


def _cmd_sweep(args) -> None:
    cfg = _config(args)
    if args.command == "sweep1d":
        curves = [ex.run_1d_sweep(cfg)]
        tags = [None]
    elif args.command == "ablation":
        curves = list(ex.run_ablation(cfg))
        tags = [None, "simplified"]
        curves[1] = type(curves[1])(curves[1].predictions, curves[1].simulated, cfg.seed, "simplified")
    elif args.command == "sweep2d":
        curves, tags = [ex.run_2d_sweep(cfg)], [None]
    elif args.command == "pileup":
        curves, tags = [ex.run_pileup(cfg)], [None]
    else:
        pairs = ex.run_noise_floor_sweep(cfg)
        curves = [c for _, c in pairs]
        tags = [f"lb{lb:g}" for lb, _ in pairs]
    for curve, tag in zip(curves, tags):
        text = ex.write_csv(curve)
        if args.out is None:
            if tag is not None:
                sys.stdout.write(f"# {tag}\n")
            sys.stdout.write(text)
        else:
            (args.out if tag is None else _suffixed(args.out, tag)).write_text(text)
    if args.svg is not None:
        ex.write_svg(curves, args.svg, title=f"{args.command}: MSE vs N")
    for curve, tag in zip(curves, tags):
        prefix = f"[{tag}] " if tag else ""
        print(prefix + _summary(curve), file=sys.stderr if args.out is None else sys.stdout)


def _cmd_sample(args) -> None:
    cfg = _config(args)
    times, offsets = ex.draw_trial_1d(cfg, args.n, args.trial)
    pixels = [times[offsets[n] : offsets[n + 1]] for n in range(args.n)]
    out = args.out if args.out is not None else Path("/dev/stdout")
    write_stamps(out, pixels, cfg.seed, args.n, args.trial)
    print(f"wrote {times.size} stamps for N={args.n}", file=sys.stderr)


def _cmd_estimate(args) -> None:
    cfg = _config(args)
    header, pixels = read_stamps(args.stamps)
    n = header["N"]
    prof = cfg.profile()
    model = cfg.flux_model()
    binned = bin_scene(prof, model, n)
    if binned.sigma_n is None:
        raise ConfigurationError("the estimate command needs a Gaussian pulse")
    pm = model.per_pixel(n)
    beta = pm.pileup.beta if pm.pileup is not None else 0.0
    gamma = pm.pileup.gamma if pm.pileup is not None else 1.0
    bm = BatchModel(np.full(n, pm.alpha), binned.sigma_n, np.full(n, pm.floor_level), np.full(n, beta), gamma)
    times = np.concatenate(pixels) if pixels else np.empty(0)
    offsets = np.concatenate([[0], np.cumsum([p.size for p in pixels])])
    tau0 = ex._initial_tau(cfg, binned.tau, times, offsets)
    est = estimate_batch(times, offsets, bm, tau0, cfg.window, solver=cfg.solver, dt=cfg.dt)
    lines = ["pixel,tau_hat,count,converged"]
    for i in range(n):
        lines.append(f"{i},{est.tau_hat[i]:.10g},{offsets[i + 1] - offsets[i]},{int(est.converged[i])}")
    _emit("\n".join(lines) + "\n", args.out)
    print(f"estimated {n} pixels with the {cfg.solver} solver", file=sys.stderr)


def _cmd_preprocess(args) -> None:
    cube = load_cube(args.cube)
    clean = reject_outliers(cube, args.sigma_t, rng=args.seed)
    save_cube(clean, args.out)
    sig = estimate_sigma_t(clean)
    kept = clean.times.size / max(cube.times.size, 1)
    print(f"retained {kept:.3f} of stamps; sigma_t={sig.mean:.4g}; alpha0(K=3)={estimate_alpha0(clean, 3):.4g}")


def _cmd_bootstrap(args) -> None:
    cube = load_cube(args.cube)
    if args.sigma_t is not None:
        cube = reject_outliers(cube, args.sigma_t, rng=args.seed)
    pgt = pseudo_ground_truth(cube)
    points = binned_bootstrap_mse(cube, pgt, args.bins, K=args.k, resamples=args.resamples, rng=args.seed)
    _emit(write_bootstrap_csv(points), args.out)
    best = min(points, key=lambda p: p.mse_sim)
    print(f"lowest mse_sim at b={best.b} (N={best.n_effective}): {best.mse_sim:.6g}", file=sys.stderr)


def _cmd_units(args) -> None:
    u = ex.convert_units(args.array_mm, args.grid, args.group, args.window_ns, args.time_points, args.sigma_t_points)
    print(f"dx = {u['dx_um']:.3f} µm = 1/{args.grid} unit space")
    print(f"super-pixel = {args.group} pixels = {u['superpixel_um']:.1f} µm")
    print(f"σ_x = {u['sigma_x_px']:.4f} pixels = {u['sigma_x_um']:.2f} µm = {u['sigma_x_unit']:.6g} unit space")
    print(f"dt = {u['dt_ns']:.4f} ns")
    print(f"σ_t = {u['sigma_t_ns']:.4f} ns = {args.sigma_t_points:g} time points")
    print(f"pulse width (6σ_t) = {u['pulse_width_ns']:.2f} ns = {u['pulse_width_points']:g} time points")


def _cmd_theory(args) -> None:
    cfg = _config(args)
    prof = cfg.profile()
    model = cfg.flux_model()
    ns = [args.n] if args.n is not None else list(cfg.n_values)
    closed = model.is_gaussian and model.floor_level == 0 and model.has_constant_floor
    print("N,bias,variance,total,mode")
    for n in ns:
        if prof.ndim == 2:
            pred = mse_2d(gradient(prof).c_sq, cfg.sigma_t, cfg.alpha0, n)
        elif closed:
            pred = mse_1d(prof, model, n)
        else:
            pred = mse_numerical(prof, model, n, cfg.window, cfg.dt)
        print(f"{n},{pred.bias:.6g},{pred.variance:.6g},{pred.total:.6g},{pred.mode}")
    if prof.ndim == 1 and model.is_gaussian:
        c_sq = gradient(prof).binned_c_sq(ns[-1])
        print(f"# optimal N (closed form, c^2={c_sq:.4g}): {optimal_n_1d(c_sq, cfg.sigma_t, cfg.alpha0):.2f}")


_COMMANDS = {
    "sweep1d": _cmd_sweep,
    "ablation": _cmd_sweep,
    "sweep2d": _cmd_sweep,
    "pileup": _cmd_sweep,
    "floor-sweep": _cmd_sweep,
    "sample": _cmd_sample,
    "estimate": _cmd_estimate,
    "preprocess": _cmd_preprocess,
    "bootstrap": _cmd_bootstrap,
    "units": _cmd_units,
    "theory": _cmd_theory,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        _COMMANDS[args.command](args)
    except (ConfigurationError, FileNotFoundError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
