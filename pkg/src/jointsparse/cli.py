"""Command-line front end: ``jointsparse {gen,solve,demo-color,verify,rates}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checks
from .config import ConfigError, RunConfig, load_config, validate
from .core import ChannelNorm
from .functionals import check_convexity, check_strong_rate
from .imageio import (read_pnm, rgb_to_yiq, synthetic_color_image, write_pnm, yiq_to_rgb)
from .linop import BlurDecimate, HaarSynthesis, build_color_model, gaussian_kernel
from .solver import CertificateError, certified_rates, choose_inner_iters, jointsparse
from .synthetic import ProblemSpec, load_problem, make_problem, save_problem

TELEMETRY_COLUMNS = ("n", "m", "J", "K", "step_norm", "measured_ratio")
ERROR_COLUMNS = ("n", "m", "err_I", "err_Q")

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_CERTIFICATE = 3


class UsageError(Exception):
    pass


def _num(x) -> str:
    """Locale-independent round-trippable number text."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header, rows, preamble=()):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in preamble:
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(x) for x in row])
    return path


def read_telemetry(path):
    """Return ``(preamble dict, header, rows)`` of a telemetry CSV."""
    meta, lines = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, [[float(x) for x in row] for row in reader]


# --- configuration -------------------------------------------------------------------

def _config(args) -> tuple[RunConfig, Path]:
    if args.config:
        cfg = load_config(args.config)
        base = Path(args.config).resolve().parent
    else:
        cfg, base = RunConfig(), Path.cwd()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "q", None) is not None:
        cfg.q = ChannelNorm.parse(args.q).value
    if getattr(args, "downsample", None) is not None:
        cfg.downsample = args.downsample
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    validate(cfg)
    return cfg, base


def _resolve(base: Path, path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _certify(params, n_channels):
    """Both parameter certificates, raising with the violating indices."""
    conv = check_convexity(params, n_channels)
    if not conv.strict:
        raise CertificateError(conv.explain())
    rate = check_strong_rate(params, n_channels)
    if not rate.ok:
        raise CertificateError(rate.explain())


def _run(cfg: RunConfig, op, g, params, callback=None):
    _certify(params, op.n_channels)
    return jointsparse(op, g, params, n_max=cfg.n_max, inner_iters=cfg.inner_iters,
                       delta_target=cfg.delta_target, step_tol=cfg.step_tol,
                       outer_tol=cfg.outer_tol, target_norm=cfg.target_norm,
                       callback=callback)


def _telemetry_preamble(cfg: RunConfig, tel):
    derived = [("alpha", _num(tel.alpha)),
               ("beta", "none" if tel.beta is None else _num(tel.beta)),
               ("L", str(tel.inner_iters)), ("operator_scale", _num(tel.scale)),
               ("stop_reason", tel.stop_reason)]
    return cfg.echo() + derived


# --- commands ------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg, _ = _config(args)
    spec = ProblemSpec(n_indices=cfg.n_indices, n_channels=cfg.n_channels,
                       n_blocks=cfg.n_blocks, sparsity=cfg.sparsity, overlap=cfg.overlap,
                       noise=cfg.noise, rows=cfg.rows, full_first_channel=cfg.full_first_channel,
                       chroma_scale=cfg.chroma_scale, target_norm=cfg.target_norm,
                       seed=cfg.seed)
    try:
        problem = make_problem(spec)
    except ValueError as exc:
        raise UsageError(f"infeasible problem: {exc}") from None
    path = save_problem(problem, Path(cfg.out) / "problem.npz")
    print(f"wrote {path}  (|Lambda|={spec.n_indices}, M={spec.n_channels}, "
          f"N={spec.n_blocks}, k={spec.sparsity}, seed={spec.seed})")
    return 0


def cmd_solve(args) -> int:
    cfg, base = _config(args)
    if cfg.problem is None:
        raise UsageError("solve needs 'problem = <path to problem.npz>' in the config")
    problem = load_problem(_resolve(base, cfg.problem))
    L, M = problem.op.domain_shape
    params = cfg.regularization(np.zeros(L))
    t0 = time.perf_counter()
    sol = _run(cfg, problem.op, problem.g, params)
    elapsed = time.perf_counter() - t0

    out = Path(cfg.out)
    tel = sol.telemetry
    write_csv(out / "telemetry.csv", TELEMETRY_COLUMNS, tel.inner, _telemetry_preamble(cfg, tel))
    write_csv(out / "u.csv", ("lambda",) + tuple(f"u{c}" for c in range(M)),
              ([i, *row] for i, row in enumerate(sol.u_star)))
    write_csv(out / "v.csv", ("lambda", "v"), enumerate(sol.v_star))

    print(f"passes: {len(tel.outer) - 1}  L={tel.inner_iters}  stop={tel.stop_reason}  "
          f"time={elapsed:.2f}s")
    print(f"J: {tel.outer[0][1]:.6g} -> {tel.outer[-1][1]:.6g}")
    ref = np.linalg.norm(problem.u_true)
    if ref > 0:
        err = np.linalg.norm(sol.u_star - problem.u_true) / ref
        print(f"relative error vs ground truth: {err:.4g}")
    print(f"outputs in {out}")
    return 0


def _demo_inputs(cfg: RunConfig, base: Path):
    """Return ``(truth_rgb or None, high-res Y, low-res YIQ or None)``."""
    truth = low = None
    if cfg.color is not None:
        color = read_pnm(_resolve(base, cfg.color))
        if color.ndim != 3:
            raise UsageError("'color' must be a PPM (P6) image")
        if cfg.gray is None:
            truth = color
        else:
            gray = read_pnm(_resolve(base, cfg.gray))
            if gray.ndim != 2:
                raise UsageError("'gray' must be a PGM (P5) image")
            if color.shape[:2] == gray.shape:
                truth = color
            else:
                low = color
            return truth, gray, low
    else:
        truth = synthetic_color_image(cfg.side, cfg.seed)
    return truth, rgb_to_yiq(truth)[..., 0], None


def cmd_demo_color(args) -> int:
    cfg, base = _config(args)
    truth, luma, low = _demo_inputs(cfg, base)
    h, w = luma.shape
    f = cfg.downsample
    if h != w:
        raise UsageError(f"images must be square, got {h}x{w}")
    if h % f or h % (1 << cfg.levels):
        raise UsageError(f"side {h} must be divisible by downsample {f} and by 2**{cfg.levels}")
    if low is not None and low.shape[:2] != (h // f, w // f):
        raise UsageError(f"low-resolution colour image is {low.shape[1]}x{low.shape[0]}, "
                         f"expected {w // f}x{h // f} for downsample {f}")

    F = HaarSynthesis(h, cfg.levels)
    kernel = gaussian_kernel(cfg.blur_sigma)
    A = BlurDecimate(kernel, h, f)
    op = build_color_model(kernel, f, F)
    s = cfg.intensity_scale
    if low is None:
        yiq = rgb_to_yiq(truth)
        chroma = [A.matvec(yiq[..., c].ravel()) for c in (1, 2)]
    else:
        yiq_low = rgb_to_yiq(low)
        chroma = [yiq_low[..., c].ravel() for c in (1, 2)]
    g = [s * luma.ravel(), s * chroma[0], s * chroma[1]]
    params = cfg.regularization(F.scales())

    errors = []
    callback = None
    if truth is not None and cfg.error_csv:
        true_yiq = rgb_to_yiq(truth)
        true_I, true_Q = true_yiq[..., 1].ravel(), true_yiq[..., 2].ravel()

        def track(n, m, u):
            errors.append((n, m, float(np.linalg.norm(F.matvec(u[:, 1]) / s - true_I)),
                           float(np.linalg.norm(F.matvec(u[:, 2]) / s - true_Q))))
        callback = track

    t0 = time.perf_counter()
    sol = _run(cfg, op, g, params, callback)
    elapsed = time.perf_counter() - t0

    rec = np.stack([F.matvec(sol.u_star[:, c]) / s for c in range(3)], axis=-1).reshape(h, w, 3)
    out = Path(cfg.out)
    write_pnm(out / "reconstruction.ppm", yiq_to_rgb(rec))
    if truth is not None and cfg.color is None:
        write_pnm(out / "original.ppm", truth)
    tel = sol.telemetry
    write_csv(out / "telemetry.csv", TELEMETRY_COLUMNS, tel.inner, _telemetry_preamble(cfg, tel))
    if errors:
        write_csv(out / "errors.csv", ERROR_COLUMNS, errors)
        print(f"final l2 error  I: {errors[-1][2]:.6g}  Q: {errors[-1][3]:.6g}")
    print(f"q={cfg.q}  passes={len(tel.outer) - 1}  L={tel.inner_iters}  time={elapsed:.2f}s")
    print(f"outputs in {out}")
    return 0


def cmd_verify(args) -> int:
    if not args.scope:
        raise UsageError("give at least one scope: " + ", ".join(checks.SCOPES))
    unknown = [s for s in args.scope if s not in checks.SCOPES]
    if unknown:
        raise UsageError(f"unknown scope(s) {', '.join(unknown)}; choose from "
                         + ", ".join(checks.SCOPES))
    failed = 0
    for scope in dict.fromkeys(args.scope):
        for rep in checks.SCOPES[scope]():
            print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.name}: {rep.detail}")
            failed += not rep.passed
    return EXIT_FAIL if failed else 0


def cmd_rates(args) -> int:
    cfg, base = _config(args)
    if cfg.problem is not None:
        op = load_problem(_resolve(base, cfg.problem)).op
        params = cfg.regularization(np.zeros(op.n_indices))
        what = str(_resolve(base, cfg.problem))
    else:
        F = HaarSynthesis(cfg.side, cfg.levels)
        op = build_color_model(gaussian_kernel(cfg.blur_sigma), cfg.downsample, F)
        params = cfg.regularization(F.scales())
        what = f"colour model {cfg.side}x{cfg.side}, downsample {cfg.downsample}"
    conv = check_convexity(params, op.n_channels)
    rates = certified_rates(op, params, cfg.target_norm)
    print(f"operator: {what}")
    print(f"q={cfg.q}  {conv.explain()}")
    print(f"operator scale {rates.scale:.6g}, ||I - T*T|| <= {rates.residual_norm:.6g}")
    print(f"alpha = {rates.alpha:.6g}")
    if rates.beta is None:
        print("beta unavailable: " + check_strong_rate(params, op.n_channels).explain())
        return EXIT_CERTIFICATE
    print(f"beta = {rates.beta:.6g}")
    if cfg.inner_iters is not None:
        L = cfg.inner_iters
        delta = rates.alpha ** L * (1 + rates.beta) + rates.beta
        note = "" if delta < 1 else "  (not a certified contraction)"
        print(f"L = {L} (configured): delta = {delta:.6g}{note}")
    else:
        target = cfg.delta_target if cfg.delta_target is not None else (1 + rates.beta) / 2
        L = choose_inner_iters(rates.alpha, rates.beta, target)
        print(f"L = {L} for delta_target = {target:.6g}")
    return 0


# --- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointsparse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, q=True, downsample=False):
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--out", metavar="DIR", help="output directory")
        if q:
            p.add_argument("--q", choices=("1", "2", "inf"))
        if downsample:
            p.add_argument("--downsample", type=int, metavar="N")

    common(sub.add_parser("gen", help="write a seeded synthetic problem"), q=False)
    common(sub.add_parser("solve", help="solve the problem named in the config"))
    common(sub.add_parser("demo-color", help="colour recovery from gray + low-res colour"),
           downsample=True)
    v = sub.add_parser("verify", help="run oracle checks")
    v.add_argument("scope", nargs="*", metavar="SCOPE",
                   help="one or more of: " + ", ".join(checks.SCOPES))
    common(sub.add_parser("rates", help="print certified rates and inner budget"),
           downsample=True)
    return parser


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "demo-color": cmd_demo_color,
            "verify": cmd_verify, "rates": cmd_rates}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"jointsparse {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateError as exc:
        print(f"jointsparse {args.command}: parameters rejected: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    sys.exit(main())
