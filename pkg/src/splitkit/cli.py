"""Command-line front end: ``splitkit <command> [flags]``.

Commands
--------
rlad          penalty-path grid search on a regression dataset
grid-compare  the same grid fitted by both solvers, side by side
bp-demo       2-D built-in instances traced iterate by iterate
verify        randomized property suites with a pass/fail report

Every command is deterministic in (flags, input file, seed); reruns
produce byte-identical output files.  Floats are written with 17
significant digits so traces survive a round trip through the CSV.
Exit status: 0 success, 1 solver non-convergence under
``--require-convergence``, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .experiments import (
    BP_BUILTINS,
    FitResult,
    compare_grids,
    lambda_grid,
    run_bp_demo,
    run_grid,
)
from .problems import load_dataset_csv, standardize_columns, synth_rlad_data
from .regularizers import Regularizer
from .verify import SUITES, run_suite

__all__ = ["main", "build_parser"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", default=None,
                   help="dataset CSV (header row; response column by name); "
                        "omit to use synthetic data")
    p.add_argument("--response", default="w",
                   help="name of the response column (default: w)")
    p.add_argument("--synth-n", type=int, default=20,
                   help="synthetic: number of features")
    p.add_argument("--synth-m", type=int, default=100,
                   help="synthetic: number of samples")
    p.add_argument("--synth-support", type=int, default=3,
                   help="synthetic: nonzeros in the ground truth")
    p.add_argument("--synth-noise", type=float, default=0.1,
                   help="synthetic: Laplace noise scale")
    p.add_argument("--synth-outliers", type=float, default=0.1,
                   help="synthetic: fraction of corrupted responses")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reg", choices=("l1", "mcp", "scad"), default="l1")
    p.add_argument("--reg-beta", type=float, default=3.0,
                   help="mcp width parameter")
    p.add_argument("--reg-a", type=float, default=3.7,
                   help="scad shoulder parameter")
    p.add_argument("--lambda-min", type=float, default=0.1)
    p.add_argument("--lambda-max", type=float, default=10.0)
    p.add_argument("--lambda-count", type=int, default=50)
    p.add_argument("--rho", type=float, default=1.0, help="dual step size")
    p.add_argument("--kmax", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-3,
                   help="per-fit early-stop step tolerance")
    p.add_argument("--theta-max", type=float, default=1.0,
                   help="top of the homotopy ramp; values below 1.0 stop "
                        "short of the full nonconvex selection")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1,
                   help="grid points solved concurrently")


def _add_out_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", action="store_true",
                   help="also render a PNG next to the CSV")
    p.add_argument("--require-convergence", action="store_true",
                   help="exit 1 unless every reported fit converged")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitkit",
        description="operator-splitting solvers with homotopy stabilization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rlad", help="penalized robust regression over a grid")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--solver", choices=("dr", "host", "admm"), default="dr")
    _add_out_flags(p)
    p.set_defaults(func=cmd_rlad)

    p = sub.add_parser("grid-compare", help="dr vs host over the same grid")
    _add_data_flags(p)
    _add_fit_flags(p)
    _add_out_flags(p)
    p.set_defaults(func=cmd_grid_compare)

    p = sub.add_parser("bp-demo", help="trace a built-in 2-D instance")
    p.add_argument("--instance", choices=BP_BUILTINS, default="periodic")
    p.add_argument("--solver", choices=("dr", "host"), default="dr")
    p.add_argument("--y0", default="1,0",
                   help="start point as comma-separated coordinates")
    p.add_argument("--kmax", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-9)
    _add_out_flags(p)
    p.set_defaults(func=cmd_bp_demo)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--beta-gamma", type=float, default=None,
                   help="probe the selectant at this beta*gamma "
                        "(nonexpansive suite only)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def _regularizer_template(args) -> Regularizer:
    if args.reg == "l1":
        return Regularizer.ell1(1.0)
    if args.reg == "mcp":
        return Regularizer.mcp(1.0, args.reg_beta)
    return Regularizer.scad(1.0, args.reg_a)


def _load_or_synth(args):
    """Returns (design, response, metadata dict).  Features standardized."""
    if args.input is not None:
        raw, w, names = load_dataset_csv(args.input, args.response)
        design, _, _, constant = standardize_columns(raw)
        meta = {
            "input": args.input,
            "response": args.response,
            "features": names,
            "constant_columns": [n for n, c in zip(names, constant) if bool(c)],
        }
    else:
        design, w, x_true = synth_rlad_data(
            seed=args.seed, n=args.synth_n, m=args.synth_m,
            support=args.synth_support, noise_scale=args.synth_noise,
            outlier_fraction=args.synth_outliers)
        meta = {
            "input": None,
            "synthetic": {
                "n": args.synth_n, "m": args.synth_m,
                "support": args.synth_support,
                "noise_scale": args.synth_noise,
                "outlier_fraction": args.synth_outliers,
            },
            "ground_truth_support": [int(i) for i in np.flatnonzero(x_true)],
        }
    return design, w, meta


def _write_meta(out: str, meta: dict) -> None:
    path = Path(out).with_suffix(Path(out).suffix + ".meta.json")
    path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _grid_meta(args) -> dict:
    return {
        "regularizer": args.reg,
        "reg_beta": args.reg_beta if args.reg == "mcp" else None,
        "reg_a": args.reg_a if args.reg == "scad" else None,
        "lambda_grid": [args.lambda_min, args.lambda_max, args.lambda_count],
        "train_fraction": args.train_fraction,
        "seed": args.seed,
        "rho": args.rho,
        "k_max": args.kmax,
        "tol": args.tol,
        "theta_max": args.theta_max,
    }


def cmd_rlad(args) -> int:
    design, w, meta = _load_or_synth(args)
    grid = lambda_grid(args.lambda_min, args.lambda_max, args.lambda_count)
    results = run_grid(
        design, w, _regularizer_template(args), grid,
        train_fraction=args.train_fraction, seed=args.seed,
        solver=args.solver, rho=args.rho, k_max=args.kmax, tol=args.tol,
        theta_max=args.theta_max, workers=args.workers)

    n = design.shape[1]
    header = (["lambda", "objective", "avg_test_error", "sparsity",
               "solver_status", "tau_final"]
              + [f"x_{i + 1}" for i in range(n)])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in results:
            writer.writerow(
                [_fmt(r.lambda_weight), _fmt(r.objective),
                 _fmt(r.avg_test_error), r.sparsity, r.solver_status,
                 r.tau_final] + [_fmt(float(v)) for v in r.x_star])
    meta.update(_grid_meta(args))
    meta["solver"] = args.solver
    _write_meta(args.out, meta)
    if args.plot and results:
        from .figures import save_fit_curves
        save_fit_curves(results, str(Path(args.out).with_suffix(".png")))
    if args.require_convergence \
            and any(r.solver_status != "converged" for r in results):
        print("rlad: not every grid point converged", file=sys.stderr)
        return 1
    return 0


def cmd_grid_compare(args) -> int:
    design, w, meta = _load_or_synth(args)
    grid = lambda_grid(args.lambda_min, args.lambda_max, args.lambda_count)
    rows = compare_grids(
        design, w, _regularizer_template(args), grid,
        train_fraction=args.train_fraction, seed=args.seed, rho=args.rho,
        k_max=args.kmax, tol=args.tol, theta_max=args.theta_max,
        workers=args.workers)
    header = ["lambda", "objective_dr", "objective_host", "error_dr",
              "error_host", "status_dr", "status_host"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in header])
    meta.update(_grid_meta(args))
    _write_meta(args.out, meta)
    if args.plot and rows:
        from .figures import save_compare_curves
        save_compare_curves(rows, str(Path(args.out).with_suffix(".png")))
    if args.require_convergence and any(
            row["status_dr"] != "converged" or row["status_host"] != "converged"
            for row in rows):
        print("grid-compare: not every fit converged", file=sys.stderr)
        return 1
    return 0


def cmd_bp_demo(args) -> int:
    try:
        y0 = [float(part) for part in args.y0.split(",")]
    except ValueError:
        print(f"bp-demo: cannot parse --y0 {args.y0!r}", file=sys.stderr)
        return 2
    result = run_bp_demo(args.instance, solver=args.solver, y0=y0,
                         k_max=args.kmax, tol=args.tol)
    header = ["k", "y_1", "y_2", "x_1", "x_2", "residual", "phi", "theta", "tau"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in result.rows:
            writer.writerow([_fmt(row[k]) for k in header])
    _write_meta(args.out, {
        "instance": args.instance, "solver": args.solver, "y0": y0,
        "k_max": args.kmax, "tol": args.tol, "status": result.status,
        "period": result.period, "tau_final": result.tau_final,
        "feasibility": result.feasibility,
        "x_final": [float(v) for v in result.x_final],
    })
    if args.plot and result.rows:
        from .figures import save_bp_scatter
        save_bp_scatter(result.rows, str(Path(args.out).with_suffix(".png")),
                        title=f"{args.instance} / {args.solver}")
    print(f"bp-demo {args.instance}/{args.solver}: {result.status}"
          + (f" (period {result.period})" if result.period else "")
          + f", feasibility {result.feasibility:.2e}")
    if args.require_convergence and result.status != "converged":
        return 1
    return 0


def cmd_verify(args) -> int:
    kwargs = {}
    if args.beta_gamma is not None:
        if args.suite != "nonexpansive":
            print("verify: --beta-gamma applies to the nonexpansive suite only",
                  file=sys.stderr)
            return 2
        kwargs["beta_gamma"] = args.beta_gamma
    if args.seed is not None:
        kwargs["seed"] = args.seed
    result = run_suite(args.suite, **kwargs)
    print(result.format_report())
    return 0 if result.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
