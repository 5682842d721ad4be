"""Experiment drivers: grid fits, solver comparisons, and trace demos.

Everything here is a pure function of (arrays, parameters, seed): splits
are drawn from a seeded generator, grid points are solved independently
(optionally across worker threads) and results are sorted by the penalty
weight before anything is written, so output bytes do not depend on the
degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .opcore import ResolventSelection
from .regularizers import Regularizer
from .splitting import (
    DrConfig,
    HostConfig,
    PrimalTuple,
    admm_run,
    constant_schedule,
    detect_cycle,
    dr_run,
    extract_primal,
    host_run,
    log_ramp,
    piecewise_ramp,
)
from .problems import (
    BasisPursuitInstance,
    RladInstance,
    bp_dual_specs,
    bp_periodic_instance,
    bp_selections,
    bp_success_instance,
    rlad_admm_problem,
    rlad_dual_specs,
    rlad_objective,
    rlad_selections,
)

__all__ = [
    "FitResult",
    "SPARSITY_CUTOFF",
    "split_train_test",
    "lambda_grid",
    "fit_rlad_one",
    "run_grid",
    "select_best",
    "compare_grids",
    "BP_BUILTINS",
    "run_bp_demo",
    "BpDemoResult",
]

SPARSITY_CUTOFF = 0.1  # |x_i| above this counts toward the sparsity figure


@dataclass(frozen=True)
class FitResult:
    """One grid point: the fitted weights and their quality measures."""

    lambda_weight: float
    x_star: np.ndarray
    objective: float
    avg_test_error: float
    sparsity: int
    solver_status: str  # converged | k_max | periodic
    tau_final: int


def split_train_test(m: int, train_fraction: float, seed: int):
    """Uniform split without replacement; both index arrays come back sorted."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("split_train_test: train_fraction must lie in (0, 1)")
    if m < 2:
        raise ValueError("split_train_test: need at least 2 samples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    n_train = int(round(train_fraction * m))
    n_train = min(max(n_train, 1), m - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def lambda_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """Log-spaced penalty weights. count 0 gives an empty grid."""
    if count < 0:
        raise ValueError("lambda_grid: count must be nonnegative")
    if count == 0:
        return np.empty(0)
    if not (0.0 < lo <= hi):
        raise ValueError("lambda_grid: need 0 < min <= max")
    if count == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, count)


def _status_of(trace, check_periodic: bool = True) -> str:
    if trace.converged:
        return "converged"
    if check_periodic and detect_cycle(trace, max_period=12, tol=1e-9) is not None:
        return "periodic"
    return "k_max"


def fit_rlad_one(train_design: np.ndarray, train_w: np.ndarray,
                 test_design: np.ndarray, test_w: np.ndarray,
                 reg: Regularizer, rho: float = 1.0, solver: str = "dr",
                 k_max: int = 2000, tol: float = 1e-3,
                 theta_max: float = 1.0, beta_rate: float = 1e6) -> FitResult:
    """Solve one penalized fit and score it on the held-out rows.

    Solvers: plain fixed-point iteration ("dr"), the homotopy schedule
    ("host", phi pinned at 1 and theta ramped to ``theta_max``), or the
    direct alternating-direction recursion ("admm", l1 penalty only).

    The default Cauchy envelope is loose so the homotopy follows its ramp
    on arbitrary data scales; a tripped guard still surfaces through
    ``tau_final = 0`` when a tighter ``beta_rate`` is requested.
    """
    inst = RladInstance(design=train_design, w=train_w, reg=reg, rho=rho)
    y0 = np.zeros(inst.block_dim)
    tau = 1
    if solver == "dr":
        trace = dr_run(*rlad_selections(inst), y0, DrConfig(rho, k_max, tol))
        status = _status_of(trace)
        f_spec, g_spec = rlad_dual_specs(inst)
        x = extract_primal(trace.last_y, f_spec, g_spec).x
    elif solver == "host":
        s_f, s_g = rlad_selections(inst)
        cfg = HostConfig(
            gamma=rho,
            phi_schedule=constant_schedule(1.0),
            theta_schedule=piecewise_ramp(top=theta_max),
            beta_rate=beta_rate,
            tol_phi=0.1,
            tol_theta=min(1.0, 1.0 - theta_max + 0.1),
            tol_y=tol,
            k_max=k_max,
        )
        result = host_run(s_f, s_g, y0, cfg)
        status = "converged" if result.converged else "k_max"
        tau = result.state.tau
        f_spec, g_spec = rlad_dual_specs(inst)
        x = extract_primal(result.y_final, f_spec, g_spec).x
    elif solver == "admm":
        if reg.kind != "ell1":
            raise ValueError("fit_rlad_one: the admm path handles the l1 penalty only")
        problem = rlad_admm_problem(inst)
        z0 = np.zeros(inst.block_dim)
        lam0 = np.zeros(inst.block_dim)
        trace = admm_run(problem, rho=rho, init=(z0, lam0), max_iter=k_max, tol=tol)
        status = "converged" if trace.converged else "k_max"
        x = trace.primal[-1].x
    else:
        raise ValueError(f"fit_rlad_one: unknown solver {solver!r}")

    objective = rlad_objective(inst, x)
    avg_err = float(np.mean(np.abs(test_design @ x - test_w)))
    sparsity = int(np.sum(np.abs(x) > SPARSITY_CUTOFF))
    return FitResult(lambda_weight=float(reg.strength), x_star=x,
                     objective=objective, avg_test_error=avg_err,
                     sparsity=sparsity, solver_status=status, tau_final=tau)


def run_grid(design: np.ndarray, w: np.ndarray, reg_template: Regularizer,
             lambdas: Sequence[float], train_fraction: float = 0.8,
             seed: int = 0, solver: str = "dr", rho: float = 1.0,
             k_max: int = 2000, tol: float = 1e-3, theta_max: float = 1.0,
             workers: int = 1) -> List[FitResult]:
    """Fit every weight in ``lambdas`` on one shared train/test split."""
    design = np.asarray(design, dtype=float)
    w = np.asarray(w, dtype=float)
    train_idx, test_idx = split_train_test(len(w), train_fraction, seed)
    tr_u, tr_w = design[train_idx], w[train_idx]
    te_u, te_w = design[test_idx], w[test_idx]

    def one(lam: float) -> FitResult:
        return fit_rlad_one(tr_u, tr_w, te_u, te_w,
                            reg_template.with_strength(float(lam)),
                            rho=rho, solver=solver, k_max=k_max, tol=tol,
                            theta_max=theta_max)

    lams = [float(v) for v in lambdas]
    if workers > 1 and len(lams) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, lams))
    else:
        results = [one(lam) for lam in lams]
    return sorted(results, key=lambda r: r.lambda_weight)


def select_best(results: Sequence[FitResult]) -> FitResult:
    """Grid winner: smallest average test error, ties to the sparser fit."""
    if not results:
        raise ValueError("select_best: empty result list")
    return min(results, key=lambda r: (r.avg_test_error, r.sparsity, r.lambda_weight))


def compare_grids(design: np.ndarray, w: np.ndarray, reg_template: Regularizer,
                  lambdas: Sequence[float], train_fraction: float = 0.8,
                  seed: int = 0, rho: float = 1.0, k_max: int = 2000,
                  tol: float = 1e-3, theta_max: float = 1.0,
                  workers: int = 1) -> List[dict]:
    """Fit each grid point with both solvers on the same split."""
    by_solver = {}
    for solver in ("dr", "host"):
        by_solver[solver] = run_grid(
            design, w, reg_template, lambdas, train_fraction=train_fraction,
            seed=seed, solver=solver, rho=rho, k_max=k_max, tol=tol,
            theta_max=theta_max, workers=workers)
    rows = []
    for r_dr, r_host in zip(by_solver["dr"], by_solver["host"]):
        rows.append({
            "lambda": r_dr.lambda_weight,
            "objective_dr": r_dr.objective,
            "objective_host": r_host.objective,
            "error_dr": r_dr.avg_test_error,
            "error_host": r_host.avg_test_error,
            "status_dr": r_dr.solver_status,
            "status_host": r_host.solver_status,
        })
    return rows


# ---------------------------------------------------------------------------
# 2-D trace demos


def _degenerate_instance() -> BasisPursuitInstance:
    # any admissible penalty; the identity selection below replaces its side
    return BasisPursuitInstance(
        u_mat=np.array([[1.0, 1.0]]), w=np.array([1.0]),
        reg=bp_periodic_instance().reg, gamma=1.0)


BP_BUILTINS = ("periodic", "success", "degenerate")


@dataclass(frozen=True)
class BpDemoResult:
    rows: List[dict]
    status: str
    period: Optional[int]
    tau_final: int
    x_final: np.ndarray
    feasibility: float


def run_bp_demo(name: str, solver: str = "dr", y0: Sequence[float] = (1.0, 0.0),
                k_max: int = 10_000, tol: float = 1e-9) -> BpDemoResult:
    """Run a built-in 2-D instance and tabulate the dual and primal paths.

    Rows carry ``k, y_1, y_2, x_1, x_2, residual, phi, theta, tau`` with the
    primal point extracted at every iterate.  The "degenerate" built-in
    drops the penalty entirely (its prox is the identity, so the dual
    resolvent is the zero map); the iteration collapses to an idempotent
    projection that lands in at most two steps.
    """
    if name not in BP_BUILTINS:
        raise ValueError(
            f"unknown built-in instance {name!r}; options: {', '.join(BP_BUILTINS)}"
        )
    if name == "degenerate":
        inst = _degenerate_instance()
        s_f, _ = bp_selections(inst)
        s_g = ResolventSelection(inst.gamma, lambda y: np.zeros_like(y),
                                 label="zero-penalty dual")
    else:
        inst = bp_periodic_instance() if name == "periodic" else bp_success_instance()
        s_f, s_g = bp_selections(inst)
    f_spec, g_spec = bp_dual_specs(inst)
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (inst.dim,):
        raise ValueError(f"run_bp_demo: y0 must have shape ({inst.dim},)")

    period = None
    tau = 1
    if solver == "dr":
        trace = dr_run(s_f, s_g, y0, DrConfig(inst.gamma, k_max, tol))
        cycle = detect_cycle(trace, max_period=12, tol=1e-9)
        period = cycle.period if cycle else None
        status = "converged" if trace.converged else (
            "periodic" if period else "k_max")
    elif solver == "host":
        cfg = HostConfig(gamma=inst.gamma, phi_schedule=log_ramp(),
                         theta_schedule=log_ramp(), k_max=k_max)
        result = host_run(s_f, s_g, y0, cfg)
        trace = result.trace
        status = "converged" if result.converged else "k_max"
        tau = result.state.tau
    else:
        raise ValueError(f"run_bp_demo: unknown solver {solver!r}")

    if name == "degenerate":
        # identity penalty side: the g-spec does not describe it, extract by hand
        def primal_at(y):
            lam = s_g(y)
            x = (s_f(2.0 * lam - y) - (2.0 * lam - y)) / inst.gamma
            return PrimalTuple(x=x, z=np.zeros_like(y), lam=lam)
    else:
        def primal_at(y):
            return extract_primal(y, f_spec, g_spec)

    rows = []
    for rec in trace.rows:
        t = primal_at(rec.y)
        rows.append({
            "k": rec.k, "y_1": rec.y[0], "y_2": rec.y[1],
            "x_1": t.x[0], "x_2": t.x[1], "residual": rec.residual,
            "phi": rec.phi, "theta": rec.theta, "tau": rec.tau,
        })
    x_final = primal_at(trace.last_y).x
    feas = float(np.linalg.norm(inst.u_mat.mv(x_final) - inst.w))
    return BpDemoResult(rows=rows, status=status, period=period, tau_final=tau,
                        x_final=x_final, feasibility=feas)
