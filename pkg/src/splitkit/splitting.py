"""Fixed-point solvers on the dual: Douglas-Rachford, its homotopy variant,
and ADMM, plus the bookkeeping they share (traces, primal extraction,
cycle detection, CSV export).

The homotopy solver replaces the two reflections of Douglas-Rachford with
over-relaxed resolvents whose relaxation parameters follow user-supplied
schedules, advancing only while the iterate sequence looks Cauchy.  Its
state machine is:

  * step with the current ``(phi, theta)``;
  * if ``||y_next - y|| <= p_k`` and the certificate flag ``tau`` is still
    set, advance the schedule index ``j`` by one;
  * if the bound holds but ``tau`` was already cleared, keep parameters;
  * if the bound fails, clear ``tau`` and back the schedule off one notch.

``p_k = beta_rate / k**(p_bar + 1)``, with the k = 0 check vacuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .opcore import (
    DivergenceError,
    DualOperatorSpec,
    LinearMap,
    ResolventSelection,
    as_vector,
    check_finite,
    gmi_dual_resolvent,
    over_relax,
    reflect,
)

__all__ = [
    "DrConfig",
    "HostConfig",
    "HostState",
    "HostResult",
    "TraceRow",
    "IterationTrace",
    "PrimalTuple",
    "Cycle",
    "AdmmProblem",
    "dr_step",
    "dr_run",
    "host_step",
    "host_run",
    "extract_primal",
    "admm_run",
    "detect_cycle",
    "rate_bound_check",
    "write_trace_csv",
    "log_ramp",
    "piecewise_ramp",
    "constant_schedule",
]


# ---------------------------------------------------------------------------
# configuration and trace containers


@dataclass(frozen=True)
class DrConfig:
    """Douglas-Rachford run parameters."""

    gamma: float
    max_iter: int = 1000
    fixed_point_tol: float = 1e-9

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError("DrConfig: gamma must be positive and finite")
        if self.max_iter < 1:
            raise ValueError("DrConfig: max_iter must be at least 1")
        if self.fixed_point_tol < 0:
            raise ValueError("DrConfig: fixed_point_tol must be nonnegative")


@dataclass(frozen=True)
class HostConfig:
    """Homotopy solver parameters.

    ``phi_schedule`` and ``theta_schedule`` map the schedule index ``j`` to a
    relaxation value in [0, 1]; they should be nondecreasing.  Termination
    requires the current relaxations within ``tol_phi`` / ``tol_theta`` of 1
    and a step shorter than ``tol_y``; setting the relaxation tolerances to 1
    turns the test into a pure step-size stop.
    """

    gamma: float
    phi_schedule: Callable[[int], float]
    theta_schedule: Callable[[int], float]
    beta_rate: float = 200.0
    p_bar: float = 0.1
    tol_phi: float = 0.1
    tol_theta: float = 0.1
    tol_y: float = 1e-6
    k_max: int = 100_000

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError("HostConfig: gamma must be positive and finite")
        if not (self.beta_rate >= 0 and np.isfinite(self.beta_rate)):
            raise ValueError("HostConfig: beta_rate must be nonnegative and finite")
        if not (self.p_bar > 0 and np.isfinite(self.p_bar)):
            raise ValueError("HostConfig: p_bar must be positive and finite")
        for name in ("tol_phi", "tol_theta"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"HostConfig: {name} must lie in [0, 1]")
        if self.tol_y < 0:
            raise ValueError("HostConfig: tol_y must be nonnegative")
        if self.k_max < 1:
            raise ValueError("HostConfig: k_max must be at least 1")
        for name, sched in (("phi_schedule", self.phi_schedule),
                            ("theta_schedule", self.theta_schedule)):
            prev = None
            for j in range(9):
                v = float(sched(j))
                if not (0.0 <= v <= 1.0):
                    raise ValueError(f"HostConfig: {name}({j}) = {v} outside [0, 1]")
                if prev is not None and v < prev - 1e-12:
                    raise ValueError(f"HostConfig: {name} must be nondecreasing")
                prev = v


@dataclass(frozen=True)
class HostState:
    """One point of the homotopy solver's state machine."""

    k: int
    j: int
    tau: int
    y: np.ndarray
    phi: float
    theta: float
    last_step_norm: float = math.inf


@dataclass(frozen=True)
class TraceRow:
    k: int
    y: np.ndarray
    residual: float
    phi: float
    theta: float
    tau: int


@dataclass
class IterationTrace:
    """Recorded iterates of a solver run.

    ``rows[i].residual`` is the step norm that produced ``rows[i].y``; the
    starting point is kept separately in ``y0``.  ``reason`` is either
    ``"converged"`` or ``"max_iter"`` and never claims a tolerance that was
    not met.
    """

    y0: np.ndarray
    rows: list[TraceRow] = field(default_factory=list)
    reason: str = "max_iter"
    primal: Optional[list["PrimalTuple"]] = None

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    def ys(self) -> np.ndarray:
        return np.array([row.y for row in self.rows])

    def residuals(self) -> np.ndarray:
        return np.array([row.residual for row in self.rows])

    @property
    def last_y(self) -> np.ndarray:
        return self.rows[-1].y if self.rows else self.y0

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class PrimalTuple:
    """Primal/dual triple recovered from a dual iterate."""

    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class Cycle:
    period: int
    points: np.ndarray


@dataclass(frozen=True)
class HostResult:
    trace: IterationTrace
    lambda_final: np.ndarray
    state: HostState

    @property
    def y_final(self) -> np.ndarray:
        return self.trace.last_y

    @property
    def converged(self) -> bool:
        return self.trace.converged


# ---------------------------------------------------------------------------
# schedules


def log_ramp() -> Callable[[int], float]:
    """Schedule ``j -> log(j + 1) / (1 + log(j + 1))``: slow climb to 1."""

    def sched(j: int) -> float:
        l = math.log(j + 1.0)
        return l / (1.0 + l)

    return sched


def piecewise_ramp(top: float = 1.0, hold: int = 100,
                   length: int = 700) -> Callable[[int], float]:
    """Hold at 0 for ``hold`` indices, rise linearly to ``top`` over ``length``."""
    if not (0.0 <= top <= 1.0):
        raise ValueError("piecewise_ramp: top must lie in [0, 1]")
    if hold < 0 or length < 1:
        raise ValueError("piecewise_ramp: need hold >= 0 and length >= 1")

    def sched(j: int) -> float:
        if j <= hold:
            return 0.0
        if j >= hold + length:
            return top
        return (j - hold) / length * top

    return sched


def constant_schedule(value: float) -> Callable[[int], float]:
    if not (0.0 <= value <= 1.0):
        raise ValueError("constant_schedule: value must lie in [0, 1]")
    return lambda j: value


# ---------------------------------------------------------------------------
# Douglas-Rachford


def _check_same_gamma(s_a: ResolventSelection, s_b: ResolventSelection,
                      gamma: float | None = None) -> None:
    if s_a.gamma != s_b.gamma:
        raise ValueError(
            f"step sizes disagree: {s_a.label} has gamma={s_a.gamma}, "
            f"{s_b.label} has gamma={s_b.gamma}"
        )
    if gamma is not None and s_a.gamma != gamma:
        raise ValueError(
            f"config gamma={gamma} does not match selections (gamma={s_a.gamma})"
        )


def dr_step(s_a: ResolventSelection, s_b: ResolventSelection,
            y: np.ndarray) -> np.ndarray:
    """One Douglas-Rachford step ``y -> (y + R_a(R_b(y))) / 2``.

    ``s_b`` is reflected first.
    """
    _check_same_gamma(s_a, s_b)
    y = as_vector(y, "dr_step")
    return 0.5 * (y + reflect(s_a, reflect(s_b, y)))


def dr_run(s_a: ResolventSelection, s_b: ResolventSelection, y0: np.ndarray,
           cfg: DrConfig) -> IterationTrace:
    """Iterate :func:`dr_step` from ``y0`` until the step norm falls below
    ``cfg.fixed_point_tol`` or ``cfg.max_iter`` steps have been taken.

    Returns the full trace; ``trace.reason`` reports which stop fired.
    Divergence (non-finite iterate) aborts with :class:`DivergenceError`.
    """
    _check_same_gamma(s_a, s_b, cfg.gamma)
    y = as_vector(y0, "dr_run initial point")
    trace = IterationTrace(y0=y)
    for k in range(1, cfg.max_iter + 1):
        y_next = dr_step(s_a, s_b, y)
        check_finite("dr_run", y_next)
        diff = y_next - y
        res = math.sqrt(float(diff @ diff))
        trace.rows.append(TraceRow(k, y_next, res, 1.0, 1.0, 1))
        y = y_next
        if res <= cfg.fixed_point_tol:
            trace.reason = "converged"
            break
    return trace


# ---------------------------------------------------------------------------
# homotopy solver


def host_step(state: HostState, s_a: ResolventSelection,
              s_b: ResolventSelection, cfg: HostConfig) -> HostState:
    """Advance the homotopy state machine by one iteration.

    Applies the over-relaxed composition at the state's ``(phi, theta)``,
    then updates ``(tau, j, phi, theta)`` according to the Cauchy envelope
    ``p_k = beta_rate / k**(p_bar + 1)``.
    """
    _check_same_gamma(s_a, s_b, cfg.gamma)
    y = state.y
    inner = over_relax(s_b, state.theta, y)
    y_next = 0.5 * (y + over_relax(s_a, state.phi, inner))
    check_finite("host_step", y_next)
    diff = y_next - y
    step = math.sqrt(float(diff @ diff))

    if state.k == 0:
        p_k = math.inf  # first check is vacuous by convention
    else:
        p_k = cfg.beta_rate / state.k ** (cfg.p_bar + 1.0)

    if step <= p_k:
        if state.tau == 1:
            j = state.j + 1
            tau = 1
            phi = float(cfg.phi_schedule(j))
            theta = float(cfg.theta_schedule(j))
        else:
            j, tau = state.j, 0
            phi, theta = state.phi, state.theta
    else:
        tau = 0
        j = max(state.j - 1, 0)
        phi = float(cfg.phi_schedule(j))
        theta = float(cfg.theta_schedule(j))

    return HostState(k=state.k + 1, j=j, tau=tau, y=y_next,
                     phi=phi, theta=theta, last_step_norm=step)


def initial_host_state(y0: np.ndarray, cfg: HostConfig) -> HostState:
    y0 = as_vector(y0, "host initial point")
    return HostState(k=0, j=0, tau=1, y=y0,
                     phi=float(cfg.phi_schedule(0)),
                     theta=float(cfg.theta_schedule(0)))


def host_run(s_a: ResolventSelection, s_b: ResolventSelection, y0: np.ndarray,
             cfg: HostConfig) -> HostResult:
    """Run the homotopy solver from ``y0``.

    Terminates once the relaxations in effect are within ``tol_phi`` /
    ``tol_theta`` of 1 and the last step is at most ``tol_y``; otherwise
    runs to ``k_max``.  The returned ``lambda_final`` is the theta-relaxed
    resolvent of ``s_b`` at the final iterate, which reduces to the plain
    resolvent when the schedule has reached 1.
    """
    state = initial_host_state(y0, cfg)
    trace = IterationTrace(y0=state.y)
    phi_used = state.phi
    theta_used = state.theta
    for _ in range(cfg.k_max):
        phi_used, theta_used = state.phi, state.theta
        state = host_step(state, s_a, s_b, cfg)
        trace.rows.append(TraceRow(state.k, state.y, state.last_step_norm,
                                   phi_used, theta_used, state.tau))
        if (phi_used >= 1.0 - cfg.tol_phi
                and theta_used >= 1.0 - cfg.tol_theta
                and state.last_step_norm <= cfg.tol_y):
            trace.reason = "converged"
            break
    y = state.y
    lam = 0.5 * ((1.0 + theta_used) * s_b(y) + (1.0 - theta_used) * y)
    return HostResult(trace=trace, lambda_final=lam, state=state)


# ---------------------------------------------------------------------------
# primal extraction


def extract_primal(y: np.ndarray, f_spec: DualOperatorSpec,
                   g_spec: DualOperatorSpec, phi: float = 1.0,
                   theta: float = 1.0) -> PrimalTuple:
    """Recover the primal/dual triple encoded by a dual iterate.

    With the default ``phi = theta = 1`` this is the standard correspondence
    for Douglas-Rachford on the dual pair: ``lam`` is the g-side resolvent at
    ``y``, ``z`` solves ``B z = (lam - y) / rho - d_g``, and ``x`` solves the
    analogous f-side equation at the reflected point.  For the homotopy
    solver pass the relaxations in effect so the resolvents match the evolved
    operators.  The index convention: extraction at the k-th dual iterate
    yields ``(x_{k+1}, z_k, lam_k)``.
    """
    if f_spec.gamma != g_spec.gamma:
        raise ValueError("extract_primal: f and g specs disagree on the step size")
    rho = f_spec.gamma
    y = as_vector(y, "extract_primal")

    j_g = gmi_dual_resolvent(g_spec, y)
    lam = 0.5 * ((1.0 + theta) * j_g + (1.0 - theta) * y)
    z = g_spec.m.solve_normal((lam - y) / rho - g_spec.d)

    r = 2.0 * lam - y
    j_f = gmi_dual_resolvent(f_spec, r)
    mu = 0.5 * ((1.0 + phi) * j_f + (1.0 - phi) * r)
    x = f_spec.m.solve_normal((mu - r) / rho - f_spec.d)

    check_finite("extract_primal", x, z, lam)
    return PrimalTuple(x=x, z=z, lam=lam)


# ---------------------------------------------------------------------------
# ADMM


@dataclass(frozen=True)
class AdmmProblem:
    """Constrained pair ``min f(x) + g(z)  s.t.  A x + B z + d_f + d_g = 0``
    with exact closed-form subproblem solvers.

    ``solve_x(v, rho)`` must return ``argmin_x f(x) + rho/2 ||A x + v||^2``
    and ``solve_z(v, rho)`` the analogous g-minimizer, both exactly.
    """

    a: LinearMap
    b: LinearMap
    d_f: np.ndarray
    d_g: np.ndarray
    solve_x: Callable[[np.ndarray, float], np.ndarray]
    solve_z: Callable[[np.ndarray, float], np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "d_f", as_vector(self.d_f, "AdmmProblem d_f"))
        object.__setattr__(self, "d_g", as_vector(self.d_g, "AdmmProblem d_g"))
        if self.a.rows != self.b.rows:
            raise ValueError("AdmmProblem: A and B must have the same output dim")
        if self.d_f.shape != (self.a.rows,) or self.d_g.shape != (self.a.rows,):
            raise ValueError("AdmmProblem: offset dimensions do not match maps")


def admm_run(problem: AdmmProblem, rho: float,
             init: tuple[np.ndarray, np.ndarray], max_iter: int,
             tol: float | None = None) -> IterationTrace:
    """Alternating-direction iterations from ``init = (z0, lam0)``.

    Records one row per iteration with the dual variable in the ``y`` slot
    and the constraint residual ``||A x + B z + d_f + d_g||``; full
    ``(x, z, lam)`` snapshots go to ``trace.primal``.  With ``tol`` set, the
    run stops early once both the constraint residual and the z-change are
    at most ``tol``.
    """
    if not (rho > 0 and np.isfinite(rho)):
        raise ValueError("admm_run: rho must be positive and finite")
    if max_iter < 1:
        raise ValueError("admm_run: max_iter must be at least 1")
    z = as_vector(init[0], "admm_run z0")
    lam = as_vector(init[1], "admm_run lam0")
    d = problem.d_f + problem.d_g
    trace = IterationTrace(y0=lam.copy())
    trace.primal = []
    for k in range(1, max_iter + 1):
        x = problem.solve_x(problem.b.mv(z) + d + lam / rho, rho)
        x = as_vector(x, "admm_run x-update")
        z_prev = z
        z = problem.solve_z(problem.a.mv(x) + d + lam / rho, rho)
        z = as_vector(z, "admm_run z-update")
        gap = problem.a.mv(x) + problem.b.mv(z) + d
        lam = lam + rho * gap
        check_finite("admm_run", lam)
        res = float(np.linalg.norm(gap))
        trace.rows.append(TraceRow(k, lam, res, 1.0, 1.0, 1))
        trace.primal.append(PrimalTuple(x=x, z=z, lam=lam))
        if tol is not None and res <= tol \
                and float(np.linalg.norm(z - z_prev)) <= tol:
            trace.reason = "converged"
            break
    return trace


# ---------------------------------------------------------------------------
# diagnostics


def detect_cycle(trace, max_period: int, tol: float) -> Cycle | None:
    """Look for a periodic tail in a trace (or raw iterate array).

    Returns the smallest period ``p <= max_period`` such that
    ``||y[k + p] - y[k]|| <= tol`` for every ``k`` in the last ``3 p``
    iterates, or None.  A constant tail reports period 1.
    """
    if max_period < 1:
        raise ValueError("detect_cycle: max_period must be at least 1")
    if tol < 0:
        raise ValueError("detect_cycle: tol must be nonnegative")
    ys = trace.ys() if isinstance(trace, IterationTrace) else np.asarray(trace, dtype=float)
    n = len(ys)
    for p in range(1, max_period + 1):
        if n < 3 * p:
            break
        window = ys[n - 3 * p:]
        gaps = window[p:] - window[:-p]
        if float(np.max(np.linalg.norm(gaps, axis=1))) <= tol:
            return Cycle(period=p, points=ys[n - p:].copy())
    return None


def rate_bound_check(trace: IterationTrace, beta_rate: float, p_bar: float,
                     tol: float = 1e-9) -> bool:
    """Verify ``||y_final - y_k|| <= beta_rate / (p_bar * k**p_bar) + tol``
    for every recorded ``k >= 1``.

    Only meaningful for runs whose certificate flag never dropped; rows with
    ``tau = 0`` raise a usage error.
    """
    if not (beta_rate > 0 and p_bar > 0):
        raise ValueError("rate_bound_check: beta_rate and p_bar must be positive")
    if any(row.tau != 1 for row in trace.rows):
        raise ValueError("rate_bound_check: trace contains tau = 0 rows; "
                         "the bound only applies to certified runs")
    y_final = trace.last_y
    for row in trace.rows:
        if row.k < 1:
            continue
        bound = beta_rate / (p_bar * row.k ** p_bar) + tol
        if float(np.linalg.norm(y_final - row.y)) > bound:
            return False
    return True


# ---------------------------------------------------------------------------
# CSV export


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trace_csv(trace: IterationTrace, path, include_primal_x: bool = False):
    """Write a trace as CSV: ``k,residual,phi,theta,tau,y_1..y_n[,x_1..x_n]``.

    Floats carry 17 significant digits so a rerun under the same seed is
    byte-identical.
    """
    if not trace.rows:
        raise ValueError("write_trace_csv: empty trace")
    n = len(trace.rows[0].y)
    header = ["k", "residual", "phi", "theta", "tau"]
    header += [f"y_{i + 1}" for i in range(n)]
    if include_primal_x:
        if trace.primal is None or len(trace.primal) != len(trace.rows):
            raise ValueError("write_trace_csv: trace has no aligned primal data")
        header += [f"x_{i + 1}" for i in range(len(trace.primal[0].x))]
    lines = [",".join(header)]
    for i, row in enumerate(trace.rows):
        cells = [str(row.k), _fmt(row.residual), _fmt(row.phi), _fmt(row.theta),
                 str(row.tau)]
        cells += [_fmt(v) for v in row.y]
        if include_primal_x:
            cells += [_fmt(v) for v in trace.primal[i].x]
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
