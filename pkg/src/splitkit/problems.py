"""Problem instances the solvers run on.

Two families:

* sparse basis pursuit with an MCP penalty, ``min R(x)  s.t.  U x = w``,
  solved through its dual pair (indicator of the affine set vs. penalty);
* block-form robust regression (RLAD), ``min ||U x - w||_1 + R(x)``,
  rewritten as ``min f(x) + g(z)  s.t.  A x - z + d_f = 0`` with
  ``A = [U; I]``, ``f = 0`` and ``g(z) = ||z_loss||_1 + R(z_reg)``.

Both expose closed-form dual resolvents plus the ``DualOperatorSpec`` objects
the generic machinery (solvers, primal extraction) consumes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .opcore import (
    DualOperatorSpec,
    GeneralizedResolventSelection,
    LinearMap,
    ResolventSelection,
    as_vector,
    identity_map,
)
from .regularizers import (
    McpParams,
    Regularizer,
    prox_mcp,
    selectant_mcp_dual,
    soft_threshold,
    subgradient_distance,
)
from .splitting import AdmmProblem, PrimalTuple

__all__ = [
    "BasisPursuitInstance",
    "bp_dual_f_resolvent",
    "bp_dual_g_resolvent",
    "bp_selections",
    "bp_dual_specs",
    "bp_periodic_instance",
    "bp_success_instance",
    "PERIODIC_REFERENCE_ORBIT",
    "RladInstance",
    "rlad_dual_f_resolvent",
    "rlad_dual_g_resolvent",
    "rlad_selections",
    "rlad_dual_specs",
    "rlad_admm_problem",
    "rlad_objective",
    "StationarityReport",
    "check_stationarity",
    "synth_rlad_data",
    "load_dataset_csv",
    "standardize_columns",
    "cycle_convention_search",
    "ConventionResult",
]


# ---------------------------------------------------------------------------
# basis pursuit with MCP


@dataclass(frozen=True)
class BasisPursuitInstance:
    """``min sum_i mcp(x_i)  s.t.  u_mat x = w`` with step size ``gamma``.

    ``u_mat`` must have full row rank (checked eagerly); ``beta * gamma``
    must be at least 1 so the dual selectant of the penalty is defined.
    """

    u_mat: LinearMap
    w: np.ndarray
    reg: McpParams
    gamma: float

    def __post_init__(self):
        m = self.u_mat if isinstance(self.u_mat, LinearMap) \
            else LinearMap(self.u_mat, label="basis pursuit design")
        object.__setattr__(self, "u_mat", m)
        object.__setattr__(self, "w", as_vector(self.w, "basis pursuit response"))
        if self.w.shape != (m.rows,):
            raise ValueError(
                f"basis pursuit: response length {self.w.shape[0]} does not "
                f"match design rows {m.rows}"
            )
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError("basis pursuit: gamma must be positive and finite")
        if self.reg.beta * self.gamma < 1.0:
            raise ValueError(
                "basis pursuit: beta * gamma must be at least 1 for the dual "
                "selectant to be defined"
            )
        # full row rank required; surfaces here rather than mid-iteration
        m.cogram_solve(np.zeros(m.rows))

    @property
    def dim(self) -> int:
        return self.u_mat.cols


def bp_dual_f_resolvent(inst: BasisPursuitInstance, y) -> np.ndarray:
    """Resolvent of the constraint side: ``U^T (U U^T)^{-1} (U y + gamma w)``."""
    y = as_vector(y, "bp_dual_f_resolvent")
    u = inst.u_mat
    return u.rmv(u.cogram_solve(u.mv(y) + inst.gamma * inst.w))


def bp_dual_g_resolvent(inst: BasisPursuitInstance, y) -> np.ndarray:
    """Resolvent of the penalty side: coordinatewise MCP dual selectant."""
    y = as_vector(y, "bp_dual_g_resolvent")
    return selectant_mcp_dual(inst.reg, inst.gamma, y)


def bp_selections(inst: BasisPursuitInstance):
    """(f, g) resolvent selections ready for the fixed-point solvers.

    The constraint-side resolvent is affine, so its projection matrix and
    offset are materialized once here; per-iteration work is a single
    matrix-vector product instead of a triangular solve.
    """
    u = inst.u_mat
    proj = u.a.T @ u.cogram_solve(np.asarray(u.a))
    shift = inst.gamma * (u.a.T @ u.cogram_solve(inst.w))
    s_f = ResolventSelection(inst.gamma, lambda y: proj @ y + shift,
                             label="bp dual f")
    s_g = ResolventSelection(inst.gamma, lambda y: bp_dual_g_resolvent(inst, y),
                             label="bp dual g")
    return s_f, s_g


def bp_dual_specs(inst: BasisPursuitInstance):
    """Structured dual-operator specs for primal extraction and cross-checks.

    The f-side inner map is the projection onto the affine set
    ``{x : U x = w}``; the g-side inner map is the MCP prox at step
    ``1 / gamma``.  Feeding these through the generic dual-resolvent identity
    reproduces the closed forms above.
    """
    n = inst.dim
    u = inst.u_mat

    def project(v):
        return v - u.rmv(u.cogram_solve(u.mv(v) - inst.w))

    f_inner = GeneralizedResolventSelection(project, n, label="affine projection")
    f_spec = DualOperatorSpec(m=identity_map(n), d=np.zeros(n), inner=f_inner,
                              gamma=inst.gamma, label="bp dual f")

    tau = 1.0 / inst.gamma
    g_inner = GeneralizedResolventSelection(
        lambda v: prox_mcp(inst.reg, tau, v), n, label="mcp prox")
    g_spec = DualOperatorSpec(m=LinearMap(-np.eye(n), label="negated identity"),
                              d=np.zeros(n), inner=g_inner, gamma=inst.gamma,
                              label="bp dual g")
    return f_spec, g_spec


# a reference orbit recorded for the periodic demo instance, kept for comparison;
# see cycle_convention_search for the reproduction attempt
PERIODIC_REFERENCE_ORBIT = np.array([
    [-1.5, 0.0],
    [-1.25, -0.25],
    [-1.25, -0.75],
    [-1.5, -1.0],
    [-1.75, -0.75],
    [-1.75, -0.25],
])
PERIODIC_REFERENCE_ORBIT.setflags(write=False)


def bp_periodic_instance() -> BasisPursuitInstance:
    """The 2-D instance on which plain Douglas-Rachford cycles forever.

    ``x_1 + x_2 = 1`` with MCP strength 1 and width 2 at unit step size
    (selectant thresholds 1 and 2, the expansive regime beta gamma = 2).
    From generic starts the iteration settles into a short cycle instead of
    converging: period 2 when the penalty is reflected first, a family of
    period-6 orbits under the opposite composition.  The homotopy solver
    does converge here, which is the point of the pairing.
    """
    return BasisPursuitInstance(
        u_mat=LinearMap(np.array([[1.0, 1.0]]), label="periodic design"),
        w=np.array([1.0]),
        reg=McpParams(strength=1.0, beta=2.0),
        gamma=1.0,
    )


def bp_success_instance() -> BasisPursuitInstance:
    """Companion 2-D instance in the nonexpansive regime (beta gamma = 3).

    Douglas-Rachford converges here from every start.  The limit depends on
    the start: the dual point (5/3, 2/3) extracting to the sparse solution
    (1, 0) is reached from starts near the axes, e.g. y0 = (2, 0.1), while
    symmetric starts such as y0 = 0 land on the non-sparse symmetric
    stationary point (1/2, 1/2).
    """
    return BasisPursuitInstance(
        u_mat=LinearMap(np.array([[1.0, 1.0]]), label="success design"),
        w=np.array([1.0]),
        reg=McpParams(strength=1.0, beta=3.0),
        gamma=1.0,
    )


# ---------------------------------------------------------------------------
# robust regression (RLAD) in block form


@dataclass(frozen=True)
class RladInstance:
    """Least-absolute-deviation fit with a separable penalty on the weights.

    Block formulation: ``A = [U; I]``, ``d_f = (-w, 0)``, ``B = -I``,
    ``g(z) = ||z[:m]||_1 + penalty(z[m:])``.  The gram factorization of
    ``A^T A = U^T U + I`` is computed eagerly at construction.
    """

    design: LinearMap
    w: np.ndarray
    reg: Regularizer
    rho: float

    def __post_init__(self):
        d = self.design if isinstance(self.design, LinearMap) \
            else LinearMap(self.design, label="rlad design")
        object.__setattr__(self, "design", d)
        object.__setattr__(self, "w", as_vector(self.w, "rlad response"))
        if self.w.shape != (d.rows,):
            raise ValueError(
                f"rlad: response length {self.w.shape[0]} does not match "
                f"design rows {d.rows}"
            )
        if not (self.rho > 0 and np.isfinite(self.rho)):
            raise ValueError("rlad: rho must be positive and finite")
        self.reg.check_dual_admissible(self.rho)
        m, n = d.rows, d.cols
        a = LinearMap(np.vstack([d.a, np.eye(n)]), label="rlad stacked map")
        a.gram_solve(np.zeros(n))  # A^T A = U^T U + I is always PD
        object.__setattr__(self, "a_map", a)
        d_f = np.concatenate([-self.w, np.zeros(n)])
        d_f.setflags(write=False)
        object.__setattr__(self, "d_f", d_f)

    @property
    def n_samples(self) -> int:
        return self.design.rows

    @property
    def n_features(self) -> int:
        return self.design.cols

    @property
    def block_dim(self) -> int:
        return self.n_samples + self.n_features

    def split_blocks(self, z):
        m = self.n_samples
        return z[:m], z[m:]


def rlad_dual_f_resolvent(inst: RladInstance, y) -> np.ndarray:
    """Loss-free side: ``y + rho d_f - rho A (A^T A)^{-1} A^T (y / rho + d_f)``."""
    y = as_vector(y, "rlad_dual_f_resolvent")
    if y.shape != (inst.block_dim,):
        raise ValueError(
            f"rlad_dual_f_resolvent: expected shape ({inst.block_dim},), "
            f"got {y.shape}"
        )
    a = inst.a_map
    rho = inst.rho
    q = a.gram_solve(a.rmv(y / rho + inst.d_f))
    return y + rho * inst.d_f - rho * a.mv(q)


def rlad_dual_g_resolvent(inst: RladInstance, z) -> np.ndarray:
    """Separable side, blockwise.

    Loss block: clamp to [-1, 1] (dual of the unit l1 loss).  Penalty
    block: the penalty's dual selectant at step ``rho``.
    """
    z = as_vector(z, "rlad_dual_g_resolvent")
    if z.shape != (inst.block_dim,):
        raise ValueError(
            f"rlad_dual_g_resolvent: expected shape ({inst.block_dim},), "
            f"got {z.shape}"
        )
    loss, pen = inst.split_blocks(z)
    return np.concatenate([
        np.clip(loss, -1.0, 1.0),
        np.atleast_1d(inst.reg.dual_selectant(inst.rho, pen)),
    ])


def rlad_selections(inst: RladInstance):
    s_f = ResolventSelection(inst.rho, lambda y: rlad_dual_f_resolvent(inst, y),
                             label="rlad dual f")
    s_g = ResolventSelection(inst.rho, lambda y: rlad_dual_g_resolvent(inst, y),
                             label="rlad dual g")
    return s_f, s_g


def rlad_dual_specs(inst: RladInstance):
    """Dual-operator specs for extraction and generic cross-checks."""
    n = inst.n_features
    k = inst.block_dim
    a = inst.a_map

    f_inner = GeneralizedResolventSelection(a.gram_solve, n,
                                            label="rlad gram solve")
    f_spec = DualOperatorSpec(m=a, d=inst.d_f, inner=f_inner, gamma=inst.rho,
                              label="rlad dual f")

    tau = 1.0 / inst.rho

    def g_prox(v):
        loss, pen = inst.split_blocks(v)
        return np.concatenate([
            soft_threshold(tau, loss),
            np.atleast_1d(inst.reg.prox(tau, pen)),
        ])

    g_inner = GeneralizedResolventSelection(g_prox, k, label="rlad blockwise prox")
    g_spec = DualOperatorSpec(m=LinearMap(-np.eye(k), label="negated identity"),
                              d=np.zeros(k), inner=g_inner, gamma=inst.rho,
                              label="rlad dual g")
    return f_spec, g_spec


def rlad_admm_problem(inst: RladInstance) -> AdmmProblem:
    """Exact-subsolver carrier for :func:`splitkit.splitting.admm_run`.

    Only the convex (l1) penalty qualifies: the z-update must be a global
    minimizer, which the nonconvex penalties cannot certify here.
    """
    if inst.reg.kind != "ell1":
        raise ValueError(
            "rlad_admm_problem: admm needs a convex penalty; use the homotopy "
            "solver for mcp or scad"
        )
    a = inst.a_map
    m = inst.n_samples

    def solve_x(v, rho):
        # argmin_x rho/2 ||A x + v||^2
        return -a.gram_solve(a.rmv(v))

    def solve_z(v, rho):
        # argmin_z g(z) + rho/2 ||v - z||^2, blockwise prox at step 1/rho
        return np.concatenate([
            soft_threshold(1.0 / rho, v[:m]),
            np.atleast_1d(inst.reg.prox(1.0 / rho, v[m:])),
        ])

    return AdmmProblem(
        a=a,
        b=LinearMap(-np.eye(inst.block_dim), label="negated identity"),
        d_f=inst.d_f,
        d_g=np.zeros(inst.block_dim),
        solve_x=solve_x,
        solve_z=solve_z,
    )


def rlad_objective(inst: RladInstance, x) -> float:
    """``||U x - w||_1 + penalty(x)`` on the training data."""
    x = as_vector(x, "rlad_objective")
    fit = inst.design.mv(x) - inst.w
    return float(np.sum(np.abs(fit))) + inst.reg.value(x)


# ---------------------------------------------------------------------------
# stationarity


@dataclass(frozen=True)
class StationarityReport:
    feasibility_residual: float
    f_residual: float
    g_residual: float
    satisfied: bool


def check_stationarity(inst, t: PrimalTuple, tol: float) -> StationarityReport:
    """First-order stationarity of a primal/dual triple.

    For RLAD: constraint gap ``||A x - z + d_f||``, the f-condition
    ``||A^T lam||`` (the smooth part is zero), and the worst coordinatewise
    distance of ``lam`` from the subdifferential of the separable ``g`` at
    ``z``.  For basis pursuit: ``||x - z||``, ``||U x - w||`` and the MCP
    membership distances.  Coordinates of ``z`` within ``tol`` of zero are
    classified as zero for the membership test.
    """
    if tol < 0:
        raise ValueError("check_stationarity: tol must be nonnegative")
    x, z, lam = t.x, t.z, t.lam
    if isinstance(inst, RladInstance):
        feas = float(np.linalg.norm(inst.a_map.mv(x) - z + inst.d_f))
        f_res = float(np.linalg.norm(inst.a_map.rmv(lam)))
        loss_z, pen_z = inst.split_blocks(z)
        loss_l, pen_l = inst.split_blocks(lam)
        unit_l1 = Regularizer.ell1(1.0)
        g_res = 0.0
        for zi, li in zip(loss_z, loss_l):
            g_res = max(g_res, subgradient_distance(unit_l1, zi, li, zero_tol=tol))
        for zi, li in zip(pen_z, pen_l):
            g_res = max(g_res, subgradient_distance(inst.reg, zi, li, zero_tol=tol))
    elif isinstance(inst, BasisPursuitInstance):
        feas = float(np.linalg.norm(x - z))
        f_res = float(np.linalg.norm(inst.u_mat.mv(x) - inst.w))
        reg = Regularizer.mcp(inst.reg.strength, inst.reg.beta)
        g_res = 0.0
        for zi, li in zip(z, lam):
            g_res = max(g_res, subgradient_distance(reg, zi, li, zero_tol=tol))
    else:
        raise TypeError(f"check_stationarity: unsupported instance {type(inst)}")
    ok = feas <= tol and f_res <= tol and g_res <= tol
    return StationarityReport(feasibility_residual=feas, f_residual=f_res,
                              g_residual=g_res, satisfied=ok)


# ---------------------------------------------------------------------------
# data: synthesis, ingestion, standardization


def standardize_columns(design):
    """Center every column; scale non-constant columns to unit variance.

    Returns ``(standardized, means, scales, constant_mask)``.  Constant
    columns are left centered (all zero) with a unit scale so nothing
    divides by zero.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise ValueError("standardize_columns: design must be 2-D")
    means = design.mean(axis=0)
    centered = design - means
    stds = centered.std(axis=0)
    constant = stds == 0.0
    scales = np.where(constant, 1.0, stds)
    return centered / scales, means, scales, constant


def synth_rlad_data(seed: int, n: int, m: int, support: int,
                    noise_scale: float = 0.0, outlier_fraction: float = 0.0):
    """Deterministic synthetic regression data with a sparse ground truth.

    Standard-normal design (columns standardized), ``support`` nonzero
    coefficients of magnitude in [1, 3], Laplace noise at ``noise_scale``
    and a fraction of responses knocked far off as outliers.  With zero
    noise and no outliers the response is exactly ``U x_true``.
    """
    if n < 1 or m < 2:
        raise ValueError("synth_rlad_data: need n >= 1 and m >= 2")
    if not (0 <= support <= n):
        raise ValueError("synth_rlad_data: support must lie in [0, n]")
    if noise_scale < 0:
        raise ValueError("synth_rlad_data: noise_scale must be nonnegative")
    if not (0.0 <= outlier_fraction < 1.0):
        raise ValueError("synth_rlad_data: outlier_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    u_raw = rng.standard_normal((m, n))
    u, _, _, _ = standardize_columns(u_raw)
    x_true = np.zeros(n)
    idx = rng.choice(n, size=support, replace=False)
    x_true[idx] = rng.uniform(1.0, 3.0, size=support) \
        * rng.choice([-1.0, 1.0], size=support)
    w = u @ x_true
    if noise_scale > 0:
        w = w + rng.laplace(0.0, noise_scale, size=m)
    n_out = int(round(outlier_fraction * m))
    if n_out > 0:
        out_idx = rng.choice(m, size=n_out, replace=False)
        bump = rng.uniform(5.0, 15.0, size=n_out) \
            * rng.choice([-1.0, 1.0], size=n_out)
        w = w.copy()
        w[out_idx] += bump * max(1.0, float(np.std(w)))
    return u, w, x_true


def load_dataset_csv(path, response: str):
    """Read a headered CSV into (design, response, feature_names).

    The column named ``response`` becomes the target; every remaining column
    must be numeric.  Malformed input raises with the offending row and
    column spelled out.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if response not in header:
            raise ValueError(
                f"{path}: no column named {response!r}; available: {header}"
            )
        resp_idx = header.index(response)
        feature_names = [h for i, h in enumerate(header) if i != resp_idx]
        rows = []
        targets = []
        for line_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ValueError(
                    f"{path}: row {line_no} has {len(cells)} cells, "
                    f"expected {len(header)}"
                )
            vals = []
            for i, cell in enumerate(cells):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {line_no}, column {header[i]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                if i == resp_idx:
                    targets.append(v)
                else:
                    vals.append(v)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows), np.array(targets), feature_names


# ---------------------------------------------------------------------------
# reproduction search for the reference periodic orbit


@dataclass(frozen=True)
class ConventionResult:
    order: str
    gamma: float
    strength: float
    beta: float
    forward_gap: float
    backward_gap: float
    set_gap: float

    @property
    def best_gap(self) -> float:
        return min(self.forward_gap, self.backward_gap)


def cycle_convention_search(points=None,
                            gammas: Sequence[float] = (0.5, 1.0, 2.0),
                            strengths: Sequence[float] = (1.0, 1.5, 2.0),
                            betas: Sequence[float] = (0.5, 1.0, 2.0)):
    """Try to realize the reference orbit as an actual iteration orbit.

    Sweeps both composition orders of the two reflections and a small
    parameter grid; for each convention reports how far the map is from
    sending each orbit point to its successor (forward), its predecessor
    (backward), and from permuting the orbit as a set.  Results come back
    sorted by the best directed gap, so ``results[0]`` is the closest
    convention found.  Parameter combinations where the dual selectant is
    undefined are skipped.
    """
    pts = PERIODIC_REFERENCE_ORBIT if points is None else np.asarray(points, float)
    results = []
    for gamma in gammas:
        for lam in strengths:
            for beta in betas:
                if beta * gamma < 1.0:
                    continue
                inst = BasisPursuitInstance(
                    u_mat=LinearMap(np.array([[1.0, 1.0]])),
                    w=np.array([1.0]), reg=McpParams(lam, beta), gamma=gamma)
                s_f, s_g = bp_selections(inst)
                for order, (outer, inner) in (
                        ("reflect g then f", (s_f, s_g)),
                        ("reflect f then g", (s_g, s_f))):
                    def step(y, outer=outer, inner=inner):
                        from .opcore import reflect
                        return 0.5 * (y + reflect(outer, reflect(inner, y)))

                    images = np.array([step(p) for p in pts])
                    nxt = np.roll(pts, -1, axis=0)
                    prv = np.roll(pts, 1, axis=0)
                    fwd = float(np.max(np.linalg.norm(images - nxt, axis=1)))
                    bwd = float(np.max(np.linalg.norm(images - prv, axis=1)))
                    set_gap = float(np.max([
                        np.min(np.linalg.norm(pts - img, axis=1))
                        for img in images
                    ]))
                    results.append(ConventionResult(
                        order=order, gamma=gamma, strength=lam, beta=beta,
                        forward_gap=fwd, backward_gap=bwd, set_gap=set_gap))
    results.sort(key=lambda r: (r.best_gap, r.set_gap))
    return results
