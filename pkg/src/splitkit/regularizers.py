"""Sparsity penalties and their proximal / dual-selectant calculus.

Everything here is a scalar map lifted coordinatewise; array inputs come
back as arrays, python scalars come back as floats.  Piecewise definitions
are evaluated first-match: when a point sits on a branch boundary the
earliest listed branch wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "McpParams",
    "ScadParams",
    "Regularizer",
    "soft_threshold",
    "phi_mcp",
    "phi_scad",
    "phi_mcp_homotopy",
    "prox_mcp",
    "prox_scad",
    "selectant_mcp_dual",
    "selectant_scad_dual",
    "subgradient_interval",
    "subgradient_distance",
    "subgradient_membership",
]


@dataclass(frozen=True)
class McpParams:
    """Minimax concave penalty parameters: weight ``strength``, width ``beta``."""

    strength: float
    beta: float

    def __post_init__(self):
        if not (self.strength > 0 and np.isfinite(self.strength)):
            raise ValueError("McpParams: strength must be positive and finite")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError("McpParams: beta must be positive and finite")


@dataclass(frozen=True)
class ScadParams:
    """SCAD parameters: weight ``strength``, concavity knee ``a`` (> 2)."""

    strength: float
    a: float

    def __post_init__(self):
        if not (self.strength > 0 and np.isfinite(self.strength)):
            raise ValueError("ScadParams: strength must be positive and finite")
        if not (self.a > 2 and np.isfinite(self.a)):
            raise ValueError("ScadParams: a must exceed 2")


def _lift(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _unlift(arr, scalar):
    return float(arr) if scalar else arr


def soft_threshold(kappa: float, x):
    """Soft thresholding ``sign(x) max(|x| - kappa, 0)``."""
    if not (kappa > 0 and np.isfinite(kappa)):
        raise ValueError("soft_threshold: kappa must be positive and finite")
    arr, scalar = _lift(x)
    out = np.sign(arr) * np.maximum(np.abs(arr) - kappa, 0.0)
    return _unlift(out, scalar)


def phi_mcp(p: McpParams, x):
    """MCP value: quadratically tempered |x| that flattens at ``beta * strength``."""
    lam, beta = p.strength, p.beta
    arr, scalar = _lift(x)
    ax = np.abs(arr)
    out = np.where(ax <= beta * lam, lam * ax - arr * arr / (2.0 * beta),
                   beta * lam * lam / 2.0)
    return _unlift(out, scalar)


def phi_scad(p: ScadParams, x):
    """SCAD value: linear near zero, quadratic blend, constant plateau."""
    lam, a = p.strength, p.a
    arr, scalar = _lift(x)
    ax = np.abs(arr)
    mid = (2.0 * a * lam * ax - lam * lam - arr * arr) / (2.0 * (a - 1.0))
    out = np.where(ax <= lam, lam * ax,
                   np.where(ax <= a * lam, mid, lam * lam * (a + 1.0) / 2.0))
    return _unlift(out, scalar)


def phi_mcp_homotopy(p: McpParams, theta: float, y):
    """Homotopy blend of MCP: recovers :func:`phi_mcp` at ``theta = 1``.

    At ``theta = 0`` the blend is convex whenever ``beta <= 2``; raising
    ``theta`` towards 1 restores the concave plateau continuously.
    """
    if not (0.0 <= theta <= 1.0):
        raise ValueError("phi_mcp_homotopy: theta must lie in [0, 1]")
    lam, beta = p.strength, p.beta
    arr, scalar = _lift(y)
    ay = np.abs(arr)
    knee = beta * lam * (1.0 + theta) / 2.0
    inner = arr * arr * (beta * (1.0 - theta) - 2.0) / (2.0 * beta * (1.0 + theta)) \
        + lam * ay
    outer = arr * arr * (1.0 - theta) / (2.0 * (1.0 + theta)) \
        + beta * lam * lam * (1.0 + theta) / 4.0
    out = np.where(ay < knee, inner, outer)
    return _unlift(out, scalar)


def prox_mcp(p: McpParams, tau: float, v):
    """Proximal map of MCP at step ``tau`` (firm thresholding).

    Requires ``tau <= beta``; below that the subproblem is strongly convex.
    At ``tau == beta`` the map degenerates to hard thresholding at
    ``beta * strength``, and the identity branch wins on the boundary.
    """
    lam, beta = p.strength, p.beta
    if not (tau > 0 and np.isfinite(tau)):
        raise ValueError("prox_mcp: tau must be positive and finite")
    if tau > beta:
        raise ValueError(f"prox_mcp: tau = {tau} exceeds beta = {beta}")
    arr, scalar = _lift(v)
    av = np.abs(arr)
    if tau == beta:
        out = np.where(av < beta * lam, 0.0, arr)
    else:
        firm = np.sign(arr) * (av - tau * lam) / (1.0 - tau / beta)
        out = np.where(av <= tau * lam, 0.0,
                       np.where(av <= beta * lam, firm, arr))
    return _unlift(out, scalar)


def prox_scad(p: ScadParams, tau: float, v):
    """Proximal map of SCAD at step ``tau``.  Requires ``tau < a - 1``."""
    lam, a = p.strength, p.a
    if not (tau > 0 and np.isfinite(tau)):
        raise ValueError("prox_scad: tau must be positive and finite")
    if tau >= a - 1.0:
        raise ValueError(f"prox_scad: tau = {tau} must be below a - 1 = {a - 1.0}")
    arr, scalar = _lift(v)
    av = np.abs(arr)
    soft = np.sign(arr) * np.maximum(av - tau * lam, 0.0)
    blend = ((a - 1.0) * arr - np.sign(arr) * a * tau * lam) / (a - 1.0 - tau)
    out = np.where(av <= lam * (1.0 + tau), soft,
                   np.where(av <= a * lam, blend, arr))
    return _unlift(out, scalar)


def selectant_mcp_dual(p: McpParams, gamma: float, x):
    """Selection of the MCP dual resolvent at step ``gamma``.

    Identity below ``strength``, an expanding linear piece up to
    ``beta * gamma * strength``, zero beyond.  Requires
    ``beta * gamma >= 1``; at equality the middle interval is empty and the
    map is hard thresholding of the identity branch.  Nonexpansive exactly
    when ``beta * gamma >= 2``.
    """
    lam, beta = p.strength, p.beta
    if not (gamma > 0 and np.isfinite(gamma)):
        raise ValueError("selectant_mcp_dual: gamma must be positive and finite")
    bg = beta * gamma
    if bg < 1.0:
        raise ValueError(
            f"selectant_mcp_dual: beta * gamma = {bg} must be at least 1"
        )
    arr, scalar = _lift(x)
    ax = np.abs(arr)
    if bg == 1.0:
        # middle interval (lam, bg*lam) is empty; first branch keeps |x| <= lam
        out = np.where(ax <= lam, arr, 0.0)
    else:
        mid = (arr - np.sign(arr) * bg * lam) / (1.0 - bg)
        out = np.where(ax <= lam, arr, np.where(ax < bg * lam, mid, 0.0))
    return _unlift(out, scalar)


def selectant_scad_dual(p: ScadParams, gamma: float, x):
    """Selection of the SCAD dual resolvent at step ``gamma``.

    Requires ``gamma * (a - 1) > 1``.  Nonexpansive exactly when
    ``gamma * (a - 1) >= 2``.
    """
    lam, a = p.strength, p.a
    if not (gamma > 0 and np.isfinite(gamma)):
        raise ValueError("selectant_scad_dual: gamma must be positive and finite")
    if gamma * (a - 1.0) <= 1.0:
        raise ValueError(
            f"selectant_scad_dual: gamma * (a - 1) = {gamma * (a - 1.0)} "
            "must exceed 1"
        )
    arr, scalar = _lift(x)
    ax = np.abs(arr)
    sg = np.sign(arr)
    mid = (sg * a * gamma * lam - arr) / (gamma * (a - 1.0) - 1.0)
    out = np.where(ax >= a * gamma * lam, 0.0,
                   np.where(ax > lam * (gamma + 1.0), mid,
                            np.where(ax > lam, sg * lam, arr)))
    return _unlift(out, scalar)


@dataclass(frozen=True)
class Regularizer:
    """Tagged union over the supported penalties: ``ell1``, ``mcp``, ``scad``."""

    kind: str
    strength: float
    beta: float = 0.0   # mcp only
    a: float = 0.0      # scad only

    @staticmethod
    def ell1(strength: float) -> "Regularizer":
        if not (strength > 0 and np.isfinite(strength)):
            raise ValueError("Regularizer.ell1: strength must be positive")
        return Regularizer("ell1", strength)

    @staticmethod
    def mcp(strength: float, beta: float) -> "Regularizer":
        p = McpParams(strength, beta)
        return Regularizer("mcp", p.strength, beta=p.beta)

    @staticmethod
    def scad(strength: float, a: float) -> "Regularizer":
        p = ScadParams(strength, a)
        return Regularizer("scad", p.strength, a=p.a)

    def with_strength(self, strength: float) -> "Regularizer":
        """Same penalty shape at a different weight (for grid sweeps)."""
        if self.kind == "ell1":
            return Regularizer.ell1(strength)
        if self.kind == "mcp":
            return Regularizer.mcp(strength, self.beta)
        return Regularizer.scad(strength, self.a)

    @property
    def mcp_params(self) -> McpParams:
        return McpParams(self.strength, self.beta)

    @property
    def scad_params(self) -> ScadParams:
        return ScadParams(self.strength, self.a)

    def value(self, x) -> float:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "ell1":
            return float(self.strength * np.sum(np.abs(arr)))
        if self.kind == "mcp":
            return float(np.sum(phi_mcp(self.mcp_params, arr)))
        return float(np.sum(phi_scad(self.scad_params, arr)))

    def prox(self, tau: float, v):
        if self.kind == "ell1":
            return soft_threshold(tau * self.strength, v)
        if self.kind == "mcp":
            return prox_mcp(self.mcp_params, tau, v)
        return prox_scad(self.scad_params, tau, v)

    def dual_selectant(self, gamma: float, x):
        """Coordinatewise selection of the dual resolvent at step ``gamma``."""
        if self.kind == "ell1":
            # Moreau with soft thresholding collapses to a clamp
            arr, scalar = _lift(x)
            out = np.clip(arr, -self.strength, self.strength)
            return _unlift(out, scalar)
        if self.kind == "mcp":
            return selectant_mcp_dual(self.mcp_params, gamma, x)
        return selectant_scad_dual(self.scad_params, gamma, x)

    def check_dual_admissible(self, gamma: float) -> None:
        """Raise if the dual selectant is not defined at this step size."""
        if self.kind == "mcp" and self.beta * gamma < 1.0:
            raise ValueError(
                f"mcp regularizer: beta * gamma = {self.beta * gamma} < 1; "
                "raise beta or the step size"
            )
        if self.kind == "scad" and gamma * (self.a - 1.0) <= 1.0:
            raise ValueError(
                f"scad regularizer: gamma * (a - 1) = {gamma * (self.a - 1.0)} "
                "<= 1; raise a or the step size"
            )

    def dual_nonexpansive(self, gamma: float) -> bool:
        """True when the dual selectant is nonexpansive at step ``gamma``."""
        if self.kind == "ell1":
            return True
        if self.kind == "mcp":
            return self.beta * gamma >= 2.0
        return gamma * (self.a - 1.0) >= 2.0


def subgradient_interval(reg: Regularizer, z: float, zero_tol: float = 0.0):
    """Clarke subdifferential of one penalty coordinate as ``(lo, hi)``.

    ``zero_tol`` widens the "at zero" classification; useful when testing
    stationarity of iterates whose zero coordinates are only zero to
    floating precision.
    """
    lam = reg.strength
    az = abs(z)
    if az <= zero_tol or z == 0.0:
        return (-lam, lam)
    s = 1.0 if z > 0 else -1.0
    if reg.kind == "ell1":
        g = lam * s
    elif reg.kind == "mcp":
        beta = reg.beta
        g = s * lam - z / beta if az <= beta * lam else 0.0
    else:
        a = reg.a
        if az <= lam:
            g = s * lam
        elif az <= a * lam:
            g = s * (a * lam - az) / (a - 1.0)
        else:
            g = 0.0
    return (g, g)


def subgradient_distance(reg: Regularizer, z: float, v: float,
                         zero_tol: float = 0.0) -> float:
    """Distance from ``v`` to the subdifferential of the penalty at ``z``."""
    lo, hi = subgradient_interval(reg, z, zero_tol)
    return max(lo - v, v - hi, 0.0)


def subgradient_membership(reg: Regularizer, z: float, v: float, tol: float,
                           zero_tol: float = 0.0) -> bool:
    """Whether ``v`` lies in the penalty's subdifferential at ``z``, up to ``tol``."""
    return subgradient_distance(reg, z, v, zero_tol) <= tol
