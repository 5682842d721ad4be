"""Resolvent-calculus core: selections, reflections, and dual resolvents.

The central identity implemented here evaluates the resolvent of a dual
operator built from a linear map ``M``, an offset ``d`` and an inner
operator ``H`` without ever forming the dual operator itself:

    J(u) = u + gamma * d + gamma * M inner(-M^T (u / gamma + d))

where ``inner`` is a selection of the generalized resolvent
``(M^T M + H / gamma)^{-1}``.  With ``M = -I`` and ``d = 0`` this reduces
to the classical Moreau decomposition ``u - gamma * prox(u / gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "DivergenceError",
    "LinearMap",
    "identity_map",
    "ResolventSelection",
    "GeneralizedResolventSelection",
    "DualOperatorSpec",
    "reflect",
    "over_relax",
    "gmi_dual_resolvent",
    "moreau_dual_resolvent",
    "lipschitz_probe",
    "as_vector",
    "check_finite",
]


class DivergenceError(RuntimeError):
    """A numerical operation produced NaN or infinity."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a 1-D float64 array and verify every entry is finite."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    check_finite(name, arr)
    return arr


def check_finite(operation: str, *arrays) -> None:
    """Abort with a diagnostic naming ``operation`` if any entry is non-finite."""
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(f"{operation}: produced non-finite values")


class LinearMap:
    """Dense linear map with cached Cholesky factorizations.

    Wraps a 2-D array ``a`` and lazily caches factorizations of the gram
    matrix ``a.T @ a`` and co-gram matrix ``a @ a.T``.  Rank deficiency
    surfaces as a ``ValueError`` naming the map the first time the
    corresponding solve is requested.
    """

    def __init__(self, a, label: str = "linear map"):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"{label}: matrix must be 2-D, got shape {a.shape}")
        check_finite(label, a)
        a = a.copy()
        a.setflags(write=False)
        self.a = a
        self.label = label
        self._gram_chol = None
        self._cogram_chol = None

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    def mv(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise ValueError(
                f"{self.label}: expected input of shape ({self.cols},), got {x.shape}"
            )
        return self.a @ x

    def rmv(self, y) -> np.ndarray:
        """Apply the adjoint (transpose) map."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.rows,):
            raise ValueError(
                f"{self.label}: adjoint expected shape ({self.rows},), got {y.shape}"
            )
        return self.a.T @ y

    def gram(self) -> np.ndarray:
        return self.a.T @ self.a

    def cogram(self) -> np.ndarray:
        return self.a @ self.a.T

    def gram_solve(self, b) -> np.ndarray:
        """Solve (a.T a) q = b.  Requires full column rank."""
        if self._gram_chol is None:
            try:
                self._gram_chol = cho_factor(self.gram())
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"{self.label}: gram matrix not positive definite "
                    "(map is rank deficient in its columns)"
                ) from exc
        return cho_solve(self._gram_chol, np.asarray(b, dtype=float))

    def cogram_solve(self, b) -> np.ndarray:
        """Solve (a a.T) q = b.  Requires full row rank."""
        if self._cogram_chol is None:
            try:
                self._cogram_chol = cho_factor(self.cogram())
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"{self.label}: co-gram matrix not positive definite "
                    "(map is rank deficient in its rows)"
                ) from exc
        return cho_solve(self._cogram_chol, np.asarray(b, dtype=float))

    def solve_normal(self, b) -> np.ndarray:
        """Least-squares solve of ``a x = b`` via the normal equations."""
        return self.gram_solve(self.rmv(b))

    def __repr__(self):
        return f"LinearMap({self.rows}x{self.cols}, {self.label!r})"


def identity_map(n: int) -> LinearMap:
    return LinearMap(np.eye(n), label="identity")


@dataclass(frozen=True)
class ResolventSelection:
    """A single-valued selection of a resolvent at step size ``gamma``.

    ``fn`` must be a pure function; determinism of every solver in this
    package rests on that.
    """

    gamma: float
    fn: Callable[[np.ndarray], np.ndarray]
    label: str = "resolvent"

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"{self.label}: gamma must be positive and finite")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(x), dtype=float)
        if out.shape != np.shape(x):
            raise ValueError(
                f"{self.label}: selection changed shape {np.shape(x)} -> {out.shape}"
            )
        check_finite(self.label, out)
        return out


@dataclass(frozen=True)
class GeneralizedResolventSelection:
    """Selection of a generalized resolvent ``(M^T M + H / gamma)^{-1}``.

    The inner operator of :func:`gmi_dual_resolvent`.  ``domain_dim`` is the
    dimension of the space the selection acts on (the column space of ``M``).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    domain_dim: int
    label: str = "generalized resolvent"

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.domain_dim,):
            raise ValueError(
                f"{self.label}: expected shape ({self.domain_dim},), got {v.shape}"
            )
        out = np.asarray(self.fn(v), dtype=float)
        if out.shape != v.shape:
            raise ValueError(f"{self.label}: selection changed dimension")
        check_finite(self.label, out)
        return out


@dataclass(frozen=True)
class DualOperatorSpec:
    """Data defining a dual operator ``-M o H^{-1} o -M^T - d``.

    Holds everything :func:`gmi_dual_resolvent` needs: the structure map
    ``m``, offset ``d``, step size ``gamma`` and a selection ``inner`` of the
    generalized resolvent of ``H / gamma`` with respect to ``m``.
    """

    m: LinearMap
    d: np.ndarray
    inner: GeneralizedResolventSelection
    gamma: float
    label: str = "dual operator"

    def __post_init__(self):
        object.__setattr__(self, "d", as_vector(self.d, f"{self.label}: d"))
        if self.d.shape != (self.m.rows,):
            raise ValueError(
                f"{self.label}: offset dimension {self.d.shape[0]} does not match "
                f"map output dimension {self.m.rows}"
            )
        if self.inner.domain_dim != self.m.cols:
            raise ValueError(
                f"{self.label}: inner resolvent domain {self.inner.domain_dim} does "
                f"not match map input dimension {self.m.cols}"
            )
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"{self.label}: gamma must be positive and finite")


def reflect(selection: ResolventSelection, x: np.ndarray) -> np.ndarray:
    """Reflected resolvent ``2 J(x) - x``."""
    x = as_vector(x, f"reflect({selection.label})")
    return 2.0 * selection(x) - x


def over_relax(selection: ResolventSelection, alpha: float, x: np.ndarray) -> np.ndarray:
    """Over-relaxed resolvent ``(1 + alpha) J(x) - alpha x`` for alpha in [0, 1].

    Interpolates between the resolvent (``alpha = 0``) and the reflected
    resolvent (``alpha = 1``).  When ``J`` is nonexpansive the result is
    ``1 + 2 alpha`` Lipschitz.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"over_relax: alpha must lie in [0, 1], got {alpha}")
    x = as_vector(x, f"over_relax({selection.label})")
    return (1.0 + alpha) * selection(x) - alpha * x


def gmi_dual_resolvent(spec: DualOperatorSpec, u: np.ndarray) -> np.ndarray:
    """Resolvent of a dual operator, evaluated through its primal structure.

    Parameters
    ----------
    spec : DualOperatorSpec
        Structure map ``m``, offset ``d``, step ``gamma`` and inner
        generalized-resolvent selection.
    u : array
        Point of evaluation, dimension ``spec.m.rows``.

    Returns
    -------
    array
        ``u + gamma d + gamma m(inner(-m^T (u / gamma + d)))``.
    """
    u = as_vector(u, f"gmi_dual_resolvent({spec.label})")
    if u.shape != (spec.m.rows,):
        raise ValueError(
            f"gmi_dual_resolvent({spec.label}): expected shape ({spec.m.rows},), "
            f"got {u.shape}"
        )
    gamma = spec.gamma
    inner_arg = -spec.m.rmv(u / gamma + spec.d)
    q = spec.inner(inner_arg)
    out = u + gamma * spec.d + gamma * spec.m.mv(q)
    check_finite(f"gmi_dual_resolvent({spec.label})", out)
    return out


def moreau_dual_resolvent(
    prox: Callable[[np.ndarray], np.ndarray], gamma: float, u: np.ndarray
) -> np.ndarray:
    """Classical Moreau route to a dual resolvent: ``u - gamma prox(u / gamma)``.

    ``prox`` must be the proximal map of the underlying function at step
    ``1 / gamma``.
    """
    if not (gamma > 0 and np.isfinite(gamma)):
        raise ValueError("moreau_dual_resolvent: gamma must be positive and finite")
    u = np.asarray(u, dtype=float)
    check_finite("moreau_dual_resolvent", u)
    out = u - gamma * np.asarray(prox(u / gamma), dtype=float)
    check_finite("moreau_dual_resolvent", out)
    return out


def lipschitz_probe(
    fn: Callable[[np.ndarray], np.ndarray],
    pairs: Iterable[tuple[np.ndarray, np.ndarray]],
) -> float:
    """Empirical Lipschitz constant of ``fn`` over sample pairs.

    Returns ``max ||fn(x) - fn(y)|| / ||x - y||`` over the supplied pairs,
    skipping pairs with coincident inputs.  A lower bound on the true
    constant; raises if no usable pair was given.
    """
    best = None
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gap = np.linalg.norm(x - y)
        if gap == 0.0:
            continue
        ratio = np.linalg.norm(
            np.asarray(fn(x), dtype=float) - np.asarray(fn(y), dtype=float)
        ) / gap
        if best is None or ratio > best:
            best = ratio
    if best is None:
        raise ValueError("lipschitz_probe: no pair with distinct points supplied")
    return float(best)
