"""Test objectives and the analytic ingredients the dynamics consume.

Every built-in is separable: a sum over coordinates of a scalar piece, either
a quartic ``(u - c)**4`` or a quadratic ``(k/2)(u - c)**2``, plus an optional
``weight * |u|`` term. Separability is what lets ``prox`` be solved exactly one
coordinate at a time.

All maps act on the last axis, so they accept a single point of shape ``(n,)``
or a stack of sampled points of shape ``(m, n)``.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from hessdamp.errors import ConfigError, DimensionError, HessianUnavailableError, ProxError

logger = logging.getLogger(__name__)

ArrayMap = Callable[[np.ndarray], np.ndarray]

# Box used for sampled invariants and the Lipschitz constant of the quartic.
WORKING_BOX = 20.0
_PROX_MAX_ITER = 100
_PROX_RESIDUAL = 1e-12


@dataclass(frozen=True, eq=False)
class Objective:
    """Value/gradient/Hessian-vector/prox bundle with convexity metadata."""

    name: str
    dimension: int
    smooth_value: ArrayMap
    smooth_gradient: ArrayMap
    prox: Callable[[np.ndarray, float], np.ndarray]
    hessian_vector: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    nonsmooth_weight: float = 0.0
    mu: float = 0.0
    lipschitz_grad: float | None = None
    known_minimizer: np.ndarray | None = None
    known_min_value: float | None = None

    @property
    def is_smooth(self) -> bool:
        return self.nonsmooth_weight == 0.0


def _as_point(obj: Objective, x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != obj.dimension:
        raise DimensionError(f"{obj.name}: expected points of dimension {obj.dimension}, got shape {arr.shape}")
    return arr


def value(obj: Objective, x: Any) -> np.ndarray | float:
    """Full objective: smooth part plus ``nonsmooth_weight * ||x||_1``."""
    x = _as_point(obj, x)
    out = obj.smooth_value(x)
    if obj.nonsmooth_weight:
        out = out + obj.nonsmooth_weight * np.abs(x).sum(axis=-1)
    return out


def gradient(obj: Objective, x: Any) -> np.ndarray:
    """Gradient of the smooth part."""
    return obj.smooth_gradient(_as_point(obj, x))


def hessian_vector(obj: Objective, x: Any, v: Any) -> np.ndarray:
    if obj.hessian_vector is None:
        raise HessianUnavailableError(f"Hessian unavailable for objective {obj.name!r}")
    return obj.hessian_vector(_as_point(obj, x), _as_point(obj, v))


def prox(obj: Objective, v: Any, s: float) -> np.ndarray:
    """``argmin_u f(u) + ||u - v||^2 / (2s)`` for the full objective."""
    if not s > 0:
        raise ValueError(f"prox step must be positive, got {s}")
    return obj.prox(_as_point(obj, v), float(s))


def subgradient(obj: Objective, x: Any) -> np.ndarray:
    """Minimal-norm element of the subdifferential at ``x``."""
    x = _as_point(obj, x)
    g = obj.smooth_gradient(x)
    w = obj.nonsmooth_weight
    if not w:
        return g
    at_zero = x == 0.0
    shrunk = np.sign(g) * np.maximum(np.abs(g) - w, 0.0)
    return np.where(at_zero, shrunk, g + w * np.sign(x))


def with_minimum(obj: Objective, xstar: Any, fbar: float) -> Objective:
    """Copy of ``obj`` carrying a reference minimizer and minimum value."""
    return dataclasses.replace(obj, known_minimizer=_as_point(obj, xstar).copy(), known_min_value=float(fbar))


# ---------------------------------------------------------------------------
# Separable construction
# ---------------------------------------------------------------------------


def _solve_quartic(v: np.ndarray, c: np.ndarray, s: float) -> np.ndarray:
    """Root of ``4(u - c)^3 + (u - v)/s = 0`` by safeguarded Newton.

    The root is bracketed by ``[min(v, c) - 1, max(v, c) + 1]``; a Newton
    iterate leaving the bracket is replaced by the bisection midpoint.
    """
    lo = np.minimum(v, c) - 1.0
    hi = np.maximum(v, c) + 1.0
    u = np.clip(v, lo, hi)
    scale = np.maximum(1.0, np.abs(v))
    for it in range(_PROX_MAX_ITER):
        d = u - c
        r = 4.0 * s * d**3 + u - v
        done = np.abs(r) <= _PROX_RESIDUAL * scale
        if np.all(done):
            logger.debug("quartic prox converged in %d iterations", it)
            return u
        hi = np.where(r > 0, u, hi)
        lo = np.where(r < 0, u, lo)
        step = r / (12.0 * s * d**2 + 1.0)
        trial = u - step
        outside = (trial <= lo) | (trial >= hi)
        trial = np.where(outside, 0.5 * (lo + hi), trial)
        u = np.where(done, u, trial)
        if np.all(hi - lo <= 1e-15 * scale):
            return u
    raise ProxError(f"quartic prox did not converge after {_PROX_MAX_ITER} iterations")


def separable(
    name: str,
    centers: Any,
    quartic_mask: Any,
    curvatures: Any,
    weight: float = 0.0,
    *,
    known_minimizer: Any = None,
    known_min_value: float | None = None,
) -> Objective:
    """Build a separable objective.

    Coordinate ``i`` contributes ``(x_i - centers[i])**4`` when
    ``quartic_mask[i]`` is set and ``curvatures[i]/2 * (x_i - centers[i])**2``
    otherwise, plus ``weight * |x_i|``.
    """
    centers = np.asarray(centers, dtype=float)
    quartic = np.asarray(quartic_mask, dtype=bool)
    kappa = np.where(quartic, 0.0, np.asarray(curvatures, dtype=float))
    n = centers.size
    if quartic.size != n or kappa.size != n:
        raise DimensionError(f"{name}: centers, quartic_mask and curvatures must have equal length")
    if np.any(kappa < 0) or weight < 0:
        raise ConfigError(f"{name}: curvatures and weight must be nonnegative")

    def smooth_value(x: np.ndarray) -> np.ndarray:
        d = x - centers
        pieces = np.where(quartic, d**4, 0.5 * kappa * d**2)
        return pieces.sum(axis=-1)

    def smooth_gradient(x: np.ndarray) -> np.ndarray:
        d = x - centers
        return np.where(quartic, 4.0 * d**3, kappa * d)

    def hess_vec(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        d = x - centers
        return np.where(quartic, 12.0 * d**2, kappa) * v

    def smooth_prox(v: np.ndarray, s: float) -> np.ndarray:
        closed = (v + s * kappa * centers) / (1.0 + s * kappa)
        if not quartic.any():
            return closed
        solved = _solve_quartic(v, np.broadcast_to(centers, v.shape), s)
        return np.where(quartic, solved, closed)

    def full_prox(v: np.ndarray, s: float) -> np.ndarray:
        if weight == 0.0:
            return smooth_prox(v, s)
        # Shrinkage composition: zero if 0 is optimal, else a shifted smooth solve.
        slope_at_zero = v / s - smooth_gradient(np.zeros_like(v))
        pos = smooth_prox(v - s * weight, s)
        neg = smooth_prox(v + s * weight, s)
        return np.where(slope_at_zero > weight, pos, np.where(slope_at_zero < -weight, neg, 0.0))

    reach = WORKING_BOX + np.abs(centers)
    lipschitz = float(np.max(np.where(quartic, 12.0 * reach**2, kappa)))
    mu = 0.0 if quartic.any() else float(kappa.min())

    return Objective(
        name=name,
        dimension=n,
        smooth_value=smooth_value,
        smooth_gradient=smooth_gradient,
        prox=full_prox,
        hessian_vector=hess_vec,
        nonsmooth_weight=float(weight),
        mu=mu,
        lipschitz_grad=lipschitz if lipschitz > 0 else None,
        known_minimizer=None if known_minimizer is None else np.asarray(known_minimizer, dtype=float),
        known_min_value=known_min_value,
    )


def quartic(weight: float = 0.0) -> Objective:
    """f(x1, x2) = (x1 - 1)^4 + (x2 - 5)^2, optionally plus ``weight * ||x||_1``.

    The smooth variant has its unique minimizer at (1, 5). With the l1 term the
    minimizer moves and is left unknown; see ``polish_minimizer``.
    """
    smooth = weight == 0.0
    return separable(
        "quartic" if smooth else "quartic-l1",
        centers=[1.0, 5.0],
        quartic_mask=[True, False],
        curvatures=[0.0, 2.0],
        weight=weight,
        known_minimizer=[1.0, 5.0] if smooth else None,
        known_min_value=0.0 if smooth else None,
    )


def quadratic(mu: float = 1.0, xstar: Any = (0.0, 0.0)) -> Objective:
    """f(x) = (mu/2) ||x - x*||^2."""
    if not mu > 0:
        raise ConfigError(f"quadratic-sc: mu must be positive, got {mu}")
    xstar = np.atleast_1d(np.asarray(xstar, dtype=float))
    n = xstar.size
    obj = separable(
        "quadratic-sc",
        centers=xstar,
        quartic_mask=np.zeros(n, dtype=bool),
        curvatures=np.full(n, float(mu)),
        known_minimizer=xstar,
        known_min_value=0.0,
    )
    return obj


def quartic_l1_minimizer(weight: float) -> np.ndarray:
    """Closed-form minimizer of the quartic plus ``weight * ||x||_1`` for small weights."""
    return np.array([1.0 - np.cbrt(weight / 4.0), 5.0 - weight / 2.0])


OBJECTIVES: dict[str, Callable[..., Objective]] = {
    "quartic": lambda: quartic(0.0),
    "quartic-l1": lambda weight=0.1: quartic(float(weight)),
    "quadratic-sc": lambda mu=1.0, xstar=(0.0, 0.0): quadratic(float(mu), xstar),
}


def make_objective(objective_id: str, params: dict[str, Any] | None = None) -> Objective:
    """Resolve a scenario objective id into an ``Objective``."""
    try:
        factory = OBJECTIVES[objective_id]
    except KeyError:
        raise ConfigError(f"unknown objective id {objective_id!r}; expected one of {sorted(OBJECTIVES)}") from None
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"objective {objective_id!r}: {exc}") from None


def polish_minimizer(
    obj: Objective,
    x_start: Any,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> tuple[np.ndarray, float, float]:
    """Damped proximal-gradient iteration to a high-accuracy minimizer.

    Returns ``(x, f(x), residual)`` where the residual is the norm of the
    prox-gradient map. Intended for objectives whose smooth part is locally
    strongly convex at the minimizer (e.g. the l1 variant of the quartic).
    """
    x = _as_point(obj, x_start).astype(float).copy()
    w = obj.nonsmooth_weight

    def soft(z: np.ndarray, t: float) -> np.ndarray:
        return np.sign(z) * np.maximum(np.abs(z) - t * w, 0.0)

    step = 1.0
    residual = np.inf
    for it in range(max_iter):
        g = obj.smooth_gradient(x)
        fx = obj.smooth_value(x)
        while True:
            x_new = soft(x - step * g, step)
            diff = x_new - x
            bound = fx + g @ diff + diff @ diff / (2.0 * step)
            if obj.smooth_value(x_new) <= bound + 1e-15 * max(1.0, abs(fx)) or step < 1e-12:
                break
            step *= 0.5
        residual = float(np.linalg.norm(diff) / step)
        x = x_new
        if residual <= tol:
            logger.debug("polish converged in %d iterations (residual %.3e)", it + 1, residual)
            break
        step = min(1.0, step * 1.5)
    else:
        logger.warning("polish stopped after %d iterations with residual %.3e", max_iter, residual)
    return x, float(value(obj, x)), residual
