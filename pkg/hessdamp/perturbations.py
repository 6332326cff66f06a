"""Time-dependent error signals e(t), their derivatives and integrability diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Literal, Sequence

import numpy as np

from hessdamp.errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)

Integrability = Literal["converged", "diverging", "inconclusive"]

TimeMap = Callable[[np.ndarray], np.ndarray]

CLASSIFY_HORIZONS = (1e2, 1e3, 1e4)
_QUAD_ABS_TOL = 1e-10
_QUAD_REL_FLOOR = 1e-10
_QUAD_MAX_LEVELS = 60
# Decade-over-decade ratio of t^-q tails is 10^(1-q); 0.9 accepts q >= 1.05.
_CONVERGED_RATIO = 0.9


@dataclass(frozen=True, eq=False)
class PerturbationSignal:
    """Additive gradient error e(t) on R^n.

    ``values`` and ``derivative`` map an array of times of shape ``(m,)`` to an
    array of shape ``(m, n)``. When ``derivative`` is None, ``eval_derivative``
    falls back to central differences and ``derivative_is_numeric`` is set.
    """

    kind: str
    dimension: int
    values: TimeMap
    derivative: TimeMap | None = None
    delta: float | None = None
    t_min: float = 1.0
    breakpoints: Callable[[float, float, bool], np.ndarray] | None = None

    @property
    def derivative_is_numeric(self) -> bool:
        return self.derivative is None

    def _times(self, t: Any) -> np.ndarray:
        ts = np.asarray(t, dtype=float)
        if np.any(ts < self.t_min):
            raise DomainError(f"{self.kind} signal evaluated at t={np.min(ts)} < t_min={self.t_min}")
        return ts

    def eval(self, t: Any) -> np.ndarray:
        ts = self._times(t)
        return self.values(np.atleast_1d(ts)).reshape(ts.shape + (self.dimension,))

    def eval_derivative(self, t: Any) -> np.ndarray:
        ts = self._times(t)
        flat = np.atleast_1d(ts)
        if self.derivative is not None:
            out = self.derivative(flat)
        else:
            h = 1e-6 * np.maximum(1.0, flat)
            lo = np.maximum(flat - h, self.t_min)
            hi = flat + h
            out = (self.values(hi) - self.values(lo)) / (hi - lo)[:, None]
        return out.reshape(ts.shape + (self.dimension,))


def zero_signal(dimension: int, t_min: float = 1.0) -> PerturbationSignal:
    def values(t: np.ndarray) -> np.ndarray:
        return np.zeros((t.size, dimension))

    return PerturbationSignal(kind="zero", dimension=dimension, values=values, derivative=values, t_min=t_min)


def _component_mask(dimension: int, components: str | Sequence[int]) -> np.ndarray:
    mask = np.zeros(dimension)
    if components == "all":
        mask[:] = 1.0
        return mask
    for idx in components:
        if not 0 <= int(idx) < dimension:
            raise DomainError(f"perturbation component {idx} outside 0..{dimension - 1}")
        mask[int(idx)] = 1.0
    return mask


def cosine_decay(delta: float, dimension: int, components: str | Sequence[int] = "all") -> PerturbationSignal:
    """e(t) = cos(2 pi t) / t^delta on the selected components (all by default)."""
    if delta < 0:
        raise DomainError(f"cosine-decay exponent must be >= 0, got {delta}")
    if dimension < 1:
        raise DomainError(f"dimension must be >= 1, got {dimension}")
    mask = _component_mask(dimension, components)
    two_pi = 2.0 * np.pi

    def values(t: np.ndarray) -> np.ndarray:
        scalar = np.cos(two_pi * t) / t**delta
        return scalar[:, None] * mask

    def derivative(t: np.ndarray) -> np.ndarray:
        scalar = -two_pi * np.sin(two_pi * t) / t**delta - delta * np.cos(two_pi * t) / t ** (delta + 1.0)
        return scalar[:, None] * mask

    def breakpoints(t0: float, t1: float, of_derivative: bool) -> np.ndarray:
        # Zeros of the scalar factor; |e| and |e'| are smooth between them.
        ks = np.arange(np.floor(2.0 * t0) - 1.0, np.ceil(2.0 * t1) + 2.0)
        if not of_derivative:
            roots = ks / 2.0 + 0.25
        else:
            # 2 pi t sin(2 pi t) + delta cos(2 pi t) = 0, one root near each k/2.
            roots = np.maximum(ks / 2.0, 1e-3)
            for _ in range(8):
                s, c = np.sin(two_pi * roots), np.cos(two_pi * roots)
                h = two_pi * roots * s + delta * c
                dh = two_pi * s + two_pi**2 * roots * c - two_pi * delta * s
                roots = roots - h / dh
        return np.unique(roots[(roots > t0) & (roots < t1)])

    return PerturbationSignal(
        kind="cosine-decay",
        dimension=dimension,
        values=values,
        derivative=derivative,
        delta=float(delta),
        breakpoints=breakpoints if mask.any() else None,
    )


def combine_g(signal: PerturbationSignal, beta: float, t: Any) -> np.ndarray:
    """g(t) = e(t) + beta * e'(t)."""
    if beta == 0:
        return signal.eval(t)
    return signal.eval(t) + beta * signal.eval_derivative(t)


def _adaptive_simpson(func: TimeMap, edges: np.ndarray, abs_tol: float) -> float:
    """Vectorised adaptive Simpson over the panels defined by ``edges``.

    Each interval is accepted once two half-interval Simpson sums agree with
    the whole-interval sum; accepted intervals add their Richardson-corrected
    value. The absolute tolerance is shared out in proportion to length.
    """
    span = edges[-1] - edges[0]
    a, b = edges[:-1], edges[1:]
    m = 0.5 * (a + b)
    fa, fm, fb = func(a), func(m), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    pieces: list[float] = []
    for level in range(_QUAD_MAX_LEVELS):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = func(lm), func(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        refined = left + right
        allowed = 15.0 * np.maximum(abs_tol * (b - a) / span, _QUAD_REL_FLOOR * np.abs(refined))
        ok = np.abs(refined - whole) <= allowed
        pieces.append(float(np.sum(refined[ok] + (refined[ok] - whole[ok]) / 15.0)))
        if ok.all():
            logger.debug("adaptive Simpson converged after %d levels", level + 1)
            return float(np.sum(pieces))
        k = ~ok
        a, m, b = np.concatenate([a[k], m[k]]), np.concatenate([lm[k], rm[k]]), np.concatenate([m[k], b[k]])
        fa, fm, fb = np.concatenate([fa[k], fm[k]]), np.concatenate([flm[k], frm[k]]), np.concatenate([fm[k], fb[k]])
        whole = np.concatenate([left[k], right[k]])
    raise QuadratureError(f"adaptive Simpson did not converge after {_QUAD_MAX_LEVELS} levels")


def moment_integral(
    signal: PerturbationSignal,
    p: float,
    t0: float,
    T: float,
    *,
    derivative: bool = False,
    weight: TimeMap | None = None,
    abs_tol: float = _QUAD_ABS_TOL,
) -> float:
    """Integral of t^p ||e(t)|| (or ||e'(t)||) over [t0, T].

    A ``weight`` callable replaces t^p when given.
    """
    if t0 < signal.t_min:
        raise DomainError(f"moment integral starts at {t0} < t_min={signal.t_min}")
    if not T > t0:
        raise DomainError(f"moment integral needs T > t0, got [{t0}, {T}]")
    if p < 0:
        raise DomainError(f"moment order must be >= 0, got {p}")
    source = signal.eval_derivative if derivative else signal.eval

    def integrand(t: np.ndarray) -> np.ndarray:
        scale = t**p if weight is None else weight(t)
        return scale * np.linalg.norm(source(t), axis=-1)

    if signal.breakpoints is not None:
        inner = signal.breakpoints(t0, T, derivative)
    else:
        inner = np.linspace(t0, T, int(np.ceil(T - t0)) + 1)[1:-1]
    edges = np.concatenate([[t0], inner, [T]])
    return _adaptive_simpson(integrand, edges, abs_tol)


def classify_integrability(
    signal: PerturbationSignal,
    p: float,
    *,
    derivative: bool = False,
    weight: TimeMap | None = None,
) -> Integrability:
    """Decide whether the p-th moment of ||e|| (or ||e'||) is finite.

    Compares the increments over [1e2, 1e3] and [1e3, 1e4]: a shrinking
    geometric tail (ratio <= 0.9) or a negligible last increment means
    "converged", a non-shrinking increment means "diverging".
    """
    lo, mid, hi = CLASSIFY_HORIZONS
    first = moment_integral(signal, p, lo, mid, derivative=derivative, weight=weight)
    second = moment_integral(signal, p, mid, hi, derivative=derivative, weight=weight)
    if second <= 1e-6 or second <= _CONVERGED_RATIO * first:
        verdict: Integrability = "converged"
    elif second >= first:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    logger.debug("moment p=%s derivative=%s increments %.3e, %.3e -> %s", p, derivative, first, second, verdict)
    return verdict
