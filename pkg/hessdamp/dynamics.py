"""Right-hand sides of the damped inertial systems and their first-order forms.

Second-order kinds act on the state (x, v = x'); first-order kinds act on the
pair (x, y) where y is the auxiliary variable that removes the Hessian (ISEHD)
or the extrapolated gradient argument (ISIHD) from the equations.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from hessdamp import objectives as objs
from hessdamp.errors import DomainError, HessianUnavailableError, HypothesisWarning
from hessdamp.objectives import Objective
from hessdamp.perturbations import PerturbationSignal

logger = logging.getLogger(__name__)


try:
    _StrEnum = enum.StrEnum
except AttributeError:  # Python < 3.11

    class _StrEnum(str, enum.Enum):
        __str__ = str.__str__
        __format__ = str.__format__


class SystemKind(_StrEnum):
    ISEHD = "ISEHD"
    ISIHD = "ISIHD"
    HB_EXPLICIT = "HB_EXPLICIT"
    HB_IMPLICIT = "HB_IMPLICIT"
    ISEHD_INCLUSION = "ISEHD_INCLUSION"
    ISIHD_INCLUSION = "ISIHD_INCLUSION"


EXPLICIT_KINDS = (SystemKind.ISEHD, SystemKind.ISEHD_INCLUSION)
IMPLICIT_KINDS = (SystemKind.ISIHD, SystemKind.ISIHD_INCLUSION)
HEAVY_BALL_KINDS = (SystemKind.HB_EXPLICIT, SystemKind.HB_IMPLICIT)
INCLUSION_KINDS = (SystemKind.ISEHD_INCLUSION, SystemKind.ISIHD_INCLUSION)


@dataclass(frozen=True)
class SystemSpec:
    """Dynamics variant plus its parameters (alpha, beta, gamma, t0)."""

    kind: SystemKind
    alpha: float = 3.1
    beta: float = 1.0
    gamma: float = 0.0
    t0: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SystemKind(self.kind))
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise DomainError(f"{self.kind}: {name} must be >= 0, got {getattr(self, name)}")
        if not self.t0 > 0:
            raise DomainError(f"{self.kind}: t0 must be > 0, got {self.t0}")

    def validate(self, obj: Objective, *, first_order: bool = False) -> None:
        """Check the kind's standing hypotheses against ``obj``.

        The HB damping threshold only warns, so runs outside the
        strongly convex theory remain possible.
        """
        if self.kind in EXPLICIT_KINDS and (first_order or self.kind is SystemKind.ISEHD_INCLUSION):
            if self.beta <= 0:
                raise DomainError(f"{self.kind}: the first-order form divides by beta, beta must be > 0")
        if self.kind in IMPLICIT_KINDS and self.gamma <= 0 and self.beta <= 0:
            raise DomainError(f"{self.kind}: beta(t) = gamma + beta/t must stay positive, got gamma=beta=0")
        if self.kind in HEAVY_BALL_KINDS:
            if obj.mu <= 0:
                raise DomainError(f"{self.kind}: requires a strongly convex objective (mu > 0)")
            threshold = 1.0 / (2.0 * np.sqrt(obj.mu))
            if self.beta > threshold:
                message = f"{self.kind}: beta={self.beta} exceeds 1/(2 sqrt(mu))={threshold:.6g}"
                logger.warning(message)
                warnings.warn(message, HypothesisWarning, stacklevel=2)


def beta_schedule(spec: SystemSpec, t: Any) -> tuple[Any, Any]:
    """beta(t) = gamma + beta/t and its derivative -beta/t^2."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError(f"beta schedule needs t > 0, got {np.min(t)}")
    beta_t = spec.gamma + spec.beta / t
    beta_dot = -spec.beta / t**2
    if beta_t.ndim == 0:
        return float(beta_t), float(beta_dot)
    return beta_t, beta_dot


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled trajectory with diagnostics.

    ``companion`` holds x' for second-order runs and y for first-order and
    inclusion runs; ``velocity`` always holds x'. For inclusion runs
    ``xi[k]`` is the subgradient recovered by the prox step that produced
    ``x[k]`` (``xi[0]`` is the minimal-norm subgradient at ``x[0]``).
    """

    kind: SystemKind
    form: str
    times: np.ndarray
    x: np.ndarray
    companion: np.ndarray
    velocity: np.ndarray
    grad_norm: np.ndarray
    xi: np.ndarray | None = None
    f_gap: np.ndarray | None = None
    dist: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.times.size
        if n == 0 or np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be non-empty and strictly increasing")
        for field in dataclasses.fields(self):
            arr = getattr(self, field.name)
            if isinstance(arr, np.ndarray) and arr.shape[0] != n:
                raise DomainError(f"trajectory field {field.name} has {arr.shape[0]} samples, expected {n}")

    @property
    def companion_kind(self) -> str:
        return "velocity" if self.form == "second-order" else "auxiliary"

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def _map(self, fn) -> Trajectory:
        changes = {}
        for field in dataclasses.fields(self):
            arr = getattr(self, field.name)
            if isinstance(arr, np.ndarray):
                changes[field.name] = fn(field.name, arr)
        return dataclasses.replace(self, **changes)

    def until(self, t_end: float) -> Trajectory:
        """Samples with ``times <= t_end``."""
        keep = self.times <= t_end + 1e-12 * max(1.0, abs(t_end))
        return self._map(lambda _, arr: arr[keep])

    def resample(self, times: Any) -> Trajectory:
        """Linear interpolation of every per-sample array onto ``times``."""
        times = np.asarray(times, dtype=float)

        def interp(name: str, arr: np.ndarray) -> np.ndarray:
            if name == "times":
                return times
            if arr.ndim == 1:
                return np.interp(times, self.times, arr)
            return np.column_stack([np.interp(times, self.times, arr[:, j]) for j in range(arr.shape[1])])

        return self._map(interp)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def _require_hessian(spec: SystemSpec, obj: Objective) -> None:
    if obj.hessian_vector is None:
        raise HessianUnavailableError(f"{spec.kind} second-order form needs the Hessian of {obj.name!r}")


def second_order_rhs(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t: float,
    x: np.ndarray,
    v: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """(x', v') for the four second-order kinds."""
    e = signal.eval(t)
    kind = spec.kind
    if kind is SystemKind.ISEHD:
        _require_hessian(spec, obj)
        dv = (
            -(spec.alpha / t) * v
            - spec.beta * (obj.hessian_vector(x, v) + signal.eval_derivative(t))
            - obj.smooth_gradient(x)
            - e
        )
    elif kind is SystemKind.ISIHD:
        beta_t, _ = beta_schedule(spec, t)
        dv = -(spec.alpha / t) * v - obj.smooth_gradient(x + beta_t * v) - e
    elif kind is SystemKind.HB_EXPLICIT:
        _require_hessian(spec, obj)
        damping = 2.0 * np.sqrt(obj.mu)
        dv = (
            -damping * v
            - spec.beta * obj.hessian_vector(x, v)
            - spec.beta * signal.eval_derivative(t)
            - obj.smooth_gradient(x)
            - e
        )
    elif kind is SystemKind.HB_IMPLICIT:
        dv = -2.0 * np.sqrt(obj.mu) * v - obj.smooth_gradient(x + spec.beta * v) - e
    else:
        raise DomainError(f"{kind} has no second-order form; integrate it as an inclusion")
    return v, dv


def first_order_rhs(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t: float,
    x: np.ndarray,
    y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """(x', y') of the Hessian-free first-order reformulations."""
    e = signal.eval(t)
    alpha = spec.alpha
    if spec.kind in EXPLICIT_KINDS:
        beta = spec.beta
        if beta <= 0:
            raise DomainError(f"{spec.kind}: first-order form needs beta > 0")
        dx = -beta * (obj.smooth_gradient(x) + e) + (1.0 / beta - alpha / t) * x - y / beta
        dy = (1.0 / beta - alpha / t + alpha * beta / t**2) * x - y / beta
        return dx, dy
    if spec.kind in IMPLICIT_KINDS:
        beta_t, beta_dot = beta_schedule(spec, t)
        if beta_t <= 0:
            raise DomainError(f"{spec.kind}: beta(t) = {beta_t} at t={t}")
        dx = (y - x) / beta_t
        dy = -beta_t * (obj.smooth_gradient(y) + e) - (1.0 / beta_t) * (1.0 - alpha * beta_t / t + beta_dot) * (x - y)
        return dx, dy
    raise DomainError(f"{spec.kind} has no first-order reformulation")


def lift_initial(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    x0: Any,
    v0: Any,
) -> tuple[np.ndarray, np.ndarray]:
    """Map second-order initial data (x0, v0) to the first-order pair (x0, y0)."""
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    t0 = spec.t0
    if spec.kind in EXPLICIT_KINDS:
        beta = spec.beta
        if beta <= 0:
            raise DomainError(f"{spec.kind}: lifting divides by beta, beta must be > 0")
        grad = objs.subgradient(obj, x0)
        y0 = -beta * (v0 + beta * grad) + (1.0 - beta * spec.alpha / t0) * x0 - beta**2 * signal.eval(t0)
        return x0, y0
    if spec.kind in IMPLICIT_KINDS:
        beta_t, _ = beta_schedule(spec, t0)
        if beta_t <= 0:
            raise DomainError(f"{spec.kind}: beta(t0) = {beta_t}")
        return x0, x0 + beta_t * v0
    raise DomainError(f"{spec.kind} has no first-order reformulation")


# ---------------------------------------------------------------------------
# Trajectory assembly
# ---------------------------------------------------------------------------


def _velocities(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    form: str,
    times: np.ndarray,
    x: np.ndarray,
    companion: np.ndarray,
    xi: np.ndarray | None,
) -> np.ndarray:
    if form == "second-order":
        return companion
    t = times[:, None]
    if spec.kind in EXPLICIT_KINDS:
        beta = spec.beta
        drift = -beta * signal.eval(times) + (1.0 / beta - spec.alpha / t) * x - companion / beta
        grad = xi if xi is not None else obj.smooth_gradient(x)
        return drift - beta * grad
    beta_t, _ = beta_schedule(spec, times)
    return (companion - x) / beta_t[:, None]


def make_trajectory(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    form: str,
    times: np.ndarray,
    x: np.ndarray,
    companion: np.ndarray,
    xi: np.ndarray | None = None,
) -> Trajectory:
    """Assemble a Trajectory and fill in velocity, gap, gradient norm and distance."""
    times = np.asarray(times, dtype=float)
    velocity = _velocities(spec, obj, signal, form, times, x, companion, xi)
    grad = xi if xi is not None else obj.smooth_gradient(x)
    f_gap = None
    if obj.known_min_value is not None:
        f_gap = objs.value(obj, x) - obj.known_min_value
    dist = None
    if obj.known_minimizer is not None:
        dist = np.linalg.norm(x - obj.known_minimizer, axis=1)
    return Trajectory(
        kind=spec.kind,
        form=form,
        times=times,
        x=x,
        companion=companion,
        velocity=velocity,
        grad_norm=np.linalg.norm(grad, axis=1),
        xi=xi,
        f_gap=f_gap,
        dist=dist,
    )


def u_dot(traj: Trajectory, spec: SystemSpec, obj: Objective, signal: PerturbationSignal) -> np.ndarray:
    """u' = x' + beta xi along an explicit-system trajectory.

    For first-order and inclusion runs u' is the closed expression
    -beta e + (1/beta - alpha/t) x - y/beta, which needs no subgradient.
    """
    if traj.form != "second-order" and spec.kind in EXPLICIT_KINDS:
        t = traj.times[:, None]
        beta = spec.beta
        return -beta * signal.eval(traj.times) + (1.0 / beta - spec.alpha / t) * traj.x - traj.companion / beta
    grad = traj.xi if traj.xi is not None else obj.smooth_gradient(traj.x)
    return traj.velocity + spec.beta * grad


def second_order_residual(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    traj: Trajectory,
    *,
    t_from: float | None = None,
) -> float:
    """Max norm of the second-order equation evaluated by central differences.

    ``traj`` must be sampled on a uniform grid. ``t_from`` excludes an initial
    boundary layer from the maximum.
    """
    times = traj.times
    if times.size < 3:
        raise DomainError("second-order residual needs at least 3 samples")
    steps = np.diff(times)
    h = steps.mean()
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, h):
        raise DomainError("second-order residual needs a uniform sample grid")

    x = traj.x
    xd = (x[2:] - x[:-2]) / (2.0 * h)
    xdd = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h**2
    t = times[1:-1]
    tc = t[:, None]
    xm = x[1:-1]
    e = signal.eval(t)
    kind = spec.kind

    if kind in EXPLICIT_KINDS or kind is SystemKind.HB_EXPLICIT:
        g_all = obj.smooth_gradient(x) + signal.eval(times)
        g_dot = (g_all[2:] - g_all[:-2]) / (2.0 * h)
        damping = spec.alpha / tc if kind in EXPLICIT_KINDS else 2.0 * np.sqrt(obj.mu)
        res = xdd + damping * xd + spec.beta * g_dot + g_all[1:-1]
    elif kind in IMPLICIT_KINDS:
        beta_t, _ = beta_schedule(spec, t)
        res = xdd + (spec.alpha / tc) * xd + obj.smooth_gradient(xm + beta_t[:, None] * xd) + e
    else:
        res = xdd + 2.0 * np.sqrt(obj.mu) * xd + obj.smooth_gradient(xm + spec.beta * xd) + e

    norms = np.linalg.norm(res, axis=1)
    if t_from is not None:
        norms = norms[t >= t_from]
    return float(norms.max()) if norms.size else 0.0
