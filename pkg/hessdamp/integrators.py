"""Time steppers: an adaptive Dormand-Prince 5(4) pair, a fixed-step RK4
reference, and proximal splitting schemes for the differential inclusions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize as sp_optimize

from hessdamp import dynamics as dyn
from hessdamp import objectives as objs
from hessdamp.dynamics import SystemKind, SystemSpec, Trajectory
from hessdamp.errors import DomainError, IntegrationError
from hessdamp.objectives import Objective
from hessdamp.perturbations import PerturbationSignal

logger = logging.getLogger(__name__)

Rhs = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT
# Continuous extension of the pair (fourth order).
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_PI_ALPHA = 0.17
_PI_BETA = 0.04


@dataclass(frozen=True, eq=False)
class IntegratorConfig:
    """Step control for ``integrate_rk``; ``output_times=None`` keeps every accepted step."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 0.1
    output_times: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise DomainError(f"need 0 < h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {self.h_max}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("integrator tolerances must be positive")
        if self.output_times is not None:
            object.__setattr__(self, "output_times", np.asarray(self.output_times, dtype=float))


@dataclass(frozen=True, eq=False)
class OdeSolution:
    times: np.ndarray
    states: np.ndarray
    n_steps: int
    n_rejected: int = 0


def _check_output(t0: float, T: float, output_times: np.ndarray | None) -> np.ndarray | None:
    if output_times is None:
        return None
    if output_times.size == 0 or np.any(np.diff(output_times) <= 0):
        raise DomainError("output times must be non-empty and strictly increasing")
    if output_times[0] < t0 - 1e-12 or output_times[-1] > T + 1e-9 * max(1.0, abs(T)):
        raise DomainError(f"output times must lie in [{t0}, {T}]")
    return output_times


def integrate_rk(rhs: Rhs, t_span: tuple[float, float], init: Any, cfg: IntegratorConfig | None = None) -> OdeSolution:
    """Adaptive Dormand-Prince 5(4) integration with PI step control.

    The local error estimate of each step is measured in the RMS norm scaled
    by ``abs_tol + rel_tol * |state|``. Requested output times are filled by
    the pair's continuous extension.
    """
    cfg = cfg or IntegratorConfig()
    t0, T = float(t_span[0]), float(t_span[1])
    if not T > t0:
        raise DomainError(f"empty integration span [{t0}, {T}]")
    y = np.asarray(init, dtype=float).copy()
    out_t = _check_output(t0, T, cfg.output_times)

    out_states: list[np.ndarray] = []
    step_times: list[float] = [t0]
    step_states: list[np.ndarray] = [y.copy()]
    pos = 0
    if out_t is not None:
        while pos < out_t.size and out_t[pos] <= t0:
            out_states.append(y.copy())
            pos += 1

    k = np.empty((7, y.size))
    k[0] = rhs(t0, y)
    t = t0
    h = min(cfg.h_init, T - t0)
    err_prev = 1e-4
    n_steps = n_rejected = 0
    rejected = False

    while t < T:
        if h < cfg.h_min:
            raise IntegrationError(f"step size underflow ({h:.3e} < {cfg.h_min:.3e}) at t={t:.6g}", t=t)
        if t + h > T or T - (t + h) < 1e-12 * max(1.0, abs(T)):
            h = T - t

        for i in range(1, 6):
            k[i] = rhs(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
        y_new = y + h * (_A[6] @ k[:6])
        finite = np.all(np.isfinite(y_new))
        if finite:
            k[6] = rhs(t + h, y_new)
            finite = np.all(np.isfinite(k[6]))

        if finite:
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((h * (_E @ k) / scale) ** 2)))
        else:
            err = np.inf

        if err <= 1.0:
            t_new = T if h >= T - t else t + h
            if out_t is not None and pos < out_t.size and out_t[pos] <= t_new + 1e-12:
                stop = np.searchsorted(out_t, t_new + 1e-12 * max(1.0, abs(t_new)), side="right")
                theta = ((out_t[pos:stop] - t) / h)[:, None]
                diff = y_new - y
                bspl = h * k[0] - diff
                r4 = diff - h * k[6] - bspl
                r5 = h * (_D @ k)
                th1 = 1.0 - theta
                dense = y + theta * (diff + th1 * (bspl + theta * (r4 + th1 * r5)))
                out_states.extend(dense)
                pos = stop
            t, y = t_new, y_new
            k[0] = k[6]
            n_steps += 1
            if out_t is None:
                step_times.append(t)
                step_states.append(y.copy())
            factor = _SAFETY * max(err, 1e-10) ** -_PI_ALPHA * err_prev**_PI_BETA
            factor = min(_FAC_MAX, max(_FAC_MIN, factor))
            if rejected:
                factor = min(1.0, factor)
            h = min(cfg.h_max, h * factor)
            err_prev = max(err, 1e-4)
            rejected = False
        else:
            n_rejected += 1
            factor = _FAC_MIN if not np.isfinite(err) else max(_FAC_MIN, _SAFETY * err**-0.2)
            h *= factor
            rejected = True
            logger.debug("rejected step at t=%.6g (err=%.3e), retrying with h=%.3e", t, err, h)

    if out_t is not None:
        if pos < out_t.size:
            out_states.extend([y.copy()] * (out_t.size - pos))
        return OdeSolution(out_t.copy(), np.array(out_states), n_steps, n_rejected)
    return OdeSolution(np.array(step_times), np.array(step_states), n_steps, n_rejected)


def integrate_fixed(
    rhs: Rhs,
    t_span: tuple[float, float],
    init: Any,
    h: float,
    output_times: np.ndarray | None = None,
) -> OdeSolution:
    """Classical RK4 with constant step; outputs by cubic Hermite interpolation."""
    t0, T = float(t_span[0]), float(t_span[1])
    n = int(np.ceil((T - t0) / h - 1e-9))
    h = (T - t0) / n
    y = np.asarray(init, dtype=float).copy()
    out_t = _check_output(t0, T, None if output_times is None else np.asarray(output_times, dtype=float))
    grid = t0 + h * np.arange(n + 1)
    grid[-1] = T

    states = [y.copy()]
    out_states: list[np.ndarray] = []
    pos = 0
    f0 = rhs(t0, y)
    if out_t is not None:
        while pos < out_t.size and out_t[pos] <= t0:
            out_states.append(y.copy())
            pos += 1
    for i in range(n):
        t = grid[i]
        k1 = f0
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        f1 = rhs(grid[i + 1], y_new)
        if out_t is not None:
            stop = np.searchsorted(out_t, grid[i + 1] + 1e-12, side="right")
            if stop > pos:
                s = ((out_t[pos:stop] - t) / h)[:, None]
                h00 = 2 * s**3 - 3 * s**2 + 1
                h10 = s**3 - 2 * s**2 + s
                h01 = -2 * s**3 + 3 * s**2
                h11 = s**3 - s**2
                out_states.extend(h00 * y + h10 * h * f0 + h01 * y_new + h11 * h * f1)
                pos = stop
        else:
            states.append(y_new.copy())
        y, f0 = y_new, f1
    if out_t is not None:
        return OdeSolution(out_t.copy(), np.array(out_states), n)
    return OdeSolution(grid, np.array(states), n)


# ---------------------------------------------------------------------------
# Proximal schemes for the inclusions
# ---------------------------------------------------------------------------


def _uniform_grid(t_span: tuple[float, float], h: float) -> np.ndarray:
    t0, T = float(t_span[0]), float(t_span[1])
    if not h > 0:
        raise DomainError(f"step must be positive, got {h}")
    if not T > t0:
        raise DomainError(f"empty integration span [{t0}, {T}]")
    n = int(np.ceil((T - t0) / h - 1e-9))
    grid = t0 + (T - t0) / n * np.arange(n + 1)
    grid[-1] = T
    return grid


def integrate_prox_explicit(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t_span: tuple[float, float],
    init: tuple[Any, Any],
    h: float = 1e-3,
) -> Trajectory:
    """Forward-backward splitting of the explicit inclusion.

    The subgradient term is taken backward through prox_{beta h f}, the
    affine drift forward. The recovered ``xi[k+1]`` lies in the
    subdifferential at ``x[k+1]``.
    """
    if spec.kind is not SystemKind.ISEHD_INCLUSION:
        raise DomainError(f"explicit prox scheme integrates ISEHD_INCLUSION, got {spec.kind}")
    if spec.beta <= 0:
        raise DomainError("ISEHD_INCLUSION needs beta > 0")
    times = _uniform_grid(t_span, h)
    steps = np.diff(times)
    alpha, beta = spec.alpha, spec.beta
    e_all = signal.eval(times)
    x = np.asarray(init[0], dtype=float).copy()
    y = np.asarray(init[1], dtype=float).copy()

    xs = np.empty((times.size, x.size))
    ys = np.empty_like(xs)
    xis = np.empty_like(xs)
    xs[0], ys[0], xis[0] = x, y, objs.subgradient(obj, x)
    logger.info("prox-explicit %s on [%g, %g] with %d steps", obj.name, times[0], times[-1], steps.size)
    for k, hk in enumerate(steps):
        t = times[k]
        pre = x + hk * ((1.0 / beta - alpha / t) * x - y / beta - beta * e_all[k])
        x_new = obj.prox(pre, beta * hk)
        y = y + hk * ((1.0 / beta - alpha / t + alpha * beta / t**2) * x - y / beta)
        xis[k + 1] = (pre - x_new) / (beta * hk)
        x = x_new
        xs[k + 1], ys[k + 1] = x, y
    return dyn.make_trajectory(spec, obj, signal, "inclusion", times, xs, ys, xi=xis)


def _implicit_prox_march(
    obj: Objective,
    alpha: float,
    taus: np.ndarray,
    hs: float,
    beta_vals: np.ndarray,
    beta_dots: np.ndarray,
    e_all: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step W' + dG(W) + D(tau, W)/beta(tau) in the rescaled time s.

    With beta constant this is the plain implicit scheme in t with step
    h = hs / gamma.
    """
    xs = np.empty((taus.size, x.size))
    ys = np.empty_like(xs)
    xis = np.empty_like(xs)
    xs[0], ys[0], xis[0] = x, y, objs.subgradient(obj, y)
    for k in range(taus.size - 1):
        b, tau = beta_vals[k], taus[k]
        coupling = (1.0 - alpha * b / tau + beta_dots[k]) / b**2
        arg = y - hs * (e_all[k] + coupling * (x - y))
        y_new = obj.prox(arg, hs)
        x = x + hs * (y - x) / b**2
        xis[k + 1] = (arg - y_new) / hs
        y = y_new
        xs[k + 1], ys[k + 1] = x, y
    return xs, ys, xis


def integrate_prox_implicit(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t_span: tuple[float, float],
    init: tuple[Any, Any],
    h: float = 1e-3,
) -> Trajectory:
    """Implicit inclusion with constant beta(t) = gamma.

    The y-step is backward in the subdifferential, the x-step forward.
    ``xi[k+1]`` is the subgradient at ``y[k+1]``.
    """
    if spec.kind is not SystemKind.ISIHD_INCLUSION:
        raise DomainError(f"implicit prox scheme integrates ISIHD_INCLUSION, got {spec.kind}")
    if spec.gamma <= 0:
        raise DomainError("ISIHD_INCLUSION needs gamma > 0")
    if spec.beta != 0:
        raise DomainError("time-varying beta(t) is not supported here; use integrate_prox_rescaled")
    gamma = spec.gamma
    times = _uniform_grid(t_span, h)
    step = times[1] - times[0]
    logger.info("prox-implicit %s on [%g, %g] with %d steps", obj.name, times[0], times[-1], times.size - 1)
    xs, ys, xis = _implicit_prox_march(
        obj,
        spec.alpha,
        times,
        gamma * step,
        np.full(times.size, gamma),
        np.zeros(times.size),
        signal.eval(times),
        np.asarray(init[0], dtype=float).copy(),
        np.asarray(init[1], dtype=float).copy(),
    )
    return dyn.make_trajectory(spec, obj, signal, "inclusion", times, xs, ys, xi=xis)


@dataclass(frozen=True, eq=False)
class TimeRescaling:
    """Change of time t = tau(s) with beta(tau(s)) tau'(s) = 1.

    ``p(t)`` is the integral of beta from t0 to t and ``tau`` its inverse.
    """

    beta: Callable[[np.ndarray], np.ndarray]
    t0: float
    tol: float = 1e-10

    def p(self, t: float) -> float:
        if t == self.t0:
            return 0.0
        value, _ = sp_integrate.quad(
            lambda r: float(self.beta(np.array([r]))[0]), self.t0, t, epsabs=1e-13, epsrel=1e-13
        )
        return value

    def tau(self, s: float) -> float:
        if s == 0:
            return self.t0
        if s < 0:
            raise DomainError(f"rescaled time must be >= 0, got {s}")
        hi = self.t0 + 1.0
        while self.p(hi) < s:
            hi = self.t0 + 2.0 * (hi - self.t0)
        return float(sp_optimize.brentq(lambda t: self.p(t) - s, self.t0, hi, xtol=self.tol, rtol=4e-16))

    def tau_grid(self, s_values: Any) -> np.ndarray:
        """tau on an increasing grid starting at s = 0, by marching Newton."""
        s_values = np.asarray(s_values, dtype=float)
        if s_values[0] != 0:
            raise DomainError("tau_grid expects the grid to start at s = 0")
        nodes, weights = np.polynomial.legendre.leggauss(8)

        def piece(a: float, b: float) -> float:
            half, mid = 0.5 * (b - a), 0.5 * (b + a)
            return half * float(weights @ self.beta(mid + half * nodes))

        out = np.empty_like(s_values)
        out[0] = self.t0
        tau_prev, p_prev = self.t0, 0.0
        for i in range(1, s_values.size):
            target = s_values[i]
            tau = tau_prev + (target - p_prev) / float(self.beta(np.array([tau_prev]))[0])
            for _ in range(50):
                residual = p_prev + piece(tau_prev, tau) - target
                if abs(residual) <= self.tol:
                    break
                tau -= residual / float(self.beta(np.array([tau]))[0])
            else:
                raise DomainError(f"time rescaling did not converge at s={target}")
            p_prev += piece(tau_prev, tau)
            tau_prev = tau
            out[i] = tau
        return out


def time_rescale(
    beta: Callable[[np.ndarray], np.ndarray],
    t0: float,
    horizon: float | None = None,
) -> TimeRescaling:
    """Build the rescaling s -> tau(s); beta must stay positive on [t0, horizon]."""
    if horizon is not None:
        samples = np.linspace(t0, horizon, 1001)
        values = beta(samples)
        if np.any(values <= 0):
            raise DomainError(f"beta(t) <= 0 at t={samples[np.argmax(values <= 0)]:.6g}")
    elif float(beta(np.array([t0]))[0]) <= 0:
        raise DomainError("beta(t0) <= 0")
    return TimeRescaling(beta=beta, t0=float(t0))


def integrate_prox_rescaled(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t_span: tuple[float, float],
    init: tuple[Any, Any],
    h: float = 1e-3,
) -> Trajectory:
    """Implicit inclusion with beta(t) = gamma + beta/t via the time rescaling.

    The scheme runs with a constant step in s, ``hs = h * min beta``, so no
    step in t exceeds ``h``; samples are reported at t = tau(s_k).
    """
    if spec.kind is not SystemKind.ISIHD_INCLUSION:
        raise DomainError(f"rescaled prox scheme integrates ISIHD_INCLUSION, got {spec.kind}")
    t0, T = float(t_span[0]), float(t_span[1])

    def beta_fn(t: np.ndarray) -> np.ndarray:
        return spec.gamma + spec.beta / t

    rescaling = time_rescale(beta_fn, t0, T)
    s_max = rescaling.p(T)
    beta_min = float(np.min(beta_fn(np.array([t0, T]))))
    s_grid = _uniform_grid((0.0, s_max), h * beta_min)
    taus = rescaling.tau_grid(s_grid)
    taus[-1] = T
    hs = s_grid[1] - s_grid[0]
    beta_vals, beta_dots = dyn.beta_schedule(spec, taus)
    logger.info("prox-rescaled %s on [%g, %g] with %d steps in s", obj.name, t0, T, s_grid.size - 1)
    xs, ys, xis = _implicit_prox_march(
        obj,
        spec.alpha,
        taus,
        hs,
        beta_vals,
        beta_dots,
        signal.eval(taus),
        np.asarray(init[0], dtype=float).copy(),
        np.asarray(init[1], dtype=float).copy(),
    )
    return dyn.make_trajectory(spec, obj, signal, "inclusion", taus, xs, ys, xi=xis)


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


def integrate_system(
    spec: SystemSpec,
    obj: Objective,
    signal: PerturbationSignal,
    t_span: tuple[float, float],
    x0: Any,
    v0: Any = None,
    *,
    y0: Any = None,
    cfg: IntegratorConfig | None = None,
    h: float = 1e-3,
    form: str = "auto",
) -> Trajectory:
    """Integrate any system kind from (x0, v0) or (x0, y0).

    ``form="auto"`` uses the direct second-order equations when they are
    available and falls back to the first-order reformulation (ISEHD only)
    when the objective has no Hessian or the signal derivative is numeric.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (obj.dimension,):
        raise DomainError(f"x0 has shape {x0.shape}, objective dimension is {obj.dimension}")
    if v0 is None and y0 is None:
        v0 = np.zeros_like(x0)
    kind = spec.kind

    if kind in dyn.INCLUSION_KINDS:
        spec.validate(obj)
        if y0 is None:
            x0, y0 = dyn.lift_initial(spec, obj, signal, x0, v0)
        init = (x0, np.asarray(y0, dtype=float))
        if kind is SystemKind.ISEHD_INCLUSION:
            traj = integrate_prox_explicit(spec, obj, signal, t_span, init, h)
        elif spec.beta == 0:
            traj = integrate_prox_implicit(spec, obj, signal, t_span, init, h)
        else:
            traj = integrate_prox_rescaled(spec, obj, signal, t_span, init, h)
        if cfg.output_times is not None:
            traj = traj.resample(cfg.output_times)
        return traj

    if form == "auto":
        if y0 is not None:
            form = "first-order"
        elif kind is SystemKind.ISEHD and (obj.hessian_vector is None or signal.derivative_is_numeric):
            form = "first-order"
        else:
            form = "second-order"
    if form not in ("first-order", "second-order"):
        raise DomainError(f"unknown form {form!r}")
    spec.validate(obj, first_order=form == "first-order")
    n = obj.dimension

    if form == "second-order":
        if v0 is None:
            raise DomainError("second-order integration needs v0")
        state0 = np.concatenate([x0, np.asarray(v0, dtype=float)])
        step = dyn.second_order_rhs
    else:
        if y0 is None:
            x0, y0 = dyn.lift_initial(spec, obj, signal, x0, v0)
        state0 = np.concatenate([x0, np.asarray(y0, dtype=float)])
        step = dyn.first_order_rhs

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        a, b = step(spec, obj, signal, t, state[:n], state[n:])
        return np.concatenate([a, b])

    logger.info("integrating %s (%s form) on [%g, %g]", kind, form, t_span[0], t_span[1])
    sol = integrate_rk(rhs, t_span, state0, cfg)
    logger.info("%s done: %d accepted steps, %d rejected", kind, sol.n_steps, sol.n_rejected)
    return dyn.make_trajectory(spec, obj, signal, form, sol.times, sol.states[:, :n], sol.states[:, n:])
