"""Lyapunov energies evaluated along sampled trajectories.

Every energy is a pointwise part minus a tail integral of its error
coupling over [t, T], T being the trajectory horizon. Tail integrals use the
trapezoid rule backward from T on the trajectory's own sample grid, so
truncating a trajectory at a grid point T' shifts every earlier value by the
integral over [T', T] and nothing else.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np

from hessdamp import dynamics as dyn
from hessdamp import objectives as objs
from hessdamp.dynamics import SystemSpec, Trajectory
from hessdamp.errors import DomainError, HypothesisError, PoleError
from hessdamp.objectives import Objective
from hessdamp.perturbations import Integrability, PerturbationSignal, classify_integrability, combine_g

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-6
# Relative distance to the pole of a(t) below which a sample counts as on the pole.
_POLE_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    name: str
    times: np.ndarray
    values: np.ndarray
    tail_integrals: np.ndarray
    t1: float
    violations: tuple[tuple[int, float], ...] = ()
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.times.size == self.values.size == self.tail_integrals.size):
            raise DomainError(f"energy {self.name}: times, values and tail integrals differ in length")

    @property
    def t1_index(self) -> int:
        return int(np.searchsorted(self.times, self.t1, side="left"))

    @property
    def reference_value(self) -> float:
        """Energy at the first sample with t >= t1."""
        i = min(self.t1_index, self.times.size - 1)
        return float(self.values[i])


def check_monotone(trace: EnergyTrace, rel_tol: float = DEFAULT_REL_TOL) -> list[tuple[int, float]]:
    """Indices beyond t1 where the energy increases by more than ``rel_tol`` times its t1 value."""
    start = trace.t1_index
    if start >= trace.times.size - 1:
        return []
    threshold = rel_tol * max(abs(float(trace.values[start])), 1e-30)
    increases = np.diff(trace.values[start:])
    bad = np.flatnonzero(increases > threshold)
    return [(int(start + i), float(increases[i])) for i in bad]


def _tail(times: np.ndarray, integrand: np.ndarray) -> np.ndarray:
    pieces = 0.5 * np.diff(times) * (integrand[1:] + integrand[:-1])
    tail = np.zeros_like(times)
    tail[:-1] = np.cumsum(pieces[::-1])[::-1]
    return tail


def _trace(
    name: str,
    times: np.ndarray,
    pointwise: np.ndarray,
    coupling: np.ndarray | None,
    t1: float,
    rel_tol: float,
    params: dict[str, Any],
) -> EnergyTrace:
    tail = np.zeros_like(times) if coupling is None else _tail(times, coupling)
    trace = EnergyTrace(name, times, pointwise - tail, tail, float(t1), params=params)
    violations = tuple(check_monotone(trace, rel_tol))
    if violations:
        logger.info("energy %s: %d monotonicity violations beyond t1=%.4g", name, len(violations), t1)
    return EnergyTrace(name, times, trace.values, tail, float(t1), violations, params)


def _fbar(obj: Objective) -> float:
    if obj.known_min_value is None:
        raise DomainError(f"minimum value of {obj.name!r} is unknown; polish or supply it first")
    return obj.known_min_value


def _xstar(obj: Objective, xstar: Any) -> np.ndarray:
    if xstar is None:
        xstar = obj.known_minimizer
    if xstar is None:
        raise DomainError(f"minimizer of {obj.name!r} is unknown; pass xstar")
    return np.asarray(xstar, dtype=float)


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def _sq(a: np.ndarray) -> np.ndarray:
    return _rowdot(a, a)


def _u_dot(traj: Trajectory, obj: Objective, signal: PerturbationSignal, alpha: float, beta: float) -> np.ndarray:
    spec = SystemSpec(traj.kind, alpha=alpha, beta=beta, t0=float(traj.times[0]))
    return dyn.u_dot(traj, spec, obj, signal)


# ---------------------------------------------------------------------------
# Explicit-system energies
# ---------------------------------------------------------------------------


def energy_W(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    beta: float,
    *,
    alpha: float,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """W(t) = |u'|^2/2 + f(x) - fbar - int_t^T <u', g>, u' = x' + beta xi."""
    t = traj.times
    ud = _u_dot(traj, obj, signal, alpha, beta)
    pointwise = 0.5 * _sq(ud) + objs.value(obj, traj.x) - _fbar(obj)
    coupling = _rowdot(ud, combine_g(signal, beta, t))
    t1 = max(t[0], 2.0 * alpha * beta)
    return _trace("W", t, pointwise, coupling, t1, rel_tol, {"alpha": alpha, "beta": beta})


def _require_fast_alpha(alpha: float) -> None:
    if not alpha > 3:
        raise HypothesisError("α > 3", f"got alpha={alpha}")


def energy_fast(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    alpha: float,
    beta: float,
    xstar: Any = None,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """Fast-rate energy with v = (alpha-1)(x-x*) + t u' and delta(t) = t^2 - beta t."""
    _require_fast_alpha(alpha)
    return _energy_eps_core("fast", traj, obj, signal, alpha, beta, 0.0, xstar, rel_tol)


def energy_eps(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    alpha: float,
    beta: float,
    eps: float | None = None,
    xstar: Any = None,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """Generalized fast energy; ``eps`` defaults to (alpha - 3)/2."""
    _require_fast_alpha(alpha)
    if eps is None:
        eps = (alpha - 3.0) / 2.0
    if not 0 < eps < alpha - 3:
        raise HypothesisError("0 < ε < α - 3", f"got eps={eps}, alpha={alpha}")
    return _energy_eps_core("eps", traj, obj, signal, alpha, beta, eps, xstar, rel_tol)


def _energy_eps_core(
    name: str,
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    alpha: float,
    beta: float,
    eps: float,
    xstar: Any,
    rel_tol: float,
) -> EnergyTrace:
    t = traj.times
    tc = t[:, None]
    xs = _xstar(obj, xstar)
    gap = objs.value(obj, traj.x) - objs.value(obj, xs)
    dx = traj.x - xs
    v = (alpha - 1.0 - eps) * dx + tc * _u_dot(traj, obj, signal, alpha, beta)
    delta = t**2 - beta * t
    pointwise = (delta + eps * beta * t) * gap + 0.5 * _sq(v) + 0.5 * eps * (alpha - 1.0 - eps) * _sq(dx)
    coupling = t * _rowdot(v, combine_g(signal, beta, t))
    t1 = max(t[0], beta * (alpha - 2.0 - eps) / (alpha - 3.0 - eps))
    return _trace(name, t, pointwise, coupling, t1, rel_tol, {"alpha": alpha, "beta": beta, "eps": eps})


def energy_lambda(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    alpha: float,
    beta: float,
    lam: float = 2.0,
    xstar: Any = None,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """Non-smooth energy with v = lam (x - x*) + t u', for lam in [2, alpha - 1]."""
    if not alpha >= 3:
        raise HypothesisError("α ≥ 3", f"got alpha={alpha}")
    if not 2.0 <= lam <= alpha - 1.0:
        raise HypothesisError("2 ≤ λ ≤ α - 1", f"got lambda={lam}, alpha={alpha}")
    t = traj.times
    tc = t[:, None]
    xs = _xstar(obj, xstar)
    dx = traj.x - xs
    v = lam * dx + tc * _u_dot(traj, obj, signal, alpha, beta)
    gap = objs.value(obj, traj.x) - _fbar(obj)
    pointwise = t * (t - beta * (lam + 2.0 - alpha)) * gap + 0.5 * _sq(v) + 0.5 * lam * (alpha - lam - 1.0) * _sq(dx)
    coupling = t * _rowdot(v, combine_g(signal, beta, t))
    t1 = max(t[0], beta)
    return _trace("lambda", t, pointwise, coupling, t1, rel_tol, {"alpha": alpha, "beta": beta, "lambda": lam})


# ---------------------------------------------------------------------------
# Strongly convex energies
# ---------------------------------------------------------------------------


def _sc_vector(traj: Trajectory, obj: Objective, beta: float, variant: str) -> np.ndarray:
    xs = _xstar(obj, None)
    base = np.sqrt(obj.mu) * (traj.x - xs) + traj.velocity
    if variant == "explicit":
        return base + beta * obj.smooth_gradient(traj.x)
    return base


def energy_sc(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    beta: float,
    variant: str = "explicit",
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """Heavy-ball energies; errors stay on the right-hand side, so no tail term."""
    if obj.mu <= 0:
        raise HypothesisError("μ > 0", f"objective {obj.name!r} is not strongly convex")
    if variant not in ("explicit", "implicit"):
        raise DomainError(f"unknown strongly convex variant {variant!r}")
    fbar = _fbar(obj)
    v = _sc_vector(traj, obj, beta, variant)
    point = traj.x if variant == "explicit" else traj.x + beta * traj.velocity
    pointwise = objs.value(obj, point) - fbar + 0.5 * _sq(v)
    return _trace(f"sc-{variant}", traj.times, pointwise, None, traj.times[0], rel_tol, {"beta": beta})


def sc_differential_rhs(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    beta: float,
    variant: str = "explicit",
) -> np.ndarray:
    """|v(t)| |g(t)| (|v(t)| |e(t)| for the implicit variant), the forcing side of the heavy-ball inequality."""
    v = _sc_vector(traj, obj, beta, variant)
    g = combine_g(signal, beta, traj.times) if variant == "explicit" else signal.eval(traj.times)
    return np.linalg.norm(v, axis=1) * np.linalg.norm(g, axis=1)


def finite_difference_derivative(trace: EnergyTrace) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences of the energy at interior samples."""
    t, e = trace.times, trace.values
    return t[1:-1], (e[2:] - e[:-2]) / (t[2:] - t[:-2])


def energy_derivative_check(
    trace: EnergyTrace,
    bound: np.ndarray | float = 0.0,
    tol: float = 0.0,
) -> tuple[bool, float]:
    """Check dE/dt <= bound + tol at interior samples beyond t1.

    ``bound`` may be an array over all samples; returns (holds, worst excess).
    """
    times, deriv = finite_difference_derivative(trace)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), trace.times.shape)[1:-1]
    keep = times >= trace.t1
    if not keep.any():
        return True, 0.0
    excess = deriv[keep] - bound[keep]
    worst = float(excess.max())
    return worst <= tol, worst


# ---------------------------------------------------------------------------
# Implicit system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImplicitCoefficients:
    """Coefficients (a, b, c, d) of the implicit-system Lyapunov function.

    b is constant, c(t) = t, d = b(alpha - 1 - b), and a(t) is the rational
    function that makes the equality condition hold identically:
    a(t) = t^2 (t^2 - b gamma t - b beta) / (t^2 - alpha gamma t - beta (alpha + 1)).
    """

    alpha: float
    b_const: float
    gamma: float
    beta: float

    @property
    def pole(self) -> float:
        """Largest real root of the denominator; a(t) is defined beyond it."""
        p = self.alpha * self.gamma
        return 0.5 * (p + np.sqrt(p * p + 4.0 * self.beta * (self.alpha + 1.0)))

    def _den(self, t: np.ndarray) -> np.ndarray:
        return t**2 - self.alpha * self.gamma * t - self.beta * (self.alpha + 1.0)

    def _num(self, t: np.ndarray) -> np.ndarray:
        return t**2 - self.b_const * self.gamma * t - self.b_const * self.beta

    def pole_free(self, t: Any) -> np.ndarray:
        """Samples where the denominator of a(t) is safely positive."""
        t = np.asarray(t, dtype=float)
        return self._den(t) > _POLE_MARGIN * t**2

    def _checked(self, t: Any) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not np.all(self.pole_free(t)):
            raise PoleError(f"a(t) denominator <= 0 for t <= {self.pole:.6g}")
        return t

    def _a(self, t: np.ndarray) -> np.ndarray:
        return t**2 * self._num(t) / self._den(t)

    def _a_dot(self, t: np.ndarray) -> np.ndarray:
        n, d = self._num(t), self._den(t)
        n1 = 2.0 * t - self.b_const * self.gamma
        d1 = 2.0 * t - self.alpha * self.gamma
        return (2.0 * t * n + t**2 * n1) / d - t**2 * n * d1 / d**2

    def a(self, t: Any) -> np.ndarray:
        return self._a(self._checked(t))

    def a_dot(self, t: Any) -> np.ndarray:
        return self._a_dot(self._checked(t))

    def b(self, t: Any) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.b_const)

    def b_dot(self, t: Any) -> np.ndarray:
        return np.zeros_like(np.asarray(t, dtype=float))

    def c(self, t: Any) -> np.ndarray:
        return np.asarray(t, dtype=float).copy()

    def c_dot(self, t: Any) -> np.ndarray:
        return np.ones_like(np.asarray(t, dtype=float))

    @property
    def d_const(self) -> float:
        return self.b_const * (self.alpha - 1.0 - self.b_const)

    def d(self, t: Any) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.d_const)

    def d_dot(self, t: Any) -> np.ndarray:
        return np.zeros_like(np.asarray(t, dtype=float))


def default_b(alpha: float) -> float:
    """(alpha + 1)/2, moved to the middle of ]2, alpha - 1[ when it falls outside."""
    b = 0.5 * (alpha + 1.0)
    if not 2.0 < b < alpha - 1.0:
        b = 0.5 * (2.0 + alpha - 1.0)
    return b


def implicit_coefficients(
    alpha: float,
    b: float | None = None,
    gamma: float = 1.0,
    beta: float = 1.0,
) -> ImplicitCoefficients:
    """Coefficient family with b in ]0, alpha - 1]."""
    if not alpha > 1:
        raise HypothesisError("α > 1", f"got alpha={alpha}")
    if b is None:
        b = default_b(alpha)
    if not 0 < b <= alpha - 1:
        raise HypothesisError("0 < b ≤ α - 1", f"got b={b}, alpha={alpha}")
    if gamma < 0 or beta < 0:
        raise DomainError("gamma and beta must be >= 0")
    return ImplicitCoefficients(float(alpha), float(b), float(gamma), float(beta))


CONDITION_LABELS = (
    "a' - b c <= 0",
    "-a beta(t) <= 0",
    "-a alpha(t) beta(t) + a beta'(t) + a - c^2 + b c beta(t) = 0",
    "b' b + d'/2 <= 0",
    "b' c + b (b + c' - c alpha(t)) + d = 0",
    "c (b + c' - c alpha(t)) <= 0",
)
_EQUALITY = (False, False, True, False, True, False)
_EQ_TOL = 1e-9
_INEQ_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConditionReport:
    t_grid: np.ndarray
    pole_free: np.ndarray
    values: np.ndarray  # (6, m); nan where a(t) is undefined
    holds: np.ndarray  # (6, m)
    equality_residual: float

    @property
    def all_hold(self) -> np.ndarray:
        return self.holds.all(axis=0)


def condition_values(
    coeffs: ImplicitCoefficients, alpha: float, gamma: float, beta: float, t: np.ndarray
) -> np.ndarray:
    """Left-hand sides of the six coefficient conditions, shape (6, len(t))."""
    a, ad = coeffs._a(t), coeffs._a_dot(t)
    b, bd = coeffs.b(t), coeffs.b_dot(t)
    c, cd = coeffs.c(t), coeffs.c_dot(t)
    d, dd = coeffs.d(t), coeffs.d_dot(t)
    alpha_t = alpha / t
    beta_t = gamma + beta / t
    beta_dot = -beta / t**2
    return np.array(
        [
            ad - b * c,
            -a * beta_t,
            -a * alpha_t * beta_t + a * beta_dot + a - c**2 + b * c * beta_t,
            bd * b + dd / 2.0,
            bd * c + b * (b + cd - c * alpha_t) + d,
            c * (b + cd - c * alpha_t),
        ]
    )


def check_conditions(
    coeffs: ImplicitCoefficients,
    alpha: float,
    gamma: float,
    beta: float,
    t_grid: Any,
) -> tuple[float, ConditionReport]:
    """Smallest grid time beyond which all six conditions hold.

    Grid points inside the pole region count as failing.
    """
    t = np.asarray(t_grid, dtype=float)
    pole_free = coeffs.pole_free(t)
    values = np.full((6, t.size), np.nan)
    holds = np.zeros((6, t.size), dtype=bool)
    residual = 0.0
    if pole_free.any():
        tp = t[pole_free]
        vals = condition_values(coeffs, alpha, gamma, beta, tp)
        values[:, pole_free] = vals
        for i, is_eq in enumerate(_EQUALITY):
            holds[i, pole_free] = np.abs(vals[i]) <= _EQ_TOL if is_eq else vals[i] <= _INEQ_TOL
        residual = float(np.max(np.abs(vals[2])))
    report = ConditionReport(t, pole_free, values, holds, residual)
    ok = report.all_hold
    if not ok[-1]:
        failing = [CONDITION_LABELS[i] for i in range(6) if not holds[i, -1]]
        raise HypothesisError("implicit Lyapunov coefficient conditions", f"failing at t={t[-1]:g}: {failing}")
    bad = np.flatnonzero(~ok)
    t1 = float(t[0] if bad.size == 0 else t[bad[-1] + 1])
    logger.debug("coefficient conditions hold from t1=%.6g (equality residual %.3e)", t1, residual)
    return t1, report


def moment_weight(coeffs: ImplicitCoefficients, lipschitz: float, t: Any) -> np.ndarray:
    """m(t) = max(t, L |a beta(t)|, L |a| beta(t)^2)."""
    t = np.asarray(t, dtype=float)
    a = coeffs.a(t)
    beta_t = coeffs.gamma + coeffs.beta / t
    return np.maximum.reduce([t, lipschitz * np.abs(a * beta_t), lipschitz * np.abs(a) * beta_t**2])


def energy_implicit_convex(
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    coeffs: ImplicitCoefficients,
    alpha: float,
    gamma: float,
    beta: float,
    xstar: Any = None,
    *,
    rel_tol: float = DEFAULT_REL_TOL,
) -> EnergyTrace:
    """Implicit-system energy on the pole-free part of the trajectory.

    E = a (f(x + beta(t) x') - fbar) + |b (x - x*) + c x'|^2 / 2 + d |x - x*|^2 / 2
    minus the tail integrals of c <b (x - x*) + c x', e> and a beta(t) <grad f(x + beta(t) x'), e>.
    """
    boundary = gamma == 0 and coeffs.b_const == 2 and alpha == 3
    if not boundary:
        if not alpha > 3:
            raise HypothesisError("α > 3", f"got alpha={alpha}")
        if not 2 < coeffs.b_const < alpha - 1:
            raise HypothesisError("2 < b < α - 1", f"got b={coeffs.b_const}")
    keep = coeffs.pole_free(traj.times)
    if keep.sum() < 2:
        raise PoleError("trajectory ends before the pole of a(t)")
    t = traj.times[keep]
    x, xd = traj.x[keep], traj.velocity[keep]
    t1, _ = check_conditions(coeffs, alpha, gamma, beta, t)

    xs = _xstar(obj, xstar)
    fbar = _fbar(obj)
    tc = t[:, None]
    a = coeffs.a(t)
    beta_t = gamma + beta / t
    z = x + beta_t[:, None] * xd
    w = coeffs.b_const * (x - xs) + tc * xd
    e = signal.eval(t)
    pointwise = a * (objs.value(obj, z) - fbar) + 0.5 * _sq(w) + 0.5 * coeffs.d_const * _sq(x - xs)
    coupling = t * _rowdot(w, e) + a * beta_t * _rowdot(obj.smooth_gradient(z), e)
    return _trace(
        "implicit-convex",
        t,
        pointwise,
        coupling,
        t1,
        rel_tol,
        {
            "alpha": alpha,
            "gamma": gamma,
            "beta": beta,
            "b": coeffs.b_const,
            "moment_integrability": weighted_moment_class(signal, coeffs, obj.lipschitz_grad or 1.0),
        },
    )


def weighted_moment_class(
    signal: PerturbationSignal,
    coeffs: ImplicitCoefficients,
    lipschitz: float = 1.0,
) -> Integrability:
    """Integrability of m(t)|e(t)| with m from :func:`moment_weight`."""
    if signal.kind == "zero":
        return "converged"
    return classify_integrability(signal, 0.0, weight=partial(moment_weight, coeffs, lipschitz))
