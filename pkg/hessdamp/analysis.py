"""Post-hoc verification: power-law rate fits, appendix-lemma verifiers and heavy-ball bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from hessdamp.dynamics import Trajectory
from hessdamp.errors import DomainError, HypothesisError
from hessdamp.lyapunov import EnergyTrace
from hessdamp.objectives import Objective
from hessdamp.perturbations import PerturbationSignal, combine_g

logger = logging.getLogger(__name__)

RateClass = Literal["fast", "degraded", "stagnant"]

FAST_SLOPE = -1.8
STAGNANT_SLOPE = -0.05
RESAMPLE_POINTS = 200
MIN_WINDOW_SAMPLES = 10
VALUE_FLOOR = 1e-300


@dataclass(frozen=True)
class RateReport:
    window: tuple[float, float]
    slope: float
    intercept: float
    residual_rms: float
    classification: RateClass
    n_samples: int

    def as_row(self) -> dict[str, float | str]:
        return {
            "t_lo": self.window[0],
            "t_hi": self.window[1],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "classification": self.classification,
        }


def classify_slope(slope: float) -> RateClass:
    if slope <= FAST_SLOPE:
        return "fast"
    if slope > STAGNANT_SLOPE:
        return "stagnant"
    return "degraded"


def fit_rate(times, values, window: tuple[float, float] | None = None) -> RateReport:
    """Least-squares power law v ~ C t^slope on ``window`` (default [T/5, T]).

    The window is resampled at 200 log-spaced times by linear interpolation
    in log-log coordinates, so dense late samples do not dominate the fit.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise DomainError("fit_rate needs matching one-dimensional times and values")
    if window is None:
        window = (t[-1] / 5.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise DomainError(f"rate window must satisfy 0 < t_lo < t_hi, got {window}")
    inside = (t >= lo) & (t <= hi)
    n = int(inside.sum())
    if n < MIN_WINDOW_SAMPLES:
        raise DomainError(f"rate window {window} holds {n} samples, need at least {MIN_WINDOW_SAMPLES}")
    tw, vw = t[inside], v[inside]
    if np.any(vw < -1e-12 * max(np.max(np.abs(vw)), VALUE_FLOOR)):
        raise DomainError("fit_rate needs nonnegative values on the window")
    log_t = np.log(tw)
    log_v = np.log(np.maximum(vw, VALUE_FLOOR))
    grid = np.linspace(log_t[0], log_t[-1], RESAMPLE_POINTS)
    sampled = np.interp(grid, log_t, log_v)
    slope, intercept = np.polyfit(grid, sampled, 1)
    resid = sampled - (slope * grid + intercept)
    report = RateReport(
        window=(lo, hi),
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        classification=classify_slope(float(slope)),
        n_samples=n,
    )
    logger.debug("rate fit on [%g, %g]: slope %.4f (%s)", lo, hi, report.slope, report.classification)
    return report


# ---------------------------------------------------------------------------
# Appendix verifiers
# ---------------------------------------------------------------------------

GronwallStatus = Literal["holds", "violated", "hypothesis-not-satisfied"]


@dataclass(frozen=True)
class GronwallResult:
    status: GronwallStatus
    max_slack: float  # min over samples of (c + int m) - |w|; negative when violated
    hypothesis_gap: float  # max over samples of w^2/2 - c^2/2 - int m w

    @property
    def holds(self) -> bool:
        return self.status == "holds"


_GRONWALL_HYPOTHESIS_SLACK = 1e-10
_GRONWALL_CONCLUSION_SLACK = 1e-8


def gronwall_verify(times, w, m, c: float) -> GronwallResult:
    """If w^2/2 <= c^2/2 + int_{t0}^t m w on the samples, check |w| <= c + int_{t0}^t m."""
    t = np.asarray(times, dtype=float)
    w = np.asarray(w, dtype=float)
    m = np.broadcast_to(np.asarray(m, dtype=float), t.shape)
    if np.any(m < 0):
        raise DomainError("Gronwall weight m must be nonnegative")
    if c < 0:
        raise DomainError("Gronwall constant c must be nonnegative")
    int_mw = cumulative_trapezoid(m * w, t, initial=0.0)
    int_m = cumulative_trapezoid(m, t, initial=0.0)
    gap = 0.5 * w**2 - 0.5 * c**2 - int_mw
    scale = np.maximum(1.0, np.abs(0.5 * w**2))
    hypothesis_gap = float(np.max(gap))
    slack = float(np.min(c + int_m - np.abs(w)))
    if np.any(gap > _GRONWALL_HYPOTHESIS_SLACK * scale):
        return GronwallResult("hypothesis-not-satisfied", slack, hypothesis_gap)
    status: GronwallStatus = "holds" if slack >= -_GRONWALL_CONCLUSION_SLACK else "violated"
    return GronwallResult(status, slack, hypothesis_gap)


def kronecker_mean(
    f: Callable[[np.ndarray], np.ndarray],
    phi: Callable[[np.ndarray], np.ndarray],
    t0: float,
    t: float,
    n: int = 20001,
) -> float:
    """(1/phi(t)) int_{t0}^t phi(s) f(s) ds by the trapezoid rule on ``n`` points."""
    if not t > t0:
        raise DomainError(f"kronecker_mean needs t > t0, got [{t0}, {t}]")
    s = np.linspace(t0, t, n)
    weights = np.asarray(phi(s), dtype=float)
    if np.any(weights <= 0):
        raise DomainError("kronecker_mean needs phi > 0 on [t0, t]")
    return float(trapezoid(weights * np.asarray(f(s), dtype=float), s) / weights[-1])


# ---------------------------------------------------------------------------
# Heavy-ball exponential bounds
# ---------------------------------------------------------------------------


def _forcing_tail(signal: PerturbationSignal, beta: float, horizon: float, variant: str) -> float:
    # Majorant of the forcing norm integral over [horizon, +inf) for cosine-decay signals.
    if signal.kind != "cosine-decay" or signal.delta is None or signal.delta <= 1:
        return 0.0
    d = signal.delta
    amp = float(np.linalg.norm(signal.eval(1.0)))
    tail = horizon ** (1.0 - d) / (d - 1.0)
    if variant == "explicit" and beta:
        tail += beta * (2.0 * np.pi * horizon ** (1.0 - d) / (d - 1.0) + horizon**-d)
    return amp * tail


@dataclass(frozen=True, eq=False)
class BoundCurve:
    times: np.ndarray
    bound: np.ndarray
    rate: float
    M: float


def sc_bound_curve(
    trace: EnergyTrace,
    obj: Objective,
    signal: PerturbationSignal,
    beta: float,
    variant: str = "explicit",
) -> BoundCurve:
    """E(t0) exp(-r (t - t0)) + M exp(-r t) int_{t0}^t exp(r s) |forcing(s)| ds with r = sqrt(mu)/2.

    The forcing is g = e + beta e' for the explicit variant and e for the
    implicit one; M follows the matching heavy-ball theorem.
    """
    if obj.mu <= 0:
        raise HypothesisError("μ > 0", f"objective {obj.name!r} is not strongly convex")
    t = trace.times
    rate = 0.5 * np.sqrt(obj.mu)
    e0 = float(trace.values[0])
    if variant == "explicit":
        forcing = np.linalg.norm(combine_g(signal, beta, t), axis=1)
    elif variant == "implicit":
        if obj.lipschitz_grad is None:
            raise HypothesisError("∇f Lipschitz", "the implicit bound needs the Lipschitz constant L")
        forcing = np.linalg.norm(signal.eval(t), axis=1)
    else:
        raise DomainError(f"unknown strongly convex variant {variant!r}")
    total = float(trapezoid(forcing, t)) + _forcing_tail(signal, beta, float(t[-1]), variant)
    if variant == "explicit":
        M = np.sqrt(2.0 * max(e0, 0.0)) + total
    else:
        c = min(obj.mu, 1.0) / (4.0 * max(beta**2 * obj.lipschitz_grad**2, 1.0))
        M = np.sqrt(max(e0, 0.0) / c) + total / (2.0 * c)
    shift = t - t[0]
    weighted = cumulative_trapezoid(np.exp(rate * shift) * forcing, t, initial=0.0)
    bound = e0 * np.exp(-rate * shift) + M * np.exp(-rate * shift) * weighted
    return BoundCurve(t, bound, float(rate), float(M))


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    min_slack: float
    M: float


def sc_bound_check(
    trace: EnergyTrace,
    obj: Objective,
    signal: PerturbationSignal,
    beta: float,
    variant: str = "explicit",
) -> BoundCheck:
    """Pointwise check of the heavy-ball bound with tolerance 1e-6 E(t0)."""
    curve = sc_bound_curve(trace, obj, signal, beta, variant)
    slack = curve.bound - trace.values
    min_slack = float(slack.min())
    tol = 1e-6 * abs(float(trace.values[0]))
    return BoundCheck(min_slack >= -tol, min_slack, curve.M)


def integral_estimates(traj: Trajectory) -> dict[str, float]:
    """Finite-horizon integrals that the convergence theorems keep bounded as T grows."""
    t = traj.times
    out = {
        "int_t2_grad_sq": float(trapezoid(t**2 * traj.grad_norm**2, t)),
        "int_t_velocity_sq": float(trapezoid(t * np.sum(traj.velocity**2, axis=1), t)),
    }
    if traj.f_gap is not None:
        out["int_t_f_gap"] = float(trapezoid(t * traj.f_gap, t))
    return out
