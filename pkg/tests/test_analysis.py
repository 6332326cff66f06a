"""
Rate fits, the Gronwall and Kronecker verifiers and the heavy-ball bounds.
"""

import numpy as np
import pytest

from hessdamp import analysis
from hessdamp import lyapunov as ly
from hessdamp.dynamics import SystemKind, SystemSpec
from hessdamp.errors import DomainError, HypothesisError
from hessdamp.integrators import IntegratorConfig, integrate_system
from hessdamp.perturbations import cosine_decay, zero_signal


class TestFitRate:
    """Least-squares power laws on a log-log window."""

    def test_inverse_square(self):
        """t^-2 is fitted exactly and classified fast."""
        t = np.linspace(10.0, 50.0, 400)
        report = analysis.fit_rate(t, 3.0 * t**-2.0)
        assert report.slope == pytest.approx(-2.0, abs=1e-10)
        assert report.intercept == pytest.approx(np.log(3.0), abs=1e-9)
        assert report.residual_rms <= 1e-10
        assert report.classification == "fast"
        assert report.window == (10.0, 50.0)

    def test_constant(self):
        """A constant is stagnant."""
        t = np.linspace(1.0, 50.0, 500)
        report = analysis.fit_rate(t, np.full_like(t, 0.7), (10.0, 50.0))
        assert report.slope == pytest.approx(0.0, abs=1e-12)
        assert report.classification == "stagnant"

    def test_oscillating_slow_decay(self):
        """t^-0.2 (2 + cos t) fits a slope near -0.2 and is degraded."""
        t = np.linspace(10.0, 1000.0, 20000)
        report = analysis.fit_rate(t, t**-0.2 * (2.0 + np.cos(t)), (10.0, 1000.0))
        assert -0.3 <= report.slope <= -0.1
        assert report.classification == "degraded"

    def test_default_window(self):
        """Without a window the fit uses [T/5, T]."""
        t = np.linspace(1.0, 50.0, 1000)
        assert analysis.fit_rate(t, t**-1.0).window == (10.0, 50.0)

    def test_too_few_samples(self):
        """Windows with fewer than 10 samples are rejected."""
        t = np.linspace(1.0, 50.0, 20)
        with pytest.raises(DomainError):
            analysis.fit_rate(t, t**-1.0, (40.0, 50.0))

    def test_negative_values(self):
        """Negative values cannot be fitted in log scale."""
        t = np.linspace(1.0, 10.0, 50)
        with pytest.raises(DomainError):
            analysis.fit_rate(t, -t, (1.0, 10.0))

    @pytest.mark.parametrize(
        ("slope", "label"),
        [(-2.0, "fast"), (-1.8, "fast"), (-1.0, "degraded"), (-0.05, "degraded"), (0.0, "stagnant")],
    )
    def test_classification_thresholds(self, slope, label):
        """fast at slope <= -1.8, stagnant above -0.05."""
        assert analysis.classify_slope(slope) == label

    def test_as_row(self):
        """Report rows carry the window and the fit."""
        t = np.linspace(10.0, 50.0, 100)
        row = analysis.fit_rate(t, t**-2.0).as_row()
        assert set(row) == {"t_lo", "t_hi", "slope", "intercept", "residual_rms", "classification"}


class TestGronwall:
    """Numerical check of the Gronwall-type lemma."""

    def test_equality_case(self):
        """w = t - t0, m = 1, c = 0 satisfies the hypothesis with equality and the conclusion holds."""
        t = np.linspace(1.0, 5.0, 401)
        result = analysis.gronwall_verify(t, t - 1.0, 1.0, 0.0)
        assert result.status == "holds"
        assert abs(result.max_slack) <= 1e-10

    def test_hypothesis_not_satisfied(self):
        """w = 2(t - t0) with m = 1 breaks the hypothesis."""
        t = np.linspace(1.0, 5.0, 401)
        result = analysis.gronwall_verify(t, 2.0 * (t - 1.0), 1.0, 0.0)
        assert result.status == "hypothesis-not-satisfied"
        assert not result.holds

    def test_zero(self):
        """w = 0 with c = 0 holds trivially."""
        t = np.linspace(1.0, 5.0, 11)
        result = analysis.gronwall_verify(t, np.zeros_like(t), 1.0, 0.0)
        assert result.holds
        assert result.max_slack == 0.0

    def test_constant_bound(self):
        """|w| = c with m = 0 holds with zero slack."""
        t = np.linspace(1.0, 5.0, 11)
        result = analysis.gronwall_verify(t, np.full_like(t, 2.0), 0.0, 2.0)
        assert result.holds

    def test_negative_inputs(self):
        """m and c must be nonnegative."""
        t = np.linspace(1.0, 2.0, 5)
        with pytest.raises(DomainError):
            analysis.gronwall_verify(t, t, -1.0, 0.0)
        with pytest.raises(DomainError):
            analysis.gronwall_verify(t, t, 1.0, -1.0)


class TestKronecker:
    """Weighted means (1/phi(t)) int phi f."""

    @pytest.mark.parametrize("t", [10.0, 100.0])
    def test_closed_form(self, t):
        """f = s^-2, phi = s^2 gives (t - 1)/t^2."""
        value = analysis.kronecker_mean(lambda s: s**-2.0, lambda s: s**2.0, 1.0, t)
        assert value == pytest.approx((t - 1.0) / t**2, abs=1e-8)

    def test_exponential_weight(self):
        """With phi = exp(s/2) and f = s^-2 the mean decays."""
        early = analysis.kronecker_mean(lambda s: s**-2.0, lambda s: np.exp(s / 2.0), 1.0, 20.0)
        late = analysis.kronecker_mean(lambda s: s**-2.0, lambda s: np.exp(s / 2.0), 1.0, 40.0)
        assert late <= 1e-2
        assert late < early

    def test_nonpositive_weight(self):
        """phi must be positive."""
        with pytest.raises(DomainError):
            analysis.kronecker_mean(lambda s: s, lambda s: s - 2.0, 1.0, 3.0)

    def test_empty_interval(self):
        """t must exceed t0."""
        with pytest.raises(DomainError):
            analysis.kronecker_mean(lambda s: s, lambda s: s, 2.0, 2.0)


def _heavy_ball(kind, signal, quadratic):
    spec = SystemSpec(kind, beta=0.4)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, output_times=np.linspace(1.0, 30.0, 2901))
    return integrate_system(spec, quadratic, signal, (1.0, 30.0), [1.0, -1.0], [0.0, 0.0], cfg=cfg)


class TestHeavyBallBounds:
    """Exponential bounds for the strongly convex systems."""

    @pytest.mark.parametrize(
        ("kind", "variant"), [(SystemKind.HB_EXPLICIT, "explicit"), (SystemKind.HB_IMPLICIT, "implicit")]
    )
    def test_unperturbed_exponential_decay(self, quadratic, kind, variant):
        """E(t) <= E(t0) exp(-sqrt(mu)/2 (t - t0)) without errors."""
        sig = zero_signal(2)
        traj = _heavy_ball(kind, sig, quadratic)
        trace = ly.energy_sc(traj, quadratic, sig, 0.4, variant)
        e0 = trace.values[0]
        envelope = e0 * np.exp(-0.5 * (trace.times - 1.0))
        assert np.all(trace.values <= envelope + 1e-6 * e0)
        check = analysis.sc_bound_check(trace, quadratic, sig, 0.4, variant)
        assert check.holds

    @pytest.mark.parametrize(
        ("kind", "variant"), [(SystemKind.HB_EXPLICIT, "explicit"), (SystemKind.HB_IMPLICIT, "implicit")]
    )
    def test_perturbed_bound(self, quadratic, kind, variant):
        """With delta = 3.1 errors the bound holds pointwise."""
        sig = cosine_decay(3.1, 2)
        traj = _heavy_ball(kind, sig, quadratic)
        trace = ly.energy_sc(traj, quadratic, sig, 0.4, variant)
        check = analysis.sc_bound_check(trace, quadratic, sig, 0.4, variant)
        assert check.holds
        assert check.M > 0

    def test_energy_inherits_error_decay(self, quadratic):
        """The explicit energy decays at least like t^-3 once the errors dominate."""
        sig = cosine_decay(3.1, 2)
        cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14, output_times=np.linspace(1.0, 50.0, 2000))
        spec = SystemSpec(SystemKind.HB_EXPLICIT, beta=0.4)
        traj = integrate_system(spec, quadratic, sig, (1.0, 50.0), [1.0, -1.0], [0.0, 0.0], cfg=cfg)
        trace = ly.energy_sc(traj, quadratic, sig, 0.4, "explicit")
        assert analysis.fit_rate(trace.times, trace.values, (10.0, 50.0)).slope <= -3.0

    def test_requires_strong_convexity(self, quartic):
        """The quartic has mu = 0."""
        t = np.linspace(1.0, 2.0, 3)
        trace = ly.EnergyTrace("sc-explicit", t, np.ones(3), np.zeros(3), 1.0)
        with pytest.raises(HypothesisError):
            analysis.sc_bound_curve(trace, quartic, zero_signal(2), 0.4)


class TestIntegralEstimates:
    """Finite-horizon integrals reported per run."""

    def test_keys_and_signs(self, quartic):
        """All three integrals are present and nonnegative."""
        spec = SystemSpec(SystemKind.ISEHD, alpha=3.1, beta=1.0)
        cfg = IntegratorConfig(output_times=np.linspace(1.0, 5.0, 101))
        traj = integrate_system(spec, quartic, zero_signal(2), (1.0, 5.0), [0.0, 0.0], [0.0, 0.0], cfg=cfg)
        out = analysis.integral_estimates(traj)
        assert set(out) == {"int_t2_grad_sq", "int_t_velocity_sq", "int_t_f_gap"}
        assert all(v >= 0 for v in out.values())
