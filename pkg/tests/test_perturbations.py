"""
Error signals and their integrability diagnostics.
"""

import numpy as np
import pytest
from scipy import integrate

from hessdamp.errors import DomainError
from hessdamp.perturbations import (
    classify_integrability,
    combine_g,
    cosine_decay,
    moment_integral,
    zero_signal,
)


class TestCosineDecay:
    """e(t) = cos(2 pi t) / t^delta."""

    def test_values(self):
        """At t = 2 every component is 1/4 for delta = 2."""
        sig = cosine_decay(2.0, 2)
        assert np.allclose(sig.eval(2.0), [0.25, 0.25])

    def test_component_selection(self):
        """Components outside the selection stay zero."""
        sig = cosine_decay(1.0, 2, components=[0])
        e = sig.eval(np.array([1.0, 1.5, 3.0]))
        assert e.shape == (3, 2)
        assert np.array_equal(e[:, 1], np.zeros(3))
        assert np.allclose(e[:, 0], [1.0, -1.0 / 1.5, 1.0 / 3.0])

    def test_component_out_of_range(self):
        """Indices must be below the dimension."""
        with pytest.raises(DomainError):
            cosine_decay(1.0, 2, components=[2])

    def test_before_t_min(self):
        """Evaluation before t = 1 is outside the domain."""
        with pytest.raises(DomainError):
            cosine_decay(1.0, 2).eval(0.5)

    def test_negative_delta(self):
        """delta must be nonnegative."""
        with pytest.raises(DomainError):
            cosine_decay(-0.5, 2)

    def test_derivative_matches_central_differences(self):
        """Analytic derivative agrees with central differences."""
        sig = cosine_decay(1.1, 2)
        t, h = 3.3, 1e-6
        fd = (sig.eval(t + h) - sig.eval(t - h)) / (2 * h)
        assert np.allclose(sig.eval_derivative(t), fd, rtol=1e-6, atol=1e-9)
        assert not sig.derivative_is_numeric

    def test_combine_g(self):
        """g = e + beta e' and g = e for beta = 0."""
        sig = cosine_decay(3.1, 2)
        t = np.linspace(1.0, 5.0, 7)
        assert np.array_equal(combine_g(sig, 0.0, t), sig.eval(t))
        assert np.allclose(combine_g(sig, 0.5, t), sig.eval(t) + 0.5 * sig.eval_derivative(t))


class TestMomentIntegral:
    """Adaptive quadrature of t^p |e(t)|."""

    def test_zero_signal(self):
        """The zero signal integrates to zero."""
        assert moment_integral(zero_signal(2), 1.0, 1.0, 10.0) == 0.0

    def test_one_period(self):
        """Integral of |cos 2 pi t| over one unit period is 2/pi."""
        sig = cosine_decay(0.0, 1)
        assert moment_integral(sig, 0.0, 1.0, 2.0) == pytest.approx(2.0 / np.pi, abs=1e-8)

    def test_norm_over_components(self):
        """Two equal components scale the integral by sqrt(2)."""
        one = moment_integral(cosine_decay(0.0, 1), 0.0, 1.0, 2.0)
        two = moment_integral(cosine_decay(0.0, 2), 0.0, 1.0, 2.0)
        assert two == pytest.approx(np.sqrt(2.0) * one, rel=1e-9)

    def test_against_scipy_quad(self):
        """First moment of a decaying signal matches scipy's quad with break points."""
        sig = cosine_decay(2.0, 1)
        want, _ = integrate.quad(
            lambda t: abs(np.cos(2 * np.pi * t)) / t,
            1.0,
            3.0,
            points=[1.25, 1.75, 2.25, 2.75],
            limit=200,
            epsabs=1e-12,
        )
        assert moment_integral(sig, 1.0, 1.0, 3.0) == pytest.approx(want, abs=1e-7)

    def test_derivative_moment(self):
        """Moment of |e'| is positive and finite."""
        value = moment_integral(cosine_decay(3.1, 2), 1.0, 1.0, 10.0, derivative=True)
        assert 0.0 < value < np.inf

    def test_weight_replaces_power(self):
        """A weight callable t -> t^2 reproduces the second moment."""
        sig = cosine_decay(1.5, 2)
        weighted = moment_integral(sig, 0.0, 1.0, 10.0, weight=lambda t: t**2)
        assert weighted == pytest.approx(moment_integral(sig, 2.0, 1.0, 10.0), rel=1e-9)

    def test_invalid_bounds(self):
        """t0 before t_min, empty spans and negative orders are rejected."""
        sig = cosine_decay(1.0, 2)
        with pytest.raises(DomainError):
            moment_integral(sig, 0.0, 0.5, 2.0)
        with pytest.raises(DomainError):
            moment_integral(sig, 0.0, 2.0, 2.0)
        with pytest.raises(DomainError):
            moment_integral(sig, -1.0, 1.0, 2.0)


class TestClassifyIntegrability:
    """Tail-increment classification of moment integrability."""

    @pytest.mark.parametrize(
        ("delta", "p", "expected"),
        [
            (3.1, 1.0, "converged"),
            (2.0, 0.0, "converged"),
            (1.1, 1.0, "diverging"),
            (0.1, 0.0, "diverging"),
            (1.1, 0.0, "converged"),
            (1.02, 0.0, "inconclusive"),
        ],
    )
    def test_cosine_decay(self, delta, p, expected):
        """Verdicts for the signals of the 12-run grid."""
        assert classify_integrability(cosine_decay(delta, 2), p) == expected

    def test_derivative_moment(self):
        """t |e'| is integrable for delta = 3.1."""
        assert classify_integrability(cosine_decay(3.1, 2), 1.0, derivative=True) == "converged"

    def test_zero_signal(self):
        """The zero signal is trivially integrable."""
        assert classify_integrability(zero_signal(2), 2.0) == "converged"

    def test_weighted_verdict(self):
        """A constant factor in the weight leaves the verdict unchanged."""
        sig = cosine_decay(3.1, 2)
        assert classify_integrability(sig, 0.0, weight=lambda t: 5292.0 * t**2) == "converged"
        assert classify_integrability(cosine_decay(1.1, 2), 0.0, weight=lambda t: 5292.0 * t**2) == "diverging"
