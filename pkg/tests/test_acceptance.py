"""
End-to-end checks on the 12-run robustness grid.

Each integration takes seconds, so the whole module is marked ``slow`` and
shares runs through the session-scoped ``section6`` cache.
"""

import dataclasses

import numpy as np
import pytest

from hessdamp import analysis, harness
from hessdamp import lyapunov as ly
from hessdamp.config import EnergyRequest, PerturbationConfig
from hessdamp.dynamics import second_order_residual

pytestmark = pytest.mark.slow

DENSE = 20000
TIGHT = 1e-10


def _slope(section6, kind, delta):
    traj, *_ = section6.get(section6.name(kind, delta))
    return analysis.fit_rate(traj.times, traj.f_gap, harness.SECTION6_WINDOW).slope


class TestRates:
    """Log-log slopes of f(x(t)) - fbar on [10, 50]."""

    @pytest.mark.parametrize("kind", ["ISEHD", "ISIHD"])
    def test_fast_decay_gives_fast_rate(self, section6, kind):
        """delta = 3.1 keeps the unperturbed fast rate."""
        assert _slope(section6, kind, 3.1) <= -1.8

    def test_explicit_rate_degrades_with_slower_errors(self, section6):
        """ISEHD slopes are ordered across delta with margins of at least 0.3."""
        s01, s11, s31 = (_slope(section6, "ISEHD", d) for d in (0.1, 1.1, 3.1))
        assert s31 < s11 < s01
        assert s01 - s11 >= 0.3
        assert s11 - s31 >= 0.3

    def test_implicit_rate_degrades_with_slower_errors(self, section6):
        """ISIHD slopes are ordered; the 1.1 to 3.1 gap stays near 0.2 at any tolerance."""
        s01, s11, s31 = (_slope(section6, "ISIHD", d) for d in (0.1, 1.1, 3.1))
        assert s31 < s11 < s01
        assert s01 - s11 >= 0.3
        assert s11 - s31 >= 0.15

    def test_comparison_file(self, tmp_path):
        """The grid runner writes a comparison row per run."""
        rows = harness.reproduce_section6(tmp_path, workers=1)
        assert len(rows) == 12
        lines = (tmp_path / "comparison.csv").read_text().splitlines()
        assert lines[0] == ",".join(harness.COMPARISON_HEADER)
        assert len(lines) == 13
        assert (tmp_path / "plot.gp").is_file()
        assert (tmp_path / "ISEHD_quartic_d3.1" / "trajectory.csv").is_file()


class TestCertification:
    """Energies on dense, tightly integrated delta = 3.1 runs."""

    @pytest.mark.parametrize(
        ("kind", "request_"),
        [
            ("ISEHD", EnergyRequest("W")),
            ("ISEHD", EnergyRequest("fast")),
            ("ISEHD", EnergyRequest("eps", {"eps": 0.05})),
            ("ISIHD", EnergyRequest("implicit-convex")),
        ],
    )
    def test_energy_certified(self, section6, kind, request_):
        """No increase beyond t1 and every hypothesis met."""
        traj, obj, signal, spec = section6.get(section6.name(kind, 3.1), DENSE, TIGHT)
        cert, trace = harness._certify_one(request_, traj, obj, signal, spec)
        assert cert.hypotheses == "converged"
        assert cert.violations == 0
        assert cert.status == "certified"
        assert trace.t1 < harness.SECTION6_HORIZON

    def test_fast_energy_derivative(self, section6):
        """Centered differences of the fast energy stay below the step tolerance of its certification."""
        traj, obj, signal, spec = section6.get(section6.name("ISEHD", 3.1), DENSE, TIGHT)
        _, trace = harness._certify_one(EnergyRequest("fast"), traj, obj, signal, spec)
        h = traj.times[1] - traj.times[0]
        start = trace.t1_index
        # The first difference past t1 reaches back before it.
        bound = np.where(trace.times <= trace.times[start], np.inf, 0.0)
        tol = ly.DEFAULT_REL_TOL * abs(trace.reference_value) / h
        holds, worst = ly.energy_derivative_check(trace, bound, tol)
        assert holds, worst

    def test_slow_errors_are_out_of_scope(self, section6):
        """delta = 0.1 breaks the fast energy's decrease and fails its moment hypotheses."""
        traj, obj, signal, spec = section6.get(section6.name("ISEHD", 0.1))
        cert, trace = harness._certify_one(EnergyRequest("fast"), traj, obj, signal, spec)
        assert len(trace.violations) >= 1
        assert cert.violations >= 1
        assert cert.hypotheses == "diverging"
        assert cert.status == "hypothesis-not-met"
        assert not cert.failed

    def test_inclusion_energy(self, section6):
        """The non-smooth energy with lambda = 2 does not increase on the explicit inclusion."""
        traj, obj, signal, spec = section6.get(section6.name("ISEHD_INCLUSION", 3.1))
        trace = ly.energy_lambda(traj, obj, signal, spec.alpha, spec.beta, 2.0, rel_tol=1e-5)
        assert trace.violations == ()
        assert np.all(np.isfinite(trace.values))


class TestReformulation:
    """Second-order and first-order forms describe the same trajectory."""

    @staticmethod
    def _unperturbed(section6, kind, form):
        cfg = section6.config(section6.name(kind, 3.1), harness.SECTION6_SAMPLES, TIGHT)
        cfg = dataclasses.replace(
            cfg,
            perturbation=PerturbationConfig(),
            integrator=dataclasses.replace(cfg.integrator, form=form),
        )
        return harness.simulate(cfg)[0]

    @pytest.mark.parametrize("kind", ["ISEHD", "ISIHD"])
    def test_forms_agree(self, section6, kind):
        """Sup-norm gap below 1e-5 on [1, 50]."""
        direct = self._unperturbed(section6, kind, "second-order")
        lifted = self._unperturbed(section6, kind, "first-order")
        assert direct.form == "second-order"
        assert lifted.form == "first-order"
        np.testing.assert_array_equal(direct.times, lifted.times)
        assert np.max(np.abs(direct.x - lifted.x)) <= 1e-5

    @pytest.mark.parametrize("kind", ["ISEHD", "ISIHD"])
    def test_first_order_run_solves_second_order_equation(self, section6, kind):
        """Central differences of the lifted run satisfy the original equation."""
        cfg = section6.config(section6.name(kind, 3.1), DENSE, TIGHT)
        cfg = dataclasses.replace(cfg, integrator=dataclasses.replace(cfg.integrator, form="first-order"))
        traj, obj, signal, spec = harness.simulate(cfg)
        assert second_order_residual(spec, obj, signal, traj, t_from=2.0) <= 1e-3
