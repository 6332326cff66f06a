"""
Shared fixtures.

Objectives are cheap and rebuilt per test. Integrations of the 12-run grid are
expensive, so they are computed once per session and cached by run name; the
tests that use them are marked ``slow``.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from hessdamp import harness
from hessdamp import objectives as objs
from hessdamp.config import OutputGrid


@pytest.fixture
def quartic():
    return objs.quartic()


@pytest.fixture
def quartic_l1():
    """The l1 variant carrying its closed-form minimizer."""
    obj = objs.quartic(0.1)
    xstar = objs.quartic_l1_minimizer(0.1)
    return objs.with_minimum(obj, xstar, float(objs.value(obj, xstar)))


@pytest.fixture
def quadratic():
    return objs.quadratic(mu=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class RunCache:
    """Lazily integrated 12-run grid scenarios, keyed by (run name, samples, tolerance)."""

    def __init__(self) -> None:
        self._scenarios = {cfg.name: cfg for cfg in harness.section6_scenarios()}
        self._runs: dict[tuple[str, int, float], tuple] = {}

    def names(self) -> list[str]:
        return list(self._scenarios)

    @staticmethod
    def name(kind: str, delta: float) -> str:
        objective = "quartic" if kind in ("ISEHD", "ISIHD") else "quartic-l1"
        return f"{kind}_{objective}_d{delta}"

    def config(self, name: str, samples: int = harness.SECTION6_SAMPLES, tol: float | None = None):
        cfg = self._scenarios[name]
        settings = dataclasses.replace(cfg.integrator, output=OutputGrid("uniform", samples))
        if tol is not None:
            settings = dataclasses.replace(settings, rel_tol=tol, abs_tol=tol)
        return dataclasses.replace(cfg, integrator=settings)

    def get(self, name: str, samples: int = harness.SECTION6_SAMPLES, tol: float | None = None):
        """(trajectory, objective, signal, spec) for one run."""
        key = (name, samples, tol or 0.0)
        if key not in self._runs:
            self._runs[key] = harness.simulate(self.config(name, samples, tol))
        return self._runs[key]


@pytest.fixture(scope="session")
def section6():
    return RunCache()
