"""
Unified test runner for the Hessian damping lab.

Usage:
    uv run test-unit              # Fast profile, skips tests marked slow
    uv run test-all               # Everything, including the 12-run grid checks
"""

from __future__ import annotations

import sys

from cli._runner import banner, run


def _pytest(args: list[str]) -> None:
    run([sys.executable, "-m", "pytest", "tests/", "--tb=short"] + args)


def test_unit() -> None:
    """Run the fast profile."""
    _pytest(["-m", "not slow"])


def test_all() -> None:
    """Run every test, slow ones included."""
    banner("Running full test suite (slow integrations included)...")
    _pytest([])
