"""Shared CLI helpers.

Provides a standard way to run commands inside the uv-managed environment and
the banner/status lines every console command prints.
"""

from __future__ import annotations

import subprocess

from hessdamp.errors import HessdampError

EXIT_OK = 0
EXIT_CERTIFICATION_FAILED = 1
EXIT_ERROR = 2


def run(cmd: list[str]) -> None:
    """Run a command and propagate its exit code."""
    raise SystemExit(subprocess.run(cmd).returncode)


def banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def report_error(exc: HessdampError) -> int:
    print(f"[ERROR] {exc}")
    return EXIT_ERROR
