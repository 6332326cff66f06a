"""Ruff gate over the library, the console commands and the tests.

Usage:
    uv run lint            # lint and format check
    uv run lint --fix      # apply safe fixes and reformat
"""

from __future__ import annotations

import subprocess
import sys

from cli._runner import banner

TARGETS = ["cli", "hessdamp", "tests"]


def _ruff(args: list[str], label: str) -> int:
    cmd = [sys.executable, "-m", "ruff", *args, *TARGETS]
    print(f"[lint] {label}: {' '.join(cmd)}")
    return subprocess.run(cmd).returncode


def main(argv: list[str] | None = None) -> int:
    fix = "--fix" in (sys.argv[1:] if argv is None else argv)
    banner("Lint gate")
    if fix:
        codes = [_ruff(["check", "--fix"], "check"), _ruff(["format"], "format")]
    else:
        codes = [_ruff(["check"], "check"), _ruff(["format", "--check"], "format")]
    failed = any(codes)
    print("[FAIL] ruff reported problems" if failed else "[OK] ruff clean")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
