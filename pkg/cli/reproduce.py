"""Reproduce the 12-run perturbation-robustness grid.

Usage:
    uv run reproduce-sec6 --out out/section6 --workers 4
"""

from __future__ import annotations

import argparse
import sys

from cli._runner import EXIT_OK, banner, report_error
from hessdamp.errors import HessdampError
from hessdamp.harness import COMPARISON_HEADER, default_workers, reproduce_section6
from hessdamp.logging_setup import configure_logging


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run every system x delta combination and write comparison.csv.")
    parser.add_argument("--out", default=None, help="Output directory (default: $HESSDAMP_OUTPUT_DIR/section6).")
    parser.add_argument(
        "--workers", type=int, default=None, help="Process pool size (default: $HESSDAMP_WORKERS or 1)."
    )
    parser.add_argument("--log-level", default=None, help="Override HESSDAMP_LOG_LEVEL.")
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    workers = args.workers if args.workers is not None else default_workers()
    banner(f"Reproducing perturbation grid ({workers} worker(s))")
    try:
        rows = reproduce_section6(args.out, workers)
    except HessdampError as exc:
        return report_error(exc)

    slope_col = COMPARISON_HEADER.index("slope")
    for row in rows:
        slope = row[slope_col]
        shown = "n/a" if slope is None else f"{slope:8.3f}"
        print(f"  {row[0]:<40} slope {shown}  {row[slope_col + 1]}")
    print("\n[OK] comparison.csv and plot.gp written")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
