"""Fit a power-law rate to one column of a trajectory CSV.

Usage:
    uv run rates --input out/run/trajectory.csv --col f_gap --window 10:50
"""

from __future__ import annotations

import argparse
import csv
import sys

from cli._runner import EXIT_ERROR, EXIT_OK, report_error
from hessdamp.analysis import fit_rate
from hessdamp.errors import ConfigError, HessdampError
from hessdamp.harness import NUMBER_FORMAT, read_columns
from hessdamp.logging_setup import configure_logging


def _window(text: str | None) -> tuple[float, float] | None:
    if text is None:
        return None
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError:
        raise ConfigError(f"--window expects t_lo:t_hi, got {text!r}") from None
    return lo, hi


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Emit a single-row rate report for one CSV column.")
    parser.add_argument("--input", required=True, help="CSV with a 't' column.")
    parser.add_argument("--col", default="f_gap", help="Column to fit (default: f_gap).")
    parser.add_argument("--window", default=None, help="Time window t_lo:t_hi (default: last 80%% of the horizon).")
    parser.add_argument("--out", default=None, help="Write the report here instead of stdout.")
    args = parser.parse_args(argv)
    configure_logging()

    try:
        columns = read_columns(args.input)
        if args.col not in columns:
            raise ConfigError(f"column {args.col!r} not in {args.input}; have {sorted(columns)}")
        report = fit_rate(columns["t"], columns[args.col], _window(args.window))
    except HessdampError as exc:
        return report_error(exc)
    except OSError as exc:
        print(f"[ERROR] {exc}")
        return EXIT_ERROR

    row = report.as_row()
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(row))
        writer.writerow([NUMBER_FORMAT % v if isinstance(v, float) else v for v in row.values()])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
