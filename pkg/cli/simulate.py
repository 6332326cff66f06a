"""Run one scenario file and write its artifacts.

Usage:
    uv run simulate --config scenarios/isehd_quartic_d3.1.yaml --out out/isehd
"""

from __future__ import annotations

import argparse
import sys

from cli._runner import EXIT_CERTIFICATION_FAILED, EXIT_OK, banner, report_error
from hessdamp.config import load_scenario
from hessdamp.errors import HessdampError
from hessdamp.harness import run_scenario
from hessdamp.logging_setup import configure_logging


def _parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Integrate a scenario and write trajectory, energy and report CSVs.")
    parser.add_argument("--config", required=True, help="Scenario YAML file.")
    parser.add_argument(
        "--out", default=None, help="Output directory (default: output_dir key or $HESSDAMP_OUTPUT_DIR/<name>)."
    )
    parser.add_argument("--log-level", default=None, help="Override HESSDAMP_LOG_LEVEL.")
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    configure_logging(args.log_level)
    try:
        cfg = load_scenario(args.config)
        banner(f"Simulating scenario {cfg.name!r} ({cfg.system.kind})")
        result = run_scenario(cfg, args.out)
    except HessdampError as exc:
        return report_error(exc)

    print(f"[OK] Artifacts written to {result.out_dir}")
    if result.rate is not None:
        print(f"     rate slope {result.rate.slope:.4f} ({result.rate.classification})")
    for cert in result.certifications:
        tag = "[FAIL]" if cert.failed else "[WARN]" if cert.status == "hypothesis-not-met" else "[OK]"
        print(f"{tag} energy {cert.energy}: {cert.status} ({cert.violations} violations)")
    return EXIT_CERTIFICATION_FAILED if result.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
