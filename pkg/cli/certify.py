"""Certify the Lyapunov energies of one scenario without writing artifacts.

Exit code 0 when every energy is certified or out of hypothesis scope, 1 when
an energy is violated under met hypotheses, 2 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import sys

from cli._runner import EXIT_CERTIFICATION_FAILED, EXIT_OK, banner, report_error
from hessdamp.config import load_scenario
from hessdamp.errors import HessdampError
from hessdamp.harness import certify
from hessdamp.logging_setup import configure_logging


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Certify the energies requested by a scenario.")
    parser.add_argument("--config", required=True, help="Scenario YAML file.")
    parser.add_argument("--log-level", default=None, help="Override HESSDAMP_LOG_LEVEL.")
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        cfg = load_scenario(args.config)
        if not cfg.energies:
            print("[WARN] Scenario requests no energies; nothing to certify")
            return EXIT_OK
        banner(f"Certifying scenario {cfg.name!r}")
        results = certify(cfg)
    except HessdampError as exc:
        return report_error(exc)

    failed = False
    for cert in results:
        if cert.failed:
            failed = True
            print(f"[FAIL] {cert.energy}: {cert.violations} violations beyond t1={cert.t1:.6g}")
        elif cert.status == "hypothesis-not-met":
            print(f"[WARN] {cert.energy}: hypotheses not met ({cert.detail})")
        else:
            print(f"[OK] {cert.energy}: non-increasing beyond t1={cert.t1:.6g}")
    print()
    print("CERTIFICATION FAILED" if failed else "CERTIFICATION PASSED")
    return EXIT_CERTIFICATION_FAILED if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
