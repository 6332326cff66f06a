"""Scenario orchestration: integrate, certify energies, fit rates, write artifacts.

Every number lands in a CSV with ``%.17g`` formatting so reruns are
byte-identical; a gnuplot script next to the CSVs draws them.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from hessdamp import analysis
from hessdamp import lyapunov as ly
from hessdamp import objectives as objs
from hessdamp.config import (
    EnergyRequest,
    InitialData,
    IntegratorSettings,
    ObjectiveConfig,
    OutputGrid,
    PerturbationConfig,
    ScenarioConfig,
    SystemConfig,
    default_output_root,
)
from hessdamp.dynamics import EXPLICIT_KINDS, SystemKind, SystemSpec, Trajectory
from hessdamp.errors import DomainError, HypothesisError, PoleError
from hessdamp.integrators import integrate_system
from hessdamp.objectives import Objective
from hessdamp.perturbations import Integrability, PerturbationSignal, classify_integrability

logger = logging.getLogger(__name__)

ENV_WORKERS = "HESSDAMP_WORKERS"
NUMBER_FORMAT = "%.17g"

CertStatus = Literal["certified", "violated", "hypothesis-not-met"]

_SEVERITY = {"converged": 0, "inconclusive": 1, "diverging": 2}


@dataclass(frozen=True)
class CertificationResult:
    energy: str
    status: CertStatus
    violations: int
    hypotheses: Integrability
    t1: float | None = None
    slack: float | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "violated"


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    config: ScenarioConfig
    objective: Objective
    signal: PerturbationSignal
    trajectory: Trajectory
    energies: dict[str, ly.EnergyTrace] = field(default_factory=dict)
    certifications: tuple[CertificationResult, ...] = ()
    rate: analysis.RateReport | None = None
    out_dir: Path | None = None

    @property
    def failed(self) -> bool:
        return any(c.failed for c in self.certifications)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _worst(*classes: Integrability) -> Integrability:
    return max(classes, key=_SEVERITY.__getitem__)


def energy_hypotheses(
    name: str,
    signal: PerturbationSignal,
    spec: SystemSpec,
    coeffs=None,
    lipschitz: float = 1.0,
) -> Integrability:
    """Classification of the moment hypotheses of the theorem behind ``name``.

    Explicit systems also constrain e' through g = e + beta e'; W and the
    heavy-ball energies need plain integrability, the fast energies the
    first moment and the implicit energy the weighted moment.
    """
    if signal.kind == "zero":
        return "converged"
    if name == "implicit-convex":
        return ly.weighted_moment_class(signal, coeffs, lipschitz)
    p = 1.0 if name in ("fast", "eps", "lambda") else 0.0
    verdict = classify_integrability(signal, p)
    if spec.kind in EXPLICIT_KINDS or spec.kind is SystemKind.HB_EXPLICIT:
        verdict = _worst(verdict, classify_integrability(signal, p, derivative=True))
    return verdict


def evaluate_energy(
    req: EnergyRequest,
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    spec: SystemSpec,
) -> tuple[ly.EnergyTrace, Any]:
    """Energy trace for one request, plus the implicit coefficients when they apply."""
    default_tol = 1e-5 if traj.form == "inclusion" else ly.DEFAULT_REL_TOL
    rel_tol = req.params.get("rel_tol", default_tol)
    a, b = spec.alpha, spec.beta
    if req.name == "W":
        return ly.energy_W(traj, obj, signal, b, alpha=a, rel_tol=rel_tol), None
    if req.name == "fast":
        return ly.energy_fast(traj, obj, signal, a, b, rel_tol=rel_tol), None
    if req.name == "eps":
        return ly.energy_eps(traj, obj, signal, a, b, req.params.get("eps"), rel_tol=rel_tol), None
    if req.name == "lambda":
        return ly.energy_lambda(traj, obj, signal, a, b, req.params.get("lambda", 2.0), rel_tol=rel_tol), None
    if req.name == "sc":
        variant = "explicit" if spec.kind is SystemKind.HB_EXPLICIT else "implicit"
        return ly.energy_sc(traj, obj, signal, b, variant, rel_tol=rel_tol), None
    coeffs = ly.implicit_coefficients(a, req.params.get("b"), spec.gamma, b)
    return ly.energy_implicit_convex(traj, obj, signal, coeffs, a, spec.gamma, b, rel_tol=rel_tol), coeffs


def resolve_minimum(obj: Objective) -> Objective:
    """Attach a polished reference minimum to objectives that lack one."""
    if obj.known_min_value is not None and obj.known_minimizer is not None:
        return obj
    start = np.zeros(obj.dimension)
    if obj.name == "quartic-l1":
        start = objs.quartic_l1_minimizer(obj.nonsmooth_weight)
    x_bar, f_bar, residual = objs.polish_minimizer(obj, start)
    logger.info("polished minimum of %s: f=%.17g at %s (residual %.2e)", obj.name, f_bar, x_bar, residual)
    return objs.with_minimum(obj, x_bar, f_bar)


def simulate(cfg: ScenarioConfig) -> tuple[Trajectory, Objective, PerturbationSignal, SystemSpec]:
    obj = resolve_minimum(cfg.build_objective())
    spec = cfg.build_spec()
    signal = cfg.build_signal(obj.dimension)
    init = cfg.initial
    traj = integrate_system(
        spec,
        obj,
        signal,
        (spec.t0, cfg.horizon),
        init.x0,
        init.v0,
        y0=init.y0,
        cfg=cfg.build_integrator(),
        h=cfg.integrator.h,
        form=cfg.integrator.form,
    )
    return traj, obj, signal, spec


def _certify_one(
    req: EnergyRequest,
    traj: Trajectory,
    obj: Objective,
    signal: PerturbationSignal,
    spec: SystemSpec,
) -> tuple[CertificationResult, ly.EnergyTrace | None]:
    try:
        trace, coeffs = evaluate_energy(req, traj, obj, signal, spec)
    except (HypothesisError, PoleError) as exc:
        logger.warning("energy %s: %s", req.name, exc)
        return CertificationResult(req.name, "hypothesis-not-met", 0, "inconclusive", detail=str(exc)), None
    hypotheses = energy_hypotheses(req.name, signal, spec, coeffs, obj.lipschitz_grad or 1.0)
    slack = None
    n_viol = len(trace.violations)
    if req.name == "sc":
        variant = "explicit" if spec.kind is SystemKind.HB_EXPLICIT else "implicit"
        check = analysis.sc_bound_check(trace, obj, signal, spec.beta, variant)
        slack = check.min_slack
        if not check.holds:
            n_viol += 1
    if hypotheses != "converged":
        status: CertStatus = "hypothesis-not-met"
        detail = f"moment hypotheses {hypotheses}"
        logger.warning("energy %s: %s, %d violations not counted", req.name, detail, n_viol)
    else:
        status = "violated" if n_viol else "certified"
        detail = ""
    logger.info("energy %s: %s (%d violations beyond t1=%.6g)", req.name, status, n_viol, trace.t1)
    return CertificationResult(req.name, status, n_viol, hypotheses, trace.t1, slack, detail), trace


def _rate(traj: Trajectory) -> analysis.RateReport | None:
    if traj.f_gap is None:
        return None
    try:
        return analysis.fit_rate(traj.times, traj.f_gap)
    except DomainError as exc:
        logger.warning("rate fit skipped: %s", exc)
        return None


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, *, write: bool = True) -> ScenarioResult:
    """Integrate one scenario, certify its energies and (optionally) write its artifacts."""
    traj, obj, signal, spec = simulate(cfg)
    energies: dict[str, ly.EnergyTrace] = {}
    certs: list[CertificationResult] = []
    for req in cfg.energies:
        cert, trace = _certify_one(req, traj, obj, signal, spec)
        certs.append(cert)
        if trace is not None:
            energies[req.name] = trace
    result = ScenarioResult(cfg, obj, signal, traj, energies, tuple(certs), _rate(traj))
    if not write:
        return result
    target = cfg.resolve_output_dir(out_dir)
    write_artifacts(result, target)
    logger.info("scenario %s written to %s", cfg.name, target)
    return ScenarioResult(cfg, obj, signal, traj, energies, tuple(certs), result.rate, target)


def certify(cfg: ScenarioConfig) -> tuple[CertificationResult, ...]:
    return run_scenario(cfg, write=False).certifications


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return NUMBER_FORMAT % value
    return str(value)


def write_columns(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    table = np.column_stack(columns)
    np.savetxt(path, table, fmt=NUMBER_FORMAT, delimiter=",", header=",".join(header), comments="")


def write_rows(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def trajectory_columns(traj: Trajectory) -> tuple[list[str], list[np.ndarray]]:
    n = traj.dimension
    prefix = "v" if traj.companion_kind == "velocity" else "y"
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"{prefix}_{i + 1}" for i in range(n)]
    columns = [traj.times, traj.x, traj.companion]
    for name in ("f_gap", "grad_norm", "dist"):
        values = getattr(traj, name)
        if values is not None:
            header.append(name)
            columns.append(values)
    return header, columns


def _report_rows(result: ScenarioResult) -> list[list[Any]]:
    rows: list[list[Any]] = [
        ["scenario", result.config.name],
        ["kind", result.trajectory.kind.value],
        ["objective", result.objective.name],
        ["fbar", result.objective.known_min_value],
        ["samples", result.trajectory.times.size],
    ]
    if result.signal.delta is not None:
        rows.append(["delta", result.signal.delta])
    if result.rate is not None:
        rows += [
            ["rate.window", f"{_fmt(result.rate.window[0])}:{_fmt(result.rate.window[1])}"],
            ["rate.slope", result.rate.slope],
            ["rate.residual_rms", result.rate.residual_rms],
            ["rate.classification", result.rate.classification],
        ]
    for cert in result.certifications:
        key = f"energy.{cert.energy}"
        rows += [
            [f"{key}.status", cert.status],
            [f"{key}.violations", cert.violations],
            [f"{key}.hypotheses", cert.hypotheses],
            [f"{key}.t1", cert.t1],
        ]
        if cert.slack is not None:
            rows.append([f"{key}.bound_slack", cert.slack])
        if cert.detail:
            rows.append([f"{key}.detail", cert.detail])
    for name, value in analysis.integral_estimates(result.trajectory).items():
        rows.append([f"integral.{name}", value])
    return rows


def plot_script(result: ScenarioResult) -> str:
    lines = [
        "# gnuplot script; run from this directory",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1200,500",
        "set output 'plot.png'",
        "set multiplot layout 1,2",
    ]
    header, _ = trajectory_columns(result.trajectory)
    if "f_gap" in header:
        lines += [
            "set logscale xy",
            "set title 'f(x(t)) - fbar'",
            f"plot 'trajectory.csv' using 1:{header.index('f_gap') + 1} with lines",
            "unset logscale",
        ]
    if "dist" in header:
        lines += [
            "set logscale y",
            "set title '|x(t) - x*|'",
            f"plot 'trajectory.csv' using 1:{header.index('dist') + 1} with lines",
            "unset logscale",
        ]
    lines.append("unset multiplot")
    for name in result.energies:
        lines += [
            f"set output 'energy_{name}.png'",
            f"set title 'energy {name}'",
            f"plot 'energy_{name}.csv' using 1:2 with lines",
        ]
    return "\n".join(lines) + "\n"


def write_artifacts(result: ScenarioResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    header, columns = trajectory_columns(result.trajectory)
    write_columns(out_dir / "trajectory.csv", header, columns)
    for name, trace in result.energies.items():
        write_columns(
            out_dir / f"energy_{name}.csv",
            ["t", "value", "tail_integral"],
            [trace.times, trace.values, trace.tail_integrals],
        )
    write_rows(out_dir / "report.csv", ["quantity", "value"], _report_rows(result))
    (out_dir / "plot.gp").write_text(plot_script(result), encoding="utf-8")


# ---------------------------------------------------------------------------
# Robustness grid
# ---------------------------------------------------------------------------

SECTION6_DELTAS = (0.1, 1.1, 3.1)
SECTION6_X0 = (-10.0, 20.0)
SECTION6_V0 = (5.0, -5.0)
SECTION6_HORIZON = 50.0
SECTION6_SAMPLES = 2000
SECTION6_WINDOW = (10.0, 50.0)

COMPARISON_HEADER = [
    "run_id",
    "kind",
    "objective",
    "delta",
    "slope",
    "classification",
    "final_f_gap",
    "final_dist",
    "fbar",
]


def section6_scenarios() -> list[ScenarioConfig]:
    """The 12-run grid: two systems on the quartic plus two inclusions on its l1 variant, three deltas each."""
    runs = [
        (SystemKind.ISEHD, ObjectiveConfig("quartic"), {"gamma": 0.0}, ("W", "fast", "eps")),
        (SystemKind.ISIHD, ObjectiveConfig("quartic"), {"gamma": 1.0}, ("implicit-convex",)),
        (SystemKind.ISEHD_INCLUSION, ObjectiveConfig("quartic-l1", {"weight": 0.1}), {"gamma": 0.0}, ("lambda",)),
        (SystemKind.ISIHD_INCLUSION, ObjectiveConfig("quartic-l1", {"weight": 0.1}), {"gamma": 1.0}, ()),
    ]
    out = []
    for kind, objective, extra, energies in runs:
        prox = kind in (SystemKind.ISEHD_INCLUSION, SystemKind.ISIHD_INCLUSION)
        for delta in SECTION6_DELTAS:
            out.append(
                ScenarioConfig(
                    name=f"{kind.value}_{objective.id}_d{delta}",
                    objective=objective,
                    system=SystemConfig(kind.value, alpha=3.1, beta=1.0, t0=1.0, **extra),
                    perturbation=PerturbationConfig("cosine-decay", delta),
                    integrator=IntegratorSettings(
                        kind="prox" if prox else "dopri5",
                        output=OutputGrid("uniform", SECTION6_SAMPLES),
                    ),
                    initial=InitialData(SECTION6_X0, SECTION6_V0),
                    horizon=SECTION6_HORIZON,
                    energies=tuple(EnergyRequest(e) for e in energies),
                )
            )
    return out


def _comparison_row(result: ScenarioResult) -> list[Any]:
    traj = result.trajectory
    try:
        rate = analysis.fit_rate(traj.times, traj.f_gap, SECTION6_WINDOW)
        slope, label = rate.slope, rate.classification
    except DomainError:
        slope, label = None, "undetermined"
    return [
        result.config.name,
        traj.kind.value,
        result.objective.name,
        result.signal.delta,
        slope,
        label,
        float(traj.f_gap[-1]) if traj.f_gap is not None else None,
        float(traj.dist[-1]) if traj.dist is not None else None,
        result.objective.known_min_value,
    ]


def _run_section6_case(cfg: ScenarioConfig, out_dir: str) -> list[Any]:
    result = run_scenario(cfg, Path(out_dir) / cfg.name)
    return _comparison_row(result)


def section6_plot_script(names: list[str]) -> str:
    lines = [
        "# gnuplot script; run from this directory",
        "set datafile separator ','",
        "set terminal pngcairo size 1400,600",
        "set output 'section6.png'",
        "set multiplot layout 1,2",
        "set logscale xy",
        "set title 'f(x(t)) - fbar'",
        "plot " + ", \\\n     ".join(f"'{n}/trajectory.csv' using 1:'f_gap' with lines title '{n}'" for n in names),
        "unset logscale",
        "set logscale y",
        "set title '|x(t) - x*|'",
        "plot " + ", \\\n     ".join(f"'{n}/trajectory.csv' using 1:'dist' with lines title '{n}'" for n in names),
        "unset multiplot",
    ]
    return "\n".join(lines) + "\n"


def default_workers() -> int:
    return max(1, int(os.getenv(ENV_WORKERS, "1")))


def reproduce_section6(out_dir: str | Path | None = None, workers: int | None = None) -> list[list[Any]]:
    """Run the 12-run grid, write per-run artifacts, comparison.csv and plot.gp; return the comparison rows."""
    root = Path(out_dir) if out_dir is not None else default_output_root() / "section6"
    root.mkdir(parents=True, exist_ok=True)
    workers = default_workers() if workers is None else workers
    scenarios = section6_scenarios()
    logger.info("reproducing 12-run grid into %s with %d worker(s)", root, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_section6_case, scenarios, [str(root)] * len(scenarios)))
    else:
        rows = [_run_section6_case(cfg, str(root)) for cfg in scenarios]
    write_rows(root / "comparison.csv", COMPARISON_HEADER, rows)
    (root / "plot.gp").write_text(section6_plot_script([cfg.name for cfg in scenarios]), encoding="utf-8")
    return rows


def read_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a CSV written by ``write_columns``, keyed by header name."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise DomainError(f"{path}: header names {len(header)} columns, rows have {data.shape[1]}")
    return {name: data[:, i] for i, name in enumerate(header)}
