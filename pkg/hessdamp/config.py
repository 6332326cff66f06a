"""Scenario files: YAML in, frozen dataclasses out, validated before any run.

A scenario names an objective, a system, a perturbation, integrator settings,
initial data, a horizon and the energies to certify. The grammar is documented
in docs/03-api/scenario-config.md.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from hessdamp import objectives as objs
from hessdamp import perturbations as perts
from hessdamp.dynamics import EXPLICIT_KINDS, HEAVY_BALL_KINDS, IMPLICIT_KINDS, SystemKind, SystemSpec
from hessdamp.errors import ConfigError, HessdampError
from hessdamp.integrators import IntegratorConfig
from hessdamp.objectives import Objective
from hessdamp.perturbations import PerturbationSignal

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "HESSDAMP_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "out"

ENERGY_NAMES = ("W", "fast", "eps", "lambda", "sc", "implicit-convex")
PERTURBATION_KINDS = ("zero", "cosine-decay")
INTEGRATOR_KINDS = ("dopri5", "prox")
# rk45 names the same embedded Dormand-Prince 5(4) pair.
INTEGRATOR_ALIASES = {"rk45": "dopri5"}
FORMS = ("auto", "second-order", "first-order")
OUTPUT_KINDS = ("uniform", "steps")


def default_output_root() -> Path:
    return Path(os.getenv(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR))


def _table(data: Any, section: str) -> dict[str, Any]:
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{section}: expected a table, got {type(data).__name__}")
    return dict(data)


def _reject_unknown(data: Mapping[str, Any], allowed: tuple[str, ...], section: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {unknown}; allowed {list(allowed)}")


def _float(value: Any, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _vector(value: Any, key: str) -> tuple[float, ...]:
    if value is None:
        raise ConfigError(f"{key}: missing")
    if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
        raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
    return tuple(_float(v, key) for v in value)


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ObjectiveConfig:
    id: str
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Any) -> ObjectiveConfig:
        data = _table(data, "objective")
        _reject_unknown(data, ("id", "params"), "objective")
        if "id" not in data:
            raise ConfigError("objective.id: missing")
        params: dict[str, Any] = {}
        for k, v in _table(data.get("params"), "objective.params").items():
            key = f"objective.params.{k}"
            params[k] = _vector(v, key) if isinstance(v, list) else _float(v, key)
        return cls(id=str(data["id"]), params=params)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "params": _plain(self.params)}

    def build(self) -> Objective:
        return objs.make_objective(self.id, self.params)


@dataclass(frozen=True)
class SystemConfig:
    kind: str
    alpha: float = 3.1
    beta: float = 1.0
    gamma: float = 0.0
    t0: float = 1.0

    @classmethod
    def from_dict(cls, data: Any) -> SystemConfig:
        data = _table(data, "system")
        _reject_unknown(data, ("kind", "alpha", "beta", "gamma", "t0"), "system")
        if "kind" not in data:
            raise ConfigError("system.kind: missing")
        kind = str(data["kind"])
        if kind not in {k.value for k in SystemKind}:
            raise ConfigError(f"system.kind: unknown kind {kind!r}; expected one of {[k.value for k in SystemKind]}")
        nums = {k: _float(data[k], f"system.{k}") for k in ("alpha", "beta", "gamma", "t0") if k in data}
        return cls(kind=kind, **nums)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "t0": self.t0}

    def build(self) -> SystemSpec:
        return SystemSpec(SystemKind(self.kind), alpha=self.alpha, beta=self.beta, gamma=self.gamma, t0=self.t0)


@dataclass(frozen=True)
class PerturbationConfig:
    kind: str = "zero"
    delta: float | None = None
    components: str | tuple[int, ...] = "all"

    @classmethod
    def from_dict(cls, data: Any) -> PerturbationConfig:
        data = _table(data, "perturbation")
        _reject_unknown(data, ("kind", "delta", "components"), "perturbation")
        kind = str(data.get("kind", "zero"))
        if kind not in PERTURBATION_KINDS:
            raise ConfigError(f"perturbation.kind: unknown kind {kind!r}; expected one of {list(PERTURBATION_KINDS)}")
        delta = None if data.get("delta") is None else _float(data["delta"], "perturbation.delta")
        if kind == "cosine-decay" and delta is None:
            raise ConfigError("perturbation.delta: required for cosine-decay")
        comps = data.get("components", "all")
        if comps != "all":
            if not isinstance(comps, list):
                raise ConfigError(f"perturbation.components: expected 'all' or a list of indices, got {comps!r}")
            comps = tuple(int(c) for c in comps)
        return cls(kind=kind, delta=delta, components=comps)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.delta is not None:
            out["delta"] = self.delta
        out["components"] = _plain(self.components)
        return out

    def build(self, dimension: int) -> PerturbationSignal:
        if self.kind == "zero":
            return perts.zero_signal(dimension)
        return perts.cosine_decay(float(self.delta), dimension, self.components)


@dataclass(frozen=True)
class OutputGrid:
    kind: str = "uniform"
    n: int = 2000

    @classmethod
    def from_dict(cls, data: Any) -> OutputGrid:
        data = _table(data, "integrator.output")
        _reject_unknown(data, ("kind", "n"), "integrator.output")
        kind = str(data.get("kind", "uniform"))
        if kind not in OUTPUT_KINDS:
            raise ConfigError(f"integrator.output.kind: expected one of {list(OUTPUT_KINDS)}, got {kind!r}")
        n = int(data.get("n", 2000))
        if n < 2:
            raise ConfigError(f"integrator.output.n: need at least 2 samples, got {n}")
        return cls(kind=kind, n=n)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "n": self.n}

    def times(self, t0: float, horizon: float) -> np.ndarray | None:
        return np.linspace(t0, horizon, self.n) if self.kind == "uniform" else None


@dataclass(frozen=True)
class IntegratorSettings:
    kind: str = "dopri5"
    form: str = "auto"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_init: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 0.1
    h: float = 1e-3
    output: OutputGrid = field(default_factory=OutputGrid)

    @classmethod
    def from_dict(cls, data: Any) -> IntegratorSettings:
        data = _table(data, "integrator")
        keys = ("kind", "form", "rel_tol", "abs_tol", "h_init", "h_min", "h_max", "h", "output")
        _reject_unknown(data, keys, "integrator")
        kind = str(data.get("kind", "dopri5"))
        kind = INTEGRATOR_ALIASES.get(kind, kind)
        if kind not in INTEGRATOR_KINDS:
            known = [*INTEGRATOR_KINDS, *INTEGRATOR_ALIASES]
            raise ConfigError(f"integrator.kind: expected one of {known}, got {kind!r}")
        form = str(data.get("form", "auto"))
        if form not in FORMS:
            raise ConfigError(f"integrator.form: expected one of {list(FORMS)}, got {form!r}")
        nums = {k: _float(data[k], f"integrator.{k}") for k in keys[2:8] if k in data}
        return cls(kind=kind, form=form, output=OutputGrid.from_dict(data.get("output")), **nums)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "form": self.form,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "h_init": self.h_init,
            "h_min": self.h_min,
            "h_max": self.h_max,
            "h": self.h,
            "output": self.output.to_dict(),
        }

    def build(self, t0: float, horizon: float) -> IntegratorConfig:
        return IntegratorConfig(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            h_init=self.h_init,
            h_min=self.h_min,
            h_max=self.h_max,
            output_times=self.output.times(t0, horizon),
        )


@dataclass(frozen=True)
class InitialData:
    x0: tuple[float, ...]
    v0: tuple[float, ...] | None = None
    y0: tuple[float, ...] | None = None

    @classmethod
    def from_dict(cls, data: Any) -> InitialData:
        data = _table(data, "initial")
        _reject_unknown(data, ("x0", "v0", "y0"), "initial")
        if "v0" in data and "y0" in data:
            raise ConfigError("initial: give either v0 or y0, not both")
        return cls(
            x0=_vector(data.get("x0"), "initial.x0"),
            v0=_vector(data["v0"], "initial.v0") if "v0" in data else None,
            y0=_vector(data["y0"], "initial.y0") if "y0" in data else None,
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"x0": list(self.x0)}
        if self.v0 is not None:
            out["v0"] = list(self.v0)
        if self.y0 is not None:
            out["y0"] = list(self.y0)
        return out


@dataclass(frozen=True)
class EnergyRequest:
    name: str
    params: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_item(cls, item: Any) -> EnergyRequest:
        if isinstance(item, str):
            name, params = item, {}
        else:
            table = _table(item, "energies[]")
            if "name" not in table:
                raise ConfigError("energies[]: table entries need a name")
            name = str(table.pop("name"))
            params = {k: _float(v, f"energies.{name}.{k}") for k, v in table.items()}
        if name not in ENERGY_NAMES:
            raise ConfigError(f"energies: unknown energy {name!r}; expected one of {list(ENERGY_NAMES)}")
        return cls(name=name, params=params)

    def to_item(self) -> str | dict[str, Any]:
        return {"name": self.name, **self.params} if self.params else self.name


_TOP_KEYS = (
    "name",
    "objective",
    "system",
    "perturbation",
    "integrator",
    "initial",
    "horizon",
    "energies",
    "output_dir",
)


@dataclass(frozen=True)
class ScenarioConfig:
    objective: ObjectiveConfig
    system: SystemConfig
    initial: InitialData
    horizon: float
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    energies: tuple[EnergyRequest, ...] = ()
    output_dir: str | None = None
    name: str = "scenario"

    @classmethod
    def from_dict(cls, data: Any) -> ScenarioConfig:
        data = _table(data, "scenario")
        _reject_unknown(data, _TOP_KEYS, "scenario")
        for key in ("objective", "system", "initial", "horizon"):
            if key not in data:
                raise ConfigError(f"{key}: missing")
        energies = data.get("energies") or []
        if not isinstance(energies, list):
            raise ConfigError("energies: expected a list")
        cfg = cls(
            objective=ObjectiveConfig.from_dict(data["objective"]),
            system=SystemConfig.from_dict(data["system"]),
            initial=InitialData.from_dict(data["initial"]),
            horizon=_float(data["horizon"], "horizon"),
            perturbation=PerturbationConfig.from_dict(data.get("perturbation")),
            integrator=IntegratorSettings.from_dict(data.get("integrator")),
            energies=tuple(EnergyRequest.from_item(e) for e in energies),
            output_dir=None if data.get("output_dir") is None else str(data["output_dir"]),
            name=str(data.get("name", "scenario")),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "objective": self.objective.to_dict(),
            "system": self.system.to_dict(),
            "perturbation": self.perturbation.to_dict(),
            "integrator": self.integrator.to_dict(),
            "initial": self.initial.to_dict(),
            "horizon": self.horizon,
            "energies": [e.to_item() for e in self.energies],
        }
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    # -- construction helpers -------------------------------------------

    def build_objective(self) -> Objective:
        return self.objective.build()

    def build_spec(self) -> SystemSpec:
        return self.system.build()

    def build_signal(self, dimension: int) -> PerturbationSignal:
        return self.perturbation.build(dimension)

    def build_integrator(self) -> IntegratorConfig:
        return self.integrator.build(self.system.t0, self.horizon)

    def resolve_output_dir(self, override: str | Path | None = None) -> Path:
        if override is not None:
            return Path(override)
        if self.output_dir is not None:
            return Path(self.output_dir)
        return default_output_root() / self.name

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        """Check ranges and cross-references against the preconditions of each module."""
        try:
            obj = self.build_objective()
            spec = self.build_spec()
            self.build_signal(obj.dimension)
            self.build_integrator()
        except ConfigError:
            raise
        except HessdampError as exc:
            raise ConfigError(str(exc)) from exc

        if not self.horizon > spec.t0:
            raise ConfigError(f"horizon: must exceed system.t0={spec.t0}, got {self.horizon}")
        n = obj.dimension
        for key in ("x0", "v0", "y0"):
            vec = getattr(self.initial, key)
            if vec is not None and len(vec) != n:
                raise ConfigError(f"initial.{key}: objective {obj.name!r} has dimension {n}, got {len(vec)}")
        kind = spec.kind
        if self.integrator.kind == "prox" and kind not in (SystemKind.ISEHD_INCLUSION, SystemKind.ISIHD_INCLUSION):
            raise ConfigError(f"integrator.kind: 'prox' integrates inclusion kinds only, got {kind}")
        if not obj.is_smooth and kind not in (SystemKind.ISEHD_INCLUSION, SystemKind.ISIHD_INCLUSION):
            raise ConfigError(f"system.kind: objective {obj.name!r} is non-smooth; use an inclusion kind")
        for req in self.energies:
            self._validate_energy(req, spec)

    def _validate_energy(self, req: EnergyRequest, spec: SystemSpec) -> None:
        kind, alpha = spec.kind, spec.alpha
        where = f"energies.{req.name}"
        if req.name in ("W", "fast", "eps", "lambda") and kind not in EXPLICIT_KINDS:
            raise ConfigError(f"{where}: needs an explicit-Hessian system, got {kind}")
        if req.name == "implicit-convex" and kind not in IMPLICIT_KINDS:
            raise ConfigError(f"{where}: needs an implicit-Hessian system, got {kind}")
        if req.name == "sc" and kind not in HEAVY_BALL_KINDS:
            raise ConfigError(f"{where}: needs a heavy-ball system, got {kind}")
        if req.name in ("fast", "eps", "implicit-convex") and not alpha > 3:
            raise ConfigError(f"{where}: hypothesis α > 3 not met (alpha={alpha})")
        if req.name == "eps" and "eps" in req.params and not 0 < req.params["eps"] < alpha - 3:
            raise ConfigError(f"{where}: hypothesis 0 < ε < α - 3 not met (eps={req.params['eps']})")
        if req.name == "lambda":
            lam = req.params.get("lambda", 2.0)
            if not (alpha >= 3 and 2 <= lam <= alpha - 1):
                raise ConfigError(f"{where}: hypothesis 2 ≤ λ ≤ α - 1 not met (lambda={lam}, alpha={alpha})")


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text, source=str(path))


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    cfg = ScenarioConfig.from_dict(data)
    logger.debug("loaded scenario %r from %s", cfg.name, source)
    return cfg


def dump_scenario(cfg: ScenarioConfig, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
