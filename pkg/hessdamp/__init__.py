"""Inertial dynamics with Hessian-driven damping under perturbed gradients.

Simulation of the explicit and implicit Hessian-damped systems, their
heavy-ball and non-smooth variants, and runtime certification of the
Lyapunov energies that govern their convergence.
"""

from hessdamp.dynamics import SystemKind, SystemSpec, Trajectory
from hessdamp.errors import HessdampError, HypothesisError, HypothesisWarning
from hessdamp.integrators import IntegratorConfig, integrate_system
from hessdamp.objectives import Objective, make_objective
from hessdamp.perturbations import PerturbationSignal, cosine_decay, zero_signal

__all__ = [
    "HessdampError",
    "HypothesisError",
    "HypothesisWarning",
    "IntegratorConfig",
    "Objective",
    "PerturbationSignal",
    "SystemKind",
    "SystemSpec",
    "Trajectory",
    "cosine_decay",
    "integrate_system",
    "make_objective",
    "zero_signal",
]
