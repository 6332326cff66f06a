"""Console commands for the Hessian damping lab."""

from cli._runner import banner, run

__all__ = ["banner", "run"]
