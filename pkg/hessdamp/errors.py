"""Exception hierarchy for the Hessian-damping lab.

Every failure raised by the library derives from ``HessdampError`` so the
console commands can report it with one ``except`` clause.
"""

from __future__ import annotations


class HessdampError(Exception):
    """Base class for all library errors."""


class DimensionError(HessdampError, ValueError):
    """A point does not match the objective or signal dimension."""


class HessianUnavailableError(HessdampError):
    """The objective is not C^2, so no Hessian-vector product exists."""


class ProxError(HessdampError):
    """A scalar proximal solve failed to converge."""


class DomainError(HessdampError, ValueError):
    """A time or parameter lies outside the domain of a map."""


class QuadratureError(HessdampError):
    """Adaptive quadrature could not reach its tolerance."""


class IntegrationError(HessdampError):
    """A time stepper stopped before the end of its span."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class HypothesisError(HessdampError):
    """A theorem hypothesis needed for certification is violated."""

    def __init__(self, hypothesis: str, detail: str = ""):
        message = f"hypothesis violated: {hypothesis}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.hypothesis = hypothesis


class PoleError(HessdampError, ValueError):
    """The implicit Lyapunov coefficient a(t) is evaluated at or before its pole."""


class ConfigError(HessdampError, ValueError):
    """A scenario file is malformed or out of range."""


class HypothesisWarning(UserWarning):
    """A hypothesis is breached but the run may continue."""
