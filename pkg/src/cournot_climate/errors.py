"""Exception hierarchy shared by the solver modules."""


class ModelError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ModelError, ValueError):
    """Input outside the region where a formula is defined."""


class InfeasibleCandidate(ModelError):
    """A candidate color partition fails its own consistency checks."""


class SolverError(ModelError, RuntimeError):
    """The equilibrium solver reached a state that indicates a bug."""


class ConvergenceError(SolverError):
    """Damped best-response iteration did not converge.

    ``residual`` carries the last best-response gap so the caller can decide
    whether a smaller damping factor is worth a retry.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class HypothesisViolation(ModelError):
    """A belief schedule breaks the assumption a long-run limit relies on."""

    def __init__(self, message: str, round_index: int | None = None):
        super().__init__(message)
        self.round_index = round_index


class BracketError(ModelError):
    """Root bracketing failed although a root is guaranteed to exist."""


class UndefinedDirection(ModelError):
    """A derivative was requested along a direction with no firms in it."""


class RegimeInstability(ModelError):
    """Every admissible perturbation step changes the color partition."""
