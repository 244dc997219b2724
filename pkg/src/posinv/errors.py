"""Exception types shared across the package."""


class PosinvError(Exception):
    """Base class for all package errors."""


class ModelError(PosinvError):
    """Invalid model input: bad file syntax, dimension mismatch, contract violation."""


class NumericsError(PosinvError):
    """A numerical routine failed: non-convergence, overflow, degenerate system."""


class SolverError(NumericsError):
    """Scalar solver failed to reach tolerance; carries the best bracket found."""

    def __init__(self, message, bracket=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.residual = residual


class IntegrationError(NumericsError):
    """A step of a trajectory failed; carries the partial trajectory and cause."""

    def __init__(self, message, trajectory=None, cause=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause
