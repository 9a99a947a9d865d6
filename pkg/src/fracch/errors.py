"""Exception hierarchy shared across the package."""


class FracchError(Exception):
    """Base class for all package errors."""


class ParameterError(FracchError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ShapeError(FracchError, ValueError):
    """Array dimensions or grids do not match."""


class ModelError(FracchError, ValueError):
    """A model ingredient is invalid (e.g. negative mobility)."""


class SolverError(FracchError, RuntimeError):
    """A linear or nonlinear solve failed to converge.

    Attributes carry diagnostics for the caller: ``iterations`` and
    ``residual`` (final residual norm), plus ``residual_history`` for
    Newton failures.
    """

    def __init__(self, message, iterations=None, residual=None,
                 residual_history=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.residual_history = residual_history


class ConfigError(FracchError, ValueError):
    """A run configuration violates the documented schema."""
