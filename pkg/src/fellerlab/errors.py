"""Exception types shared across the package."""


class FellerLabError(Exception):
    """Base class for all package errors."""


class DomainError(FellerLabError, ValueError):
    """A state lies outside the open state space U (or at the cemetery)."""


class ArgumentError(FellerLabError, ValueError):
    """Invalid argument combination (bad grids, margins, rates, ...)."""


class UnsupportedModelError(FellerLabError, ValueError):
    """Model configuration outside the supported class (e.g. infinite activity)."""


class QuadratureError(FellerLabError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the achieved residual in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericError(FellerLabError, RuntimeError):
    """A numerical consistency assertion failed (e.g. imaginary residue)."""


class DegenerateSampleError(FellerLabError, RuntimeError):
    """Monte Carlo sample carries no information (e.g. all paths dead)."""
