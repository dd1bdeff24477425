"""Exception hierarchy shared by the solvers and the command line."""

from __future__ import annotations


class GravVortexError(Exception):
    """Base class for all library errors."""


class ConfigurationError(GravVortexError, ValueError):
    """Invalid grid, problem or run configuration."""


class GridMismatchError(GravVortexError, ValueError):
    """A field was used with a grid it does not belong to."""


class InvalidDivisorError(GravVortexError, ValueError):
    """Colliding points, non-positive multiplicities or zero degree."""


class SectionConstructionError(GravVortexError):
    """A section density failed its own consistency checks."""


class SolvabilityError(GravVortexError):
    """A Poisson right-hand side has non-negligible mean."""


class NoSolutionExists(GravVortexError):
    """An existence gate (strict Bradlow bound and friends) failed."""

    def __init__(self, message: str, **values):
        super().__init__(message)
        self.values = values


class ConvergenceFailure(GravVortexError):
    """Newton iteration stagnated or ran out of iterations."""

    def __init__(self, message: str, history=None, state=None):
        super().__init__(message)
        self.history = list(history or [])
        self.state = state


class SingularJacobian(GravVortexError):
    """The linearization has a (numerically) nontrivial kernel.

    ``kernel`` holds the near-kernel direction as field objects when available,
    ``sigma`` the smallest singular value found.
    """

    def __init__(self, message: str, sigma: float, kernel=None, details=None):
        super().__init__(message)
        self.sigma = sigma
        self.kernel = kernel
        self.details = dict(details or {})


class OracleRefused(GravVortexError, ValueError):
    """Brute-force oracle asked to run beyond its size limit."""


class ShootingFailure(GravVortexError):
    """The radial shooting oracle could not bracket a root."""
