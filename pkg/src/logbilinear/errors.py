"""Exception and warning types raised across the package."""

from __future__ import annotations


class LogBilinearError(Exception):
    """Base class for every domain error raised by this package."""


class DomainError(LogBilinearError, ValueError):
    """An input lies outside the domain of the operation (e.g. a zero cell)."""


class IdentifiabilityError(LogBilinearError):
    """The association parameter is not identifiable for the given scores."""

    def __init__(self, message: str, factor: str | None = None):
        super().__init__(message)
        self.factor = factor


class SingularBasisError(LogBilinearError):
    """A projection basis does not have full column rank."""

    def __init__(self, message: str, rank: int, columns: int):
        super().__init__(message)
        self.rank = rank
        self.columns = columns


class SingularBlockError(LogBilinearError):
    """A block of a partitioned matrix could not be inverted.

    ``block`` is ``"L"`` for the leading block and ``"N"`` for the Schur
    complement.
    """

    def __init__(self, message: str, block: str):
        super().__init__(message)
        self.block = block


class SingularMatrixError(LogBilinearError):
    """A matrix that must be positive definite is (numerically) singular."""


class ConvergenceError(LogBilinearError):
    """An iterative procedure stopped before meeting its tolerance."""

    def __init__(self, message: str, iterations: int, diagnostics: dict | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.diagnostics = dict(diagnostics or {})


class RouteError(LogBilinearError):
    """One covariance representation failed inside a bundle computation."""

    def __init__(self, route: str, cause: Exception):
        super().__init__(f"covariance route {route!r} failed: {cause}")
        self.route = route
        self.cause = cause


class IllConditionedWarning(RuntimeWarning):
    """Emitted when a matrix is inverted with condition number above 1e12."""
