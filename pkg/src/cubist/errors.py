"""Exception and warning types shared across the package."""


class CubistError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(CubistError, ValueError):
    """A truncated-space dimension is too small or inconsistent."""


class PreconditionError(CubistError, ValueError):
    """An operation was called on a state that violates its contract."""


class OverflowGuardError(CubistError, ValueError):
    """Requested evaluation outside the numerically safe domain."""


class CoverageError(CubistError, ValueError):
    """A grid does not cover the support required by the operation."""


class SingularPhaseError(CubistError, ValueError):
    """The homodyne phase hit cos(theta) = 0 where formulas are singular."""


class TruncationError(CubistError, RuntimeError):
    """Fock-space truncation lost more probability mass than allowed."""


class ConvergenceError(CubistError, RuntimeError):
    """An iterative search failed to converge.

    Carries the best point found so far in ``best`` so callers can inspect
    or resume.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TruncationRiskWarning(UserWarning):
    """Result is formally valid but close to the truncation boundary."""
