from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from fracbpx.models.schemas import SolveReport


class NotPositiveDefiniteError(ValueError):
    """A matrix or operator that must be SPD failed a factorization or eigenvalue check."""


class SolverBreakdownError(RuntimeError):
    """PCG met a nonpositive curvature or preconditioned residual.

    The partial report up to the failing iteration is attached so callers can
    still record how far the solve got.
    """

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report
