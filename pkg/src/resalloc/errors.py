"""Exception hierarchy shared by the solvers and the CLI."""


class ResallocError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ResallocError, ValueError):
    """An argument lies outside the domain of a function (non-finite, negative...)."""


class DerivativeSingularityError(DomainError):
    """The requested derivative diverges at the given point."""


class NoInformationError(ResallocError, ValueError):
    """Every source has infinite loss, so nothing can be aggregated."""


class UnobservableCoordinateError(ResallocError, ValueError):
    """Some coordinate is covered by no source with finite loss."""

    def __init__(self, coordinate: int, message: str | None = None):
        self.coordinate = coordinate
        super().__init__(message or f"coordinate {coordinate} is not observed by any usable source")


class InfeasibleConstraintError(ResallocError, ValueError):
    """The resource constraint set is empty."""


class RankDeficiencyError(ResallocError, ValueError):
    """The design matrix does not have full column rank."""


class ShapeMismatchError(ResallocError, ValueError):
    """Array shapes do not agree with the problem description."""
