"""Exception hierarchy for the impdens package."""


class ImpdensError(Exception):
    """Base class for all impdens errors."""


class DegenerateInterval(ImpdensError):
    """Grid interval is empty or has too few points."""


class EmptyQuotes(ImpdensError):
    """A kernel matrix needs at least one quote."""


class GridMismatch(ImpdensError):
    """Two gridded objects do not live on the same grid."""


class DimensionMismatch(ImpdensError):
    """Vector or matrix dimensions are inconsistent."""


class NumericalFailure(ImpdensError):
    """A numerical routine (e.g. SVD) did not converge."""


class RankOutOfRange(ImpdensError):
    """Requested truncation rank is outside [1, min(M, N)]."""


class SingularKernel(ImpdensError):
    """Smallest singular value is numerically zero."""


class PriceOutOfBounds(ImpdensError):
    """Option price violates its no-arbitrage bounds."""


class NoConvergence(ImpdensError):
    """Iterative solver exhausted its budget without converging."""


class InfeasibleConstraints(ImpdensError):
    """The constraint set {phi >= 0, w.phi = 1} is empty."""


class OutOfSupport(ImpdensError):
    """Query point lies outside the density grid (density is 0 there)."""


class NoConvergedEntries(ImpdensError):
    """A scan produced no converged solve to select from."""


class ParseError(ImpdensError):
    """Malformed quote file; carries offending line numbers."""

    def __init__(self, message, lines=()):
        super().__init__(message)
        self.lines = tuple(lines)


class UnknownFamily(ImpdensError):
    """Volatility family string not recognized."""


class EmptyFile(ImpdensError):
    """Quote file contains no data rows."""
