"""Exception hierarchy shared by every gaugeopt module."""


class GaugeOptError(Exception):
    """Base class for all gaugeopt failures."""


class InvalidInput(GaugeOptError, ValueError):
    """Malformed or out-of-contract input data."""


class ParseError(InvalidInput):
    """An instance or solution file could not be parsed.

    ``line`` and ``field`` locate the problem when known.
    """

    def __init__(self, message, *, line=None, field=None):
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class InvalidShift(InvalidInput):
    """The supplied dual point does not make the shifted cost PSD."""


class NoConvergence(GaugeOptError):
    """An iterative method hit its iteration cap; ``best`` holds its best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Diverged(GaugeOptError):
    """Residuals of an iterative scheme blew up."""


class PencilUnbounded(GaugeOptError):
    """No multiple of C dominates Z: the pencil value is +infinity."""


class DegeneratePolar(GaugeOptError):
    """The attaining direction lies in the null space of C and cannot be normalized."""


class NoNontrivialSolution(GaugeOptError):
    """The dual point cannot produce a decomposition with both parts nonzero."""


class EmptyNullSpace(GaugeOptError):
    """The recovery null space is empty; the dual point is too inexact."""


class EssentiallyInfeasibleRegion(GaugeOptError):
    """Every evaluated dual iterate had an infinite objective."""
