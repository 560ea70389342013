"""Exception types raised across the package."""


class BregVOptError(Exception):
    """Base class for all package errors."""


class DomainViolation(BregVOptError, ValueError):
    """A point lies outside the domain required by an operation."""


class ConjugateRangeError(BregVOptError, ValueError):
    """A dual point has no preimage under the kernel gradient."""


class UnsupportedCone(BregVOptError, ValueError):
    pass


class DegenerateDirection(BregVOptError, ValueError):
    """A direction is not in the interior of the ordering cone."""


class MissingConstant(BregVOptError):
    """A smoothness / convexity / kernel constant required by a check is absent."""


class NotSupercoercive(BregVOptError, ValueError):
    pass


class NonConvergence(BregVOptError, RuntimeError):
    pass


class InvalidStep(BregVOptError, ValueError):
    pass


class VacuousBound(BregVOptError):
    """The requested bound divides by a zero symmetry coefficient."""


class NotConverged(BregVOptError):
    pass


class DimensionTooLarge(BregVOptError, ValueError):
    pass


class InsufficientData(BregVOptError, ValueError):
    pass


class ParseError(BregVOptError, ValueError):
    def __init__(self, msg, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)


class ValidationError(BregVOptError, ValueError):
    def __init__(self, msg, field=None):
        self.field = field
        super().__init__(f"{field}: {msg}" if field else msg)
