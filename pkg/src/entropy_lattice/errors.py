"""Exception hierarchy for the package."""


class EntropyLatticeError(Exception):
    """Base class for every error raised by this package."""


# lattice
class EmptyLattice(EntropyLatticeError):
    pass


class SizeOverflow(EntropyLatticeError):
    pass


class DegenerateNormal(EntropyLatticeError):
    pass


class EmptySchedule(EntropyLatticeError):
    pass


# entropy models
class DomainError(EntropyLatticeError):
    pass


class StencilOutOfDomain(DomainError):
    pass


class SingularHessian(EntropyLatticeError):
    pass


# exact engine
class EmptyDomain(EntropyLatticeError):
    pass


class NonFiniteTerm(EntropyLatticeError):
    pass


class TypeMismatch(EntropyLatticeError):
    pass


# laplace
class AmbiguousMaximum(EntropyLatticeError):
    pass


class FlatMaximum(EntropyLatticeError):
    pass


class DivisibilityViolation(EntropyLatticeError):
    pass


class NonNegativeDirectionalDerivative(EntropyLatticeError):
    pass


class NotNegativeDefinite(EntropyLatticeError):
    pass


class InvalidRadius(EntropyLatticeError):
    pass


class NewtonDivergence(EntropyLatticeError):
    pass


class UnsupportedBoundary(EntropyLatticeError):
    pass


# limits
class DivergentSeries(EntropyLatticeError):
    pass


class PreconditionViolated(EntropyLatticeError):
    pass


class UnsupportedPair(EntropyLatticeError):
    pass


class InsufficientData(EntropyLatticeError):
    pass


# asymptotics
class LengthMismatch(EntropyLatticeError):
    pass


class ZeroDenominator(EntropyLatticeError):
    pass


class NotInvertible(EntropyLatticeError):
    pass


# cli
class ConfigError(EntropyLatticeError):
    pass


class CapExceeded(EntropyLatticeError):
    pass
