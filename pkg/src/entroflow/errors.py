"""Exception taxonomy shared by all entroflow modules."""


class EntroflowError(Exception):
    """Base class for all entroflow errors."""


class InvalidInputError(EntroflowError):
    """Malformed argument: non-monotone grid, bad parameter, misaligned arrays."""


class DegenerateMetricError(EntroflowError):
    """Sphere radius vanished or went negative at an interior node."""


class OutOfDomainError(EntroflowError):
    """Requested radius or sample lies outside the truncated grid."""


class PreconditionError(EntroflowError):
    """Caller-side contract violated (e.g. non-unit L2 norm, non-unit mass)."""


class NumericalInconsistencyError(EntroflowError):
    """An exact discrete identity failed beyond tolerance."""


class InvalidDensityError(EntroflowError):
    """Density has negative entries beyond round-off."""


class DegenerateEnergyError(EntroflowError):
    """Dirichlet-plus-curvature energy collapsed to zero during iteration."""


class MassDriftError(EntroflowError):
    """Conjugate-heat mass left its conservation band (dt or grid too coarse)."""


class SingularityDetectedError(EntroflowError):
    """Sphere radius hit zero at an interior node during evolution."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class InsufficientDomainError(EntroflowError):
    """Outer truncation too close to the requested exterior radius."""


class DomainMonotonicityError(EntroflowError):
    """Infimum over a larger domain came out larger: solver bug."""
