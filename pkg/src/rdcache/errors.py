"""Exception types raised across the package."""


class RDCacheError(ValueError):
    """Base class for all input and solver errors."""


class NegativeMass(RDCacheError):
    pass


class NotNormalized(RDCacheError):
    pass


class MissingZeroDistortionSymbol(RDCacheError):
    pass


class InfiniteDistortion(RDCacheError):
    pass


class EmptySubset(RDCacheError):
    pass


class IndexOutOfRange(RDCacheError):
    pass


class RhoOutOfRange(RDCacheError):
    pass


class InvalidPmf(RDCacheError):
    pass


class NoConvergence(RDCacheError):
    pass


class InfeasibleTarget(RDCacheError):
    pass


class InvalidCache(RDCacheError):
    pass


class InstanceTooLarge(RDCacheError):
    pass


class ConditionViolated(RDCacheError):
    """A candidate failed one or more of the lossy common-information conditions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(RDCacheError):
    pass
