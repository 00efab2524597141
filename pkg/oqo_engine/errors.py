"""
Exception hierarchy for the operational-observable engine.
All errors derive from ValueError so callers that only guard against bad input keep working.
"""


class OQOError(ValueError):
    """Base class for every engine error."""


class InvalidDimensionError(OQOError):
    pass


class DimensionMismatchError(OQOError):
    pass


class CutoffError(OQOError):
    """A state or operator is not faithful at the chosen Fock cutoff."""


class NonHermitianError(OQOError):
    pass


class GridCoverageError(OQOError):
    """The classical grid does not carry the integrand (tail too heavy or not normalizable)."""


class SeriesConvergenceError(OQOError):
    pass


class ConfigError(OQOError):
    pass
