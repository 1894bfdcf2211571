"""Exception hierarchy.

Every error raised on purpose by the package derives from ``DenseTSPError``.
The CLI maps the classes below onto its exit codes.
"""


class DenseTSPError(Exception):
    pass


class ParameterError(DenseTSPError, ValueError):
    """Invalid or inadmissible input parameters."""


class DegenerateInputError(ParameterError):
    pass


class ContainmentError(ParameterError):
    """A point lies outside the square it was declared to be in."""


class ConnectivityError(ParameterError):
    pass


class PreconditionError(ParameterError):
    pass


class InapplicableError(ParameterError):
    """A bound was requested outside the hypotheses under which it holds."""


class RegimeError(ParameterError):
    pass


class CapabilityError(DenseTSPError):
    """The request exceeds what a solver supports (e.g. exact TSP size cap)."""


class PolicyError(CapabilityError):
    pass


class InvariantViolation(DenseTSPError, AssertionError):
    """A proven inequality failed on a concrete instance."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed
