"""Exception types shared across the package.

Bad user input (configs, shapes, CLI arguments, serialized payloads) derives
from ValidationError; failures of numeric procedures derive from
NumericError.  The CLI maps ValidationError to exit code 1 and NumericError
to exit code 2.
"""


class PushOptError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(PushOptError):
    """Invalid configuration, arguments, or serialized payloads."""


class DimensionMismatchError(ValidationError):
    """Operands whose shapes cannot be combined."""


class ConfigError(ValidationError):
    """Malformed or contradictory experiment configuration."""


class InvalidRateError(ValidationError):
    """A rate or stepsize parameter outside its admissible range."""


class NonQuadraticError(ValidationError):
    """An operation restricted to quadratic-Hessian costs received something else."""


class NumericError(PushOptError):
    """A numeric procedure failed to produce a usable result."""


class NoConvergenceError(NumericError):
    """An iterative solver exhausted its iteration budget."""


class FailedConnectivityError(NumericError):
    """Random digraph generation never produced a strongly connected graph."""


class FailedAggregatePDError(NumericError):
    """Cost generation never produced a positive definite aggregate Hessian."""


class SingularSystemError(NumericError):
    """A dense linear solve hit a (numerically) singular system."""


class NotContractiveError(NumericError):
    """A map expected to contract measured a Lipschitz constant >= 1."""


class NonpositiveYError(NumericError):
    """Push-sum weights lost positivity (impossible for a valid mixing matrix)."""


class DegenerateMixingError(NumericError):
    """A quantity is undefined for this mixing matrix (e.g. fully mixed in one step)."""


class AllDivergedError(NumericError):
    """Every stepsize candidate in a tuning grid failed to make progress."""


class ScenarioAssertionError(NumericError):
    """An inline scenario assertion failed; artifacts were still written."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
