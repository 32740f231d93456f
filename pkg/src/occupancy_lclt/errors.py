"""Exception types shared across the package."""

import warnings


class InvalidArgument(ValueError):
    """An argument is outside its documented domain."""


class PreconditionViolation(ValueError):
    """A documented precondition does not hold for the given inputs."""


class DegenerateInput(ValueError):
    """The input is valid but degenerate (e.g. zero mean, a single cell)."""


class ResourceLimit(RuntimeError):
    """A configured size or retry cap was exceeded."""


class NumericTolerance(ArithmeticError):
    """A numerical check exceeded its tolerance."""


class InternalInvariantViolation(AssertionError):
    """A property that holds by construction was found to be violated."""


class ReliabilityWarning(UserWarning):
    """An estimate was produced but is flagged as unreliable."""


def warn_unreliable(msg):
    warnings.warn(msg, ReliabilityWarning, stacklevel=3)
