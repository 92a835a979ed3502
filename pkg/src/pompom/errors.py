"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so keep the classes coarse.
"""


class PompomError(Exception):
    """Base class for all package errors."""


class ValidationError(PompomError, ValueError):
    """Malformed input: dimension mismatch, bad weights, bad tables."""


class InfiniteDistanceError(ValidationError):
    """Distance to an empty property is undefined."""


class CapExceededError(PompomError):
    """An enumeration or materialization cap would be exceeded."""


class HypothesisError(PompomError):
    """A lemma-level precondition does not hold for the given input.

    ``report`` carries whatever diagnostic data the raising routine collected.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report if report is not None else {}
