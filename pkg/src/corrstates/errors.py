"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: ValidationError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PipelineError):
    """Invalid inputs, broken invariants, or unsatisfied preconditions."""


class DataError(PipelineError):
    """Unreadable or malformed input files (parse errors carry line numbers)."""


class NumericalError(PipelineError):
    """A numerical routine failed to converge or produced invalid output."""
