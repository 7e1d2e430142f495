"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A precondition on arguments or constructed data was violated."""


class MalformedInputError(ValueError):
    """An input file could not be parsed or failed schema validation."""


class InfeasibleError(RuntimeError):
    """No profile can satisfy the requested time budget.

    ``min_buckets`` carries the smallest achievable integer time total when
    the failure was detected by the discrete solver, else None.
    """

    def __init__(self, message: str, min_buckets: int | None = None):
        super().__init__(message)
        self.min_buckets = min_buckets


class EnumerationCapError(RuntimeError):
    """Brute-force enumeration was refused because the instance is too large."""


class EvaluationError(RuntimeError):
    """An external or in-process evaluator failed to produce a score."""
