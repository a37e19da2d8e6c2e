"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class ResourceError(RuntimeError):
    """A problem size exceeds a configured cap."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class SolverError(NumericalError):
    def __init__(self, message, iterates=None):
        super().__init__(message)
        self.iterates = iterates


class ConsistencyError(RuntimeError):
    """An internal invariant was violated beyond tolerance."""


class OptimizerAborted(NumericalError):
    """The optimization loop stopped early; ``trace`` holds the records so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
