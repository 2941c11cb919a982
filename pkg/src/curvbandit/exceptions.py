"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point lies outside the domain of a regularizer or estimator."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    The offending inputs are kept on the instance for post-mortem work.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ContractViolation(RuntimeError):
    """A strategy tried to read feedback the protocol withheld."""


class ReservoirNotReady(LookupError):
    """Some arm has no sample yet, so the running-mean estimate is undefined."""


class AuditError(AssertionError):
    """A debug-mode invariant failed along a real trajectory."""
