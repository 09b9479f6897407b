"""Exception hierarchy shared by the solvers and the CLI."""


class XXZError(Exception):
    pass


class DomainError(XXZError, ValueError):
    """Input outside the parameter domain a routine supports."""


class SequenceValidationError(XXZError):
    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("identity check failed: " + ", ".join(self.failed))


class SolverError(XXZError):
    """Iteration or Newton solve that did not converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class DegeneracyError(SolverError):
    pass


class PoleError(XXZError, ArithmeticError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class BranchError(SolverError):
    pass


class TruncationError(XXZError):
    pass


class IncompleteSearchError(XXZError):
    pass


class ConfigError(XXZError, ValueError):
    pass
