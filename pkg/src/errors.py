class LaaksoError(Exception):
    """Base class of every error raised by the toolkit."""


class PreconditionError(LaaksoError, ValueError):
    pass


class ResourceLimitError(LaaksoError):
    pass


class BudgetExceededError(ResourceLimitError):
    pass


class UnknownVertexError(LaaksoError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown vertex"


class InfeasibleCoverError(LaaksoError):
    pass


class UsageError(LaaksoError):
    pass


class ClaimViolation(LaaksoError):
    """A mathematical assertion did not hold on the computed data."""


class SeparationError(ClaimViolation):
    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


class CertificateError(ClaimViolation):
    pass
