"""Exception types raised by the library."""


class BFAIError(Exception):
    """Base class for all library errors."""


class InvalidInstance(BFAIError, ValueError):
    pass


class NoFeasibleArm(BFAIError):
    pass


class TiedBest(BFAIError):
    pass


class UninformedArm(BFAIError):
    """Raised when a posterior operation needs an arm that has no samples yet."""


class BadArm(BFAIError, ValueError):
    pass


class Degenerate(BFAIError):
    """The allocation problem has no competitor arms to balance."""


class UnknownId(BFAIError, KeyError):
    pass


class BudgetTooSmall(BFAIError, ValueError):
    pass
