"""Exception hierarchy shared by all modules."""


class NeutralSpecError(Exception):
    """Base class for library errors."""


class DomainError(NeutralSpecError, ValueError):
    """An input lies outside the domain of an operation."""


class ConditioningError(NeutralSpecError):
    """A matrix needed by an operation is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SolverSingular(ConditioningError):
    """A truncated block operator is too ill-conditioned to solve.

    Attributes
    ----------
    channel : int
        Channel index ``m`` whose operator failed.
    condition : float
        2-norm condition estimate of the operator.
    """

    def __init__(self, channel, condition):
        super().__init__(
            f"block operator for channel {channel} is ill-conditioned "
            f"(cond={condition:.3e})",
            condition,
        )
        self.channel = channel


class AdjustmentFailed(NeutralSpecError):
    """Randomized repair of the decomposition table ran out of retries."""

    def __init__(self, message, best_condition):
        super().__init__(message)
        self.best_condition = best_condition


class NotConverged(NeutralSpecError):
    """An iterative root search did not converge.

    Attributes
    ----------
    last : complex
        Last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, last, iterations):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class ContourError(NeutralSpecError):
    """Winding-number computation failed (root on contour, non-integer)."""


class InternalConsistencyError(NeutralSpecError):
    """A self-check of an internal identity failed."""


class InputError(NeutralSpecError):
    """A problem or realization file could not be parsed.

    Attributes
    ----------
    field : str
        Dotted path of the offending field.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
