"""Exception hierarchy shared across the package."""


class RpmboError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(RpmboError, ValueError):
    pass


class SingularProjectionError(RpmboError, ValueError):
    """The nearest point on the manifold is not unique (e.g. sphere center)."""


class IllConditionedKernelError(RpmboError, ArithmeticError):
    pass


class FitFailureError(RpmboError, RuntimeError):
    pass


class RescaleSingularityError(RpmboError, ArithmeticError):
    pass


class TrainingDivergedError(RpmboError, ArithmeticError):
    pass


class DegenerateTestError(RpmboError, ValueError):
    pass


class EmptyDesignError(RpmboError, ValueError):
    pass


class UnknownObjectiveError(RpmboError, KeyError):
    pass


class ObjectiveEvaluationError(RpmboError, RuntimeError):
    """Raised by runners when the objective fails; carries the partial history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history
