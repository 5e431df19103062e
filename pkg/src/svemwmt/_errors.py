"""Exception types raised across the package."""


class SvemError(Exception):
    """Base class for all package errors."""


class SpecError(SvemError, ValueError):
    """Invalid factor or term configuration."""


class EvaluationError(SvemError, ValueError):
    """A factor-setting row cannot be evaluated against its specs."""


class SingularSystemError(SvemError, ArithmeticError):
    pass


class ConvergenceError(SvemError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateSampleError(SvemError, ValueError):
    pass


class DegenerateReferenceError(SvemError, ValueError):
    pass


class DomainError(SvemError, ValueError):
    pass


class InfeasibleBoundsError(SvemError, ValueError):
    pass


class IngestionError(SvemError, ValueError):
    pass


class FitError(SvemError, RuntimeError):
    """A learner failure tagged with the ensemble member or job that raised it."""

    def __init__(self, message, index):
        super().__init__(f"{message} (index {index})")
        self.index = index
