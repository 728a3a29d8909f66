"""Exception types raised by the solver library."""


class OscifdError(Exception):
    """Base class for all library errors."""


class PoleError(OscifdError, ValueError):
    """tanc evaluated too close to a pole of tan."""


class PlannerError(OscifdError):
    """Parameter planning failed."""


class NoRootInBracket(PlannerError):
    pass


class CosineTooSmall(PlannerError):
    pass


class NoConvergence(PlannerError):
    pass


class PsiTooSmall(PlannerError):
    pass


class StabilityViolation(PlannerError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SchemeError(OscifdError):
    pass


class NonFiniteState(SchemeError):
    """The numerical solution blew up (NaN/Inf or above the ceiling)."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class FixedPointDivergence(SchemeError):
    pass


class UnsupportedGridSize(OscifdError, ValueError):
    pass


class GridMisaligned(OscifdError, ValueError):
    pass


class DegenerateFit(OscifdError, ValueError):
    pass
