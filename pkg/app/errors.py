from typing import Optional


class SpecGapError(Exception):
    pass


class InputError(SpecGapError, ValueError):
    """A precondition, validation or parse failure. Maps to exit code 1."""


class NotHermitianError(InputError):
    pass


class GapError(InputError):
    pass


class RankChangeError(InputError):
    def __init__(self, message: str, s: float):
        super().__init__(message)
        self.s = s


class ContourError(InputError):
    pass


class ConvergenceError(SpecGapError, ArithmeticError):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class ToleranceError(SpecGapError, ArithmeticError):
    """A numerical tolerance was not met. Maps to exit code 2."""

    def __init__(self, message: str, achieved: float, tolerance: float):
        super().__init__(message)
        self.achieved = achieved
        self.tolerance = tolerance


class BoundViolationError(SpecGapError, AssertionError):
    """An applicable bound failed. Maps to exit code 2."""

    def __init__(self, message: str, seed: Optional[int] = None):
        super().__init__(message)
        self.seed = seed
