"""Exception hierarchy shared by every module."""


class CoupledLowRankError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(CoupledLowRankError, ValueError):
    """Array dimensions do not conform, or an array is malformed."""


class ParameterError(CoupledLowRankError, ValueError):
    """A rank, plan or generator parameter is out of range."""


class CollapsedBasisError(ParameterError):
    """The joint sketch basis kept fewer columns than the requested rank."""


class FormatError(CoupledLowRankError):
    """A file on disk does not follow the expected format."""


class DegenerateIterateError(CoupledLowRankError, ArithmeticError):
    """An ALS Gram system became numerically singular."""

    def __init__(self, iteration: int, factor: str, detail: str = ""):
        self.iteration = iteration
        self.factor = factor
        message = f"Degenerate {factor} update at ALS iteration {iteration}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
