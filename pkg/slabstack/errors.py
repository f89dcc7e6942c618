"""
This module contains the exceptions raised by the slabstack package.
Each exception carries the CLI exit code it maps to.
"""


class SlabStackError(Exception):
    """
    Base class for every error raised by slabstack.
    """

    exit_code: int = 1


class DomainError(SlabStackError, ValueError):
    """
    An input lies outside the domain of an operation.
    """

    exit_code = 2


class CapacityError(SlabStackError):
    """
    A grid would exceed the configured point budget.
    """

    exit_code = 2


class ConvergenceError(SlabStackError):
    """
    A quadrature refinement changed a result by more than the tolerance.
    """

    exit_code = 3


class MatrixOverflowError(SlabStackError, OverflowError):
    """
    The complex transfer-matrix product left the safe floating point range.
    """

    exit_code = 3


class CrossCheckMismatch(SlabStackError):
    """
    The matrix product and the scalar composition disagree on a realization.
    """

    exit_code = 4

    def __init__(
        self,
        message: str,
        seed: int | None = None,
        stream_id: int | None = None,
        trial: int | None = None,
        phases: list[float] | None = None,
    ):
        self.message = message
        self.seed = seed
        self.stream_id = stream_id
        self.trial = trial
        self.phases = phases or []
        details = f"{message} (seed={seed}, stream_id={stream_id}, trial={trial}, phases={self.phases})"
        super().__init__(details)

    def __reduce__(self):
        return (self.__class__, (self.message, self.seed, self.stream_id, self.trial, self.phases))


class IncompatibleStatsError(SlabStackError, ValueError):
    """
    Two ensembles from different (tau1, N) were merged.
    """

    exit_code = 2


class SeriesGapError(SlabStackError, ValueError):
    """
    A series of N values is not consecutive.
    """

    exit_code = 2
