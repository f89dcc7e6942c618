"""
Schemas configuring the phase-averaging recurrence.
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator
from slabstack.models.grid import Interpolation


class RecurrenceConfig(BaseModel):
    """
    Grid and quadrature settings of the recurrence.
    """

    model_config = ConfigDict(frozen=True)
    delta_eta: float = Field(0.005, gt=0.0, description="Spacing of the rapidity grid")
    quad_nodes: int = Field(128, ge=8, description="Starting number of periodic trapezoid nodes M, even")
    interpolation: Interpolation = Field(Interpolation.MONOTONE_CUBIC, description="Interpolation between nodes")
    convergence_check: bool = Field(
        True, description="Double M on every level until 2M nodes change the level by at most the tolerance"
    )
    tolerance: float = Field(1e-8, gt=0.0, description="Tolerance of the node-doubling check")
    estimate_error: bool = Field(True, description="Rerun on a grid twice as coarse to estimate the grid error")
    start_from_closed_form: bool = Field(
        False, description="Seed a TAU chain with the exact f_3 instead of propagating from f_1"
    )
    max_grid_points: int = Field(100_000_000, ge=2, description="Largest grid that may be allocated")
    workers: int = Field(1, ge=1, description="Threads sharing the output rows of one level")

    @field_validator("quad_nodes")
    @classmethod
    def check_even(cls, value: int) -> int:
        """
        The trapezoid nodes pair up as psi and 2 pi - psi, which needs M even.
        """
        if value % 2:
            raise ValueError(f"quad_nodes must be even, got {value}")
        return value
