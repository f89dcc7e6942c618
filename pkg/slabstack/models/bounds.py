"""
This module contains the models of the exponential bounds and of the extrapolation of the ratio series.
"""

from typing import Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator


class RatioSeries(BaseModel):
    """
    r_N = (<tau_N>/<tau_2>)^(1/(N-2)) and the two-point A - B/N extrapolants.
    A_N and B_N are keyed by the smaller N of the pair (N, N+1).
    """

    model_config = ConfigDict(frozen=True)
    r: dict[int, float] = Field(..., description="Ratio per N")
    a: dict[int, float] = Field(..., description="Extrapolated limit A per consecutive pair")
    b: dict[int, float] = Field(..., description="Slope B per consecutive pair")

    def as_tuple(self) -> tuple[dict[int, float], dict[int, float], dict[int, float]]:
        """
        (r, A, B).
        """
        return self.r, self.a, self.b


class BoundsReport(BaseModel):
    """
    The per-slab bound factors of a tau1 and the envelopes they generate.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    upsilon: float = Field(..., gt=0.0, le=1.0, description="Upper bound factor")
    lambda_: float = Field(..., gt=0.0, le=1.0, alias="lambda", description="Lower bound factor")
    n_values: list[int] = Field(..., description="N = 2 .. N_max")
    upper_envelope_log: list[float] = Field(..., description="log <tau_2> + (N-2) log upsilon")
    lower_envelope_log: list[float] = Field(..., description="log <tau_2> + (N-2) log lambda")
    bk_lower_log: list[float] = Field(..., description="N log tau1")
    ray_value: list[float] = Field(..., description="tau1 / (tau1 + N (1 - tau1))")
    ratios: Optional[RatioSeries] = Field(None, description="Filled once a series of <tau_N> is known")

    @model_validator(mode="after")
    def check_lengths(self) -> "BoundsReport":
        """
        One entry per N in every per-N list.
        """
        size = len(self.n_values)
        for name in ("upper_envelope_log", "lower_envelope_log", "bk_lower_log", "ray_value"):
            if len(getattr(self, name)) != size:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries for {size} N values")
        return self


class TrendReport(BaseModel):
    """
    How the extrapolants approach upsilon, reported rather than asserted.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    upsilon: float = Field(..., description="Upper bound factor")
    n_values: list[int] = Field(..., description="N of every extrapolant considered")
    gaps: list[float] = Field(..., description="|upsilon - A_N|")
    violations: list[int] = Field(default_factory=list, description="N where the gap grows from N to N+1")
    text: str = Field("", description="Rendered report")

    @property
    def monotone(self) -> bool:
        """
        The gap never grows.
        """
        return not self.violations

    @property
    def improving(self) -> bool:
        """
        The last gap is smaller than the first.
        """
        return len(self.gaps) > 1 and self.gaps[-1] < self.gaps[0]
