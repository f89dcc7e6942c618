"""
This module contains the models describing a single slab and the state of a stack.
"""

import math
from fractions import Fraction
from typing import Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from slabstack.numerics import log_cosh

TWO_PI = 2.0 * math.pi
# C, S and tau1 may each sit this many ulp away from an exactly consistent triple.
IDENTITY_ULPS = 4


class SlabParams(BaseModel):
    """
    The constants of one slab: tau1, C = cosh(2 theta), S = sinh(2 theta) and theta.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., gt=0.0, le=1.0, description="Single-slab transmission probability")
    C: float = Field(..., ge=1.0, description="cosh(2 theta) = 2/tau1 - 1")
    S: float = Field(..., ge=0.0, description="sinh(2 theta) = (2/tau1) sqrt(1 - tau1)")
    theta: float = Field(..., ge=0.0, description="Single-slab rapidity")

    @model_validator(mode="after")
    def check_hyperbolic_identity(self) -> "SlabParams":
        """
        Reject parameters that are not a consistent (C, S, tau1) triple.

        Both identities are evaluated exactly on the stored floats. Moving C and S by
        IDENTITY_ULPS ulp each shifts C^2 - S^2 by up to 2 IDENTITY_ULPS (C ulp(C) + S ulp(S)).
        """
        if not (math.isfinite(self.C) and math.isfinite(self.S)):
            raise ValueError(f"C={self.C!r} and S={self.S!r} must be finite")
        c, s = Fraction(self.C), Fraction(self.S)
        slack = 2 * IDENTITY_ULPS * (self.C * math.ulp(self.C) + self.S * math.ulp(self.S))
        if math.isfinite(slack) and abs(c * c - s * s - 1) > Fraction(slack):
            raise ValueError(f"C^2 - S^2 != 1 for C={self.C!r}, S={self.S!r}")
        if abs(float(2 / (c + 1) - Fraction(self.tau1))) > IDENTITY_ULPS * math.ulp(self.tau1):
            raise ValueError(f"tau1 does not round-trip through C={self.C!r}")
        return self

    @property
    def two_theta(self) -> float:
        """
        The rapidity eta = 2 theta of a single slab.
        """
        return 2.0 * self.theta


class EtaValue(BaseModel):
    """
    Log-domain state of a stack: eta = 2 theta_tot = arccosh(C_tot).
    cosh(eta) is never stored because it overflows for eta > 710.
    """

    model_config = ConfigDict(frozen=True)
    eta: float = Field(..., ge=0.0, description="Total rapidity of the stack")

    @property
    def log_tau(self) -> float:
        """
        log of 2/(cosh eta + 1), finite for eta up to 1e6 and beyond.
        """
        return -2.0 * float(log_cosh(0.5 * self.eta))

    @property
    def tau(self) -> float:
        """
        Transmission probability, underflows to 0 for very large eta.
        """
        return math.exp(self.log_tau)

    @property
    def log_cosh(self) -> float:
        """
        log cosh(eta) = log C_tot.
        """
        return float(log_cosh(self.eta))


class TransferMatrix(BaseModel):
    """
    A 2x2 complex transfer matrix mapping left amplitudes (u, v) to right amplitudes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    matrix: np.ndarray = Field(..., description="The 2x2 complex entries")

    @field_validator("matrix")
    @classmethod
    def check_shape(cls, value: np.ndarray) -> np.ndarray:
        """
        Only 2x2 matrices are transfer matrices.
        """
        value = np.asarray(value, dtype=np.complex128)
        if value.shape != (2, 2):
            raise ValueError(f"Transfer matrix must be 2x2, got shape {value.shape}")
        return value

    def flux_deviation(self) -> float:
        """
        Largest entry of |T^dagger sigma_z T - sigma_z|, scaled by max(1, max|T_ij|^2).
        """
        sigma_z = np.diag([1.0, -1.0]).astype(np.complex128)
        deviation = self.matrix.conj().T @ sigma_z @ self.matrix - sigma_z
        scale = max(1.0, float(np.max(np.abs(self.matrix))) ** 2)
        return float(np.max(np.abs(deviation))) / scale

    @property
    def transmission(self) -> float:
        """
        1/|T_22|^2.
        """
        return 1.0 / abs(self.matrix[1, 1]) ** 2


class PhaseSequence(BaseModel):
    """
    The gap phases of one realization, one angle per gap.
    """

    model_config = ConfigDict(frozen=True)
    angles: list[float] = Field(default_factory=list, description="Gap phases in [0, 2 pi), length N-1")

    @field_validator("angles")
    @classmethod
    def check_range(cls, value: list[float]) -> list[float]:
        """
        Every angle lies in [0, 2 pi).
        """
        for angle in value:
            if not 0.0 <= angle < TWO_PI:
                raise ValueError(f"Phase {angle!r} is outside [0, 2 pi)")
        return value

    @property
    def n_slabs(self) -> int:
        """
        Number of slabs of the stack these gaps separate.
        """
        return len(self.angles) + 1


class ExactStats(BaseModel):
    """
    Closed-form statistics of an N-slab stack.
    Quantities that grow like C^N are carried in log form, the linear value may be inf.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    n_slabs: int = Field(..., ge=1, description="Number of slabs N")
    mean_log_tau: float = Field(..., description="<log tau_N> = N log tau1")
    bk_lower: float = Field(..., description="Lower bound tau1^N on <tau_N>")
    log_bk_lower: float = Field(..., description="N log tau1")
    ray: float = Field(..., description="Ray-optics value tau1/(tau1 + N(1-tau1))")
    mean_inv_tau: float = Field(..., description="<1/tau_N> = 1/2 + C^N/2")
    log_mean_inv_tau: float = Field(..., description="log <1/tau_N>")
    mean_cosh: float = Field(..., description="<cosh 2 theta_tot> = C^N")
    log_mean_cosh: float = Field(..., description="N log C")
    mean_cosh_sq: float = Field(..., description="<cosh^2 2 theta_tot> = 1/3 + 2/3 [(3C^2-1)/2]^N")
    log_mean_cosh_sq: float = Field(..., description="log <cosh^2 2 theta_tot>")
    log_cosh_moment_ratio: float = Field(..., description="log(<cosh^2>/<cosh>^2)")
    normalized_cosh_variance: float = Field(..., description="<cosh^2>/<cosh>^2 - 1")
    log_normalized_cosh_variance_asymptotic: float = Field(
        ..., description="log of the large-N form 2/3 [3/2 - (tau1/(2-tau1))^2/2]^N"
    )
    mean_tau2: Optional[float] = Field(None, description="<tau_2> = tau1/(2-tau1), only when N=2")
    mean_tau3: Optional[float] = Field(None, description="<tau_3> = tau1/sqrt(4/tau1-3), only when N=3")
