"""
This module contains the models of the phase-averaging recurrence: target functions and grids.
"""

import math
from enum import Enum
from typing import Callable, Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from slabstack.numerics import log_cosh


class TargetTag(str, Enum):
    """
    The functions of C' = cosh(eta) whose stack average can be computed.
    """

    TAU = "tau"
    LOG_TAU = "logtau"
    INV_TAU = "invtau"
    IDENTITY_C = "cosh"
    COSH_SQUARED = "cosh2"
    SECOND_MOMENT = "second_moment"
    CUSTOM = "custom"


class Representation(str, Enum):
    """
    How grid values are stored.
    """

    LINEAR = "linear"
    LOG_OF_POSITIVE = "log_of_positive"


class Interpolation(str, Enum):
    """
    Interpolation scheme between grid nodes.
    """

    MONOTONE_CUBIC = "monotone_cubic"
    LINEAR = "linear"


# pylint: disable=unnecessary-lambda-assignment
_BUILTIN = {
    TargetTag.TAU: (
        lambda c: 2.0 / (c + 1.0),
        lambda eta: -2.0 * log_cosh(0.5 * eta),
        True,
    ),
    TargetTag.LOG_TAU: (
        lambda c: math.log(2.0 / (c + 1.0)),
        lambda eta: -2.0 * log_cosh(0.5 * eta),
        False,
    ),
    TargetTag.INV_TAU: (
        lambda c: 0.5 * (c + 1.0),
        lambda eta: 2.0 * log_cosh(0.5 * eta),
        True,
    ),
    TargetTag.IDENTITY_C: (
        lambda c: c,
        log_cosh,
        True,
    ),
    TargetTag.COSH_SQUARED: (
        lambda c: c * c,
        lambda eta: 2.0 * log_cosh(eta),
        True,
    ),
    TargetTag.SECOND_MOMENT: (
        lambda c: c * c - 1.0 / 3.0,
        lambda eta: 2.0 * log_cosh(eta) + np.log1p(-np.exp(-2.0 * log_cosh(eta)) / 3.0),
        True,
    ),
}


class TargetFunction(BaseModel):
    """
    A function f(C') whose average over the gap phases is sought.
    Built-in targets also know f (or log f) as a function of eta, which keeps the
    initial grid finite where cosh(eta) itself would overflow.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    tag: TargetTag = Field(..., description="Which target this is")
    evaluator: Callable[[float], float] = Field(..., description="f as a function of C' >= 1")
    positive: bool = Field(..., description="Whether f > 0 on [1, inf), enabling log storage")
    eta_evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = Field(
        None, description="f, or log f when positive, as a vectorized function of eta"
    )

    @classmethod
    def builtin(cls, tag: TargetTag | str) -> "TargetFunction":
        """
        Get one of the built-in targets.
        Args:
            tag: The target tag or its CLI name.
        """
        tag = TargetTag(tag)
        if tag not in _BUILTIN:
            raise ValueError(f"{tag.value!r} is not a built-in target, build a CUSTOM TargetFunction instead")
        evaluator, eta_evaluator, positive = _BUILTIN[tag]
        return cls(tag=tag, evaluator=evaluator, positive=positive, eta_evaluator=eta_evaluator)

    @classmethod
    def custom(cls, evaluator: Callable[[float], float], positive: bool = False) -> "TargetFunction":
        """
        Wrap a user function of C'.
        Args:
            evaluator: f(C'), finite and continuous on [1, inf).
            positive: True when f > 0 everywhere.
        """
        return cls(tag=TargetTag.CUSTOM, evaluator=evaluator, positive=positive)

    @property
    def representation(self) -> Representation:
        """
        The storage a grid of this target uses.
        """
        return Representation.LOG_OF_POSITIVE if self.positive else Representation.LINEAR

    @property
    def tau_like(self) -> bool:
        """
        Whether f is non-increasing in C'.
        """
        return self.tag in (TargetTag.TAU, TargetTag.LOG_TAU)

    def sample(self, eta: np.ndarray) -> np.ndarray:
        """
        Values on an eta grid, in this target's representation.
        Args:
            eta: Rapidities >= 0.
        """
        eta = np.asarray(eta, dtype=np.float64)
        if self.eta_evaluator is not None:
            return np.asarray(self.eta_evaluator(eta), dtype=np.float64)
        with np.errstate(over="ignore"):
            c_prime = np.cosh(eta)
        values = np.array([self.evaluator(float(c)) for c in c_prime], dtype=np.float64)
        if self.positive:
            return np.log(values)
        return values


class GridFunction(BaseModel):
    """
    f_n(C') sampled at eta_j = j * delta_eta, j = 0 .. floor(eta_max/delta_eta).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    tag: TargetTag = Field(..., description="Target this grid belongs to")
    eta_max: float = Field(..., ge=0.0, description="Last grid node")
    delta_eta: float = Field(..., gt=0.0, description="Grid spacing")
    values: np.ndarray = Field(..., description="Samples in the given representation")
    representation: Representation = Field(..., description="Linear or log-of-positive storage")
    level: int = Field(..., ge=1, description="The n of f_n")
    quad_nodes: int = Field(0, ge=0, description="Trapezoid nodes that built this level, 0 for a sampled level")
    node_doubling_delta: float = Field(
        0.0, ge=0.0, description="Largest change over the checked nodes when quad_nodes doubles"
    )

    @field_validator("values")
    @classmethod
    def check_finite(cls, value: np.ndarray) -> np.ndarray:
        """
        Grid values are finite.
        """
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 1 or not np.all(np.isfinite(value)):
            raise ValueError("Grid values must be a finite 1-d array")
        return value

    @model_validator(mode="after")
    def check_length(self) -> "GridFunction":
        """
        values.length = floor(eta_max/delta_eta) + 1.
        """
        expected = GridFunction.point_count(self.eta_max, self.delta_eta)
        if len(self.values) != expected:
            raise ValueError(f"Expected {expected} grid values, got {len(self.values)}")
        return self

    @staticmethod
    def point_count(eta_max: float, delta_eta: float) -> int:
        """
        Number of nodes covering [0, eta_max].
        """
        return int(math.floor(eta_max / delta_eta + 1e-9)) + 1

    @property
    def eta(self) -> np.ndarray:
        """
        The grid nodes.
        """
        return self.delta_eta * np.arange(len(self.values), dtype=np.float64)


class RecurrenceResult(BaseModel):
    """
    <f(C_tot)> for one stack size, as produced by the recurrence.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    n_slabs: int = Field(..., ge=1, description="Number of slabs N")
    tag: TargetTag = Field(..., description="Averaged target")
    representation: Representation = Field(..., description="LOG_OF_POSITIVE when value is log <f>")
    value: float = Field(..., description="f_N(C), or its log for positive targets")
    error_estimate: float = Field(0.0, ge=0.0, description="Node-doubling, grid-coarsening and rounding estimate")
    node_doubling_delta: float = Field(0.0, ge=0.0, description="Largest node-doubling change along the chain")

    @property
    def log_value(self) -> Optional[float]:
        """
        log <f>, None for linearly stored targets.
        """
        return self.value if self.representation is Representation.LOG_OF_POSITIVE else None

    @property
    def linear_value(self) -> float:
        """
        <f> itself, inf when it overflows.
        """
        if self.representation is Representation.LOG_OF_POSITIVE:
            with np.errstate(over="ignore"):
                return float(np.exp(self.value))
        return self.value


class RecurrenceSeries(BaseModel):
    """
    f_n(C) for n = 1 .. N_max from a single propagation chain.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    tag: TargetTag = Field(..., description="Averaged target")
    representation: Representation = Field(..., description="Storage of the values")
    n_values: list[int] = Field(..., description="Consecutive stack sizes starting at 1")
    values: list[float] = Field(..., description="f_n(C), or its log for positive targets")
    error_estimates: list[float] = Field(..., description="Error estimate of every value")
    node_doubling_deltas: list[float] = Field(
        default_factory=list, description="Largest node-doubling change up to every level"
    )

    @model_validator(mode="after")
    def check_lengths(self) -> "RecurrenceSeries":
        """
        One value and one error per N.
        """
        if not len(self.n_values) == len(self.values) == len(self.error_estimates):
            raise ValueError("n_values, values and error_estimates must have the same length")
        return self

    def result(self, n_slabs: int) -> RecurrenceResult:
        """
        The entry for one N.
        """
        index = self.n_values.index(n_slabs)
        return RecurrenceResult(
            tau1=self.tau1,
            n_slabs=n_slabs,
            tag=self.tag,
            representation=self.representation,
            value=self.values[index],
            error_estimate=self.error_estimates[index],
            node_doubling_delta=self.node_doubling_deltas[index] if self.node_doubling_deltas else 0.0,
        )

    def as_mapping(self) -> dict[int, float]:
        """
        N -> stored value.
        """
        return dict(zip(self.n_values, self.values))
