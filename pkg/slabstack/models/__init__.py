"""
This module contains the domain models of slabstack.
"""

from .slab import SlabParams, EtaValue, TransferMatrix, PhaseSequence, ExactStats
from .grid import TargetTag, TargetFunction, GridFunction, Representation, Interpolation
from .grid import RecurrenceResult, RecurrenceSeries
from .stats import RngSpec, WelfordMoments, LogMeanAccumulator, EnsembleStats, QuantitySummary
from .bounds import BoundsReport, RatioSeries, TrendReport

__all__ = [
    "SlabParams",
    "EtaValue",
    "TransferMatrix",
    "PhaseSequence",
    "ExactStats",
    "TargetTag",
    "TargetFunction",
    "GridFunction",
    "Representation",
    "Interpolation",
    "RecurrenceResult",
    "RecurrenceSeries",
    "RngSpec",
    "WelfordMoments",
    "LogMeanAccumulator",
    "EnsembleStats",
    "QuantitySummary",
    "BoundsReport",
    "RatioSeries",
    "TrendReport",
]
