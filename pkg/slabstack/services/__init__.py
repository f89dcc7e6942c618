"""
The services computing slab-stack statistics, one class per concern.
"""

from .slab import SlabService
from .matrix import MatrixService
from .recurrence import RecurrenceService
from .montecarlo import MonteCarloService
from .bounds import BoundsService

__all__ = ["SlabService", "MatrixService", "RecurrenceService", "MonteCarloService", "BoundsService"]
