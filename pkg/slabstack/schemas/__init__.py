"""
This module contains the schemas configuring runs of slabstack.
"""

from .recurrence import RecurrenceConfig
from .run import Command, Figure, OutputFormat, RunConfig, DerivedConstants, FigureMetadata

__all__ = ["RecurrenceConfig", "Command", "Figure", "OutputFormat", "RunConfig", "DerivedConstants", "FigureMetadata"]
