"""
This module contains the schemas of a command-line run and of the provenance written next to its output.
"""

from enum import Enum
from typing import Any, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator
from slabstack.models.grid import TargetTag


class Command(str, Enum):
    """
    The CLI subcommands.
    """

    EXACT = "exact"
    RECURRENCE = "recurrence"
    MONTECARLO = "montecarlo"
    FIGURE = "figure"


class Figure(str, Enum):
    """
    The figure datasets the CLI can emit.
    """

    FIG4 = "fig4"
    FIG5 = "fig5"
    FIG6 = "fig6"


class OutputFormat(str, Enum):
    """
    How a result table is written.
    """

    CSV = "csv"
    JSON = "json"
    TABLE = "table"


class RunConfig(BaseModel):
    """
    A validated CLI invocation.
    """

    model_config = ConfigDict(frozen=True)
    command: Command = Field(..., description="The subcommand")
    figure: Optional[Figure] = Field(None, description="Which dataset the figure command emits")
    tau1: Optional[float] = Field(None, gt=0.0, le=1.0, description="Single-slab transmission probability")
    n: list[int] = Field(default_factory=list, description="Stack sizes, --n")
    n_max: Optional[int] = Field(None, ge=1, description="Largest stack size, --n-max")
    target: TargetTag = Field(TargetTag.TAU, description="Recurrence target")
    trials: Optional[int] = Field(None, ge=1, description="Monte Carlo realizations")
    seed: int = Field(1, ge=0, lt=2**64, description="Monte Carlo seed")
    grid_delta: float = Field(0.005, gt=0.0, description="Recurrence grid spacing")
    quad_nodes: int = Field(128, ge=8, description="Recurrence quadrature nodes")
    grid_points: int = Field(200, ge=2, description="tau1 grid of the fig5 dataset")
    matrix_check: bool = Field(True, description="Cross-check sampled Monte Carlo trials with the matrix product")
    out: Optional[str] = Field(None, description="Output path, stdout when omitted")
    format: OutputFormat = Field(OutputFormat.CSV, description="Output format")
    workers: int = Field(1, ge=1, description="Worker processes or threads")

    @model_validator(mode="after")
    def check_command(self) -> "RunConfig":
        """
        Every command gets the inputs it needs before anything is computed.
        """
        if any(n < 1 for n in self.n):
            raise ValueError(f"--n values must be >= 1, got {self.n}")
        if self.command is not Command.FIGURE and self.tau1 is None:
            raise ValueError(f"{self.command.value} needs --tau1")
        if self.command is Command.EXACT and len(self.n) != 1:
            raise ValueError("exact needs exactly one --n")
        if self.command is Command.RECURRENCE and (self.n_max is None or self.n_max < 2):
            raise ValueError("recurrence needs --n-max >= 2")
        if self.command is Command.MONTECARLO and (not self.n or self.trials is None):
            raise ValueError("montecarlo needs --n and --trials")
        if self.command is Command.FIGURE and self.figure is None:
            raise ValueError("figure needs one of fig4, fig5, fig6")
        if self.quad_nodes % 2:
            raise ValueError(f"--quad-nodes must be even, got {self.quad_nodes}")
        if self.figure in (Figure.FIG4, Figure.FIG6) and self.n_max is not None and self.n_max < 4:
            raise ValueError(f"{self.figure.value} needs --n-max >= 4")
        return self

    def flags(self) -> dict[str, Any]:
        """
        The flags that reproduce this run, in JSON-friendly form.
        """
        return self.model_dump(mode="json", exclude={"out", "format"})


class DerivedConstants(BaseModel):
    """
    The constants of the slab a dataset was computed for.
    """

    model_config = ConfigDict(populate_by_name=True)
    C: float = Field(..., description="cosh 2 theta")
    S: float = Field(..., description="sinh 2 theta")
    theta: float = Field(..., description="Single-slab rapidity")
    upsilon: float = Field(..., description="Upper bound factor")
    lambda_: float = Field(..., alias="lambda", description="Lower bound factor")


class FigureMetadata(BaseModel):
    """
    The JSON sidecar written next to a dataset.
    """

    command: str = Field(..., description="Subcommand, with the figure name for figure runs")
    flags: dict[str, Any] = Field(..., description="Every flag of the run, defaults resolved")
    tool_version: str = Field(..., description="Version of slabstack that wrote the file")
    derived_constants: Optional[DerivedConstants] = Field(None, description="Constants of tau1, absent for fig5")
    error_estimates: dict[str, Any] = Field(default_factory=dict, description="Numerical error estimates per column")
    trend_report: Optional[str] = Field(None, description="Conjecture trend text, fig6 only")
    diagnostics: dict[str, Any] = Field(default_factory=dict, description="Derived quantities, fig6 only")
