"""
Settings read from the environment (and from a local .env file).
"""

import os
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv(".env")


class Settings(BaseModel):
    """
    Process-wide defaults, overridable by CLI flags.
    """

    model_config = ConfigDict(frozen=True)
    workers: int = Field(1, ge=1, description="Worker processes for Monte Carlo chunks and threads for propagation")
    log_level: str = Field("WARNING", description="Level of the rich logging handler")
    max_grid_points: int = Field(100_000_000, ge=1, description="Largest rapidity grid the recurrence may allocate")
    default_seed: int = Field(1, ge=0, description="Seed used when no --seed flag is given")


def get_settings() -> Settings:
    """
    Build the settings from the SLABSTACK_* environment variables.
    """
    return Settings(
        workers=int(os.environ.get("SLABSTACK_WORKERS", "1")),
        log_level=os.environ.get("SLABSTACK_LOG_LEVEL", "WARNING").upper(),
        max_grid_points=int(float(os.environ.get("SLABSTACK_MAX_GRID_POINTS", "1e8"))),
        default_seed=int(os.environ.get("SLABSTACK_DEFAULT_SEED", "1")),
    )
