"""
Transmission statistics of stacks of identical slabs separated by random gaps.
"""

__version__ = "0.1.0"

from .services.slab import SlabService
from .services.matrix import MatrixService
from .services.recurrence import RecurrenceService
from .services.montecarlo import MonteCarloService
from .services.bounds import BoundsService
from .models import EnsembleStats, RngSpec, TargetFunction, TargetTag
from .schemas import RecurrenceConfig

slab_params = SlabService.slab_params
compose_eta = SlabService.compose_eta
tau_from_eta = SlabService.tau_from_eta
f_small_n = SlabService.f_small_n
exact_statistics = SlabService.exact_statistics
simulate_matrix_stack = MatrixService.simulate_matrix_stack
build_initial_grid = RecurrenceService.build_initial_grid
propagate = RecurrenceService.propagate
average_over_stack = RecurrenceService.average_over_stack
average_series = RecurrenceService.average_series
sample_realization = MonteCarloService.sample_realization
run_mc = MonteCarloService.run_mc
merge = MonteCarloService.merge
upsilon = BoundsService.upsilon
lambda_bound = BoundsService.lambda_bound
envelopes = BoundsService.envelopes
ratio_and_extrapolate = BoundsService.ratio_and_extrapolate

__all__ = [
    "__version__",
    "EnsembleStats",
    "RngSpec",
    "TargetFunction",
    "TargetTag",
    "RecurrenceConfig",
    "slab_params",
    "compose_eta",
    "tau_from_eta",
    "f_small_n",
    "exact_statistics",
    "simulate_matrix_stack",
    "build_initial_grid",
    "propagate",
    "average_over_stack",
    "average_series",
    "sample_realization",
    "run_mc",
    "merge",
    "upsilon",
    "lambda_bound",
    "envelopes",
    "ratio_and_extrapolate",
]
