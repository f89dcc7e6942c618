"""
Service building the datasets behind the transmission-versus-N, bound-factor and ratio figures.
"""

import logging
import math
from typing import Any, Optional
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from slabstack.models.bounds import TrendReport
from slabstack.models.grid import TargetFunction, TargetTag
from slabstack.models.stats import RngSpec
from slabstack.schemas.recurrence import RecurrenceConfig
from slabstack.services.bounds import BoundsService
from slabstack.services.montecarlo import MonteCarloService
from slabstack.services.recurrence import RecurrenceService

logger = logging.getLogger(__name__)

FIG4_TAU1 = 0.85
FIG4_N_MAX = 200
FIG4_TRIALS = 400_000
FIG5_POINTS = 200


class FigureData(BaseModel):
    """
    A dataset with the error estimates and report that go into its sidecar.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
    frame: pd.DataFrame = Field(..., description="The dataset")
    error_estimates: dict[str, list[float]] = Field(default_factory=dict, description="Per-column error estimates")
    trend: Optional[TrendReport] = Field(None, description="Conjecture trend, fig6 only")
    diagnostics: dict[str, Any] = Field(default_factory=dict, description="Derived quantities reported beside the data")


class FigureService:
    """
    Service for the figure datasets.
    """

    @staticmethod
    def fig4(
        tau1: float = FIG4_TAU1,
        n_max: int = FIG4_N_MAX,
        trials: int = FIG4_TRIALS,
        rng: Optional[RngSpec] = None,
        config: Optional[RecurrenceConfig] = None,
        workers: int = 1,
        matrix_check: bool = True,
    ) -> FigureData:
        """
        log <tau_N> from the recurrence and from Monte Carlo, with the three envelopes.
        Columns: N, log_recurrence, log_mc, mc_se, log_upper, log_lower, log_bk.
        mc_se is the standard error of log <tau_N>, SE/mean.
        """
        rng = rng or RngSpec(seed=1)
        config = config or RecurrenceConfig(workers=workers)
        series = RecurrenceService.average_series(tau1, n_max, TargetFunction.builtin(TargetTag.TAU), config)
        ensembles = MonteCarloService.run_mc(tau1, list(range(2, n_max + 1)), trials, rng, matrix_check, workers)
        report = BoundsService.envelopes(tau1, n_max)
        n_values = report.n_values
        summaries = [ensembles[n].summary()["tau"] for n in n_values]
        frame = pd.DataFrame(
            {
                "N": n_values,
                "log_recurrence": [series.values[n - 1] for n in n_values],
                "log_mc": [summary.log_mean for summary in summaries],
                "mc_se": [summary.relative_error for summary in summaries],
                "log_upper": report.upper_envelope_log,
                "log_lower": report.lower_envelope_log,
                "log_bk": report.bk_lower_log,
            }
        )
        return FigureData(
            frame=frame,
            error_estimates={"log_recurrence": [series.error_estimates[n - 1] for n in n_values]},
        )

    @staticmethod
    def fig5(grid_points: int = FIG5_POINTS) -> FigureData:
        """
        upsilon and lambda over tau1 = k/grid_points, k = 1 .. grid_points.
        Columns: tau1, upsilon, lambda, tau1_line.
        The error estimates compare upsilon with its AGM form and lambda with a numerical
        minimization of f_3/f_2.
        """
        tau1 = np.arange(1, grid_points + 1) / grid_points
        upsilon = [BoundsService.upsilon(float(value)) for value in tau1]
        agm = [BoundsService.upsilon_agm(float(value)) for value in tau1]
        lam = [BoundsService.lambda_bound(float(value)) for value in tau1]
        minimized = [BoundsService.lambda_numerical(float(value)) for value in tau1]
        frame = pd.DataFrame({"tau1": tau1, "upsilon": upsilon, "lambda": lam, "tau1_line": tau1})
        return FigureData(
            frame=frame,
            error_estimates={
                "upsilon": [abs(a - b) for a, b in zip(upsilon, agm)],
                "lambda": [abs(a - b) for a, b in zip(lam, minimized)],
            },
        )

    @staticmethod
    def fig6(
        tau1: float = FIG4_TAU1, n_max: int = FIG4_N_MAX, config: Optional[RecurrenceConfig] = None
    ) -> FigureData:
        """
        The ratio series r_N and its extrapolants A_N between the two bound factors.
        Columns: N, r_N, A_N, upsilon_line, lambda_line. A_N is empty on the last row.
        The diagnostics carry the successive ratios, the root rates and the first N at which
        the ray-optics value leaves the upper envelope.
        """
        config = config or RecurrenceConfig()
        series = RecurrenceService.average_series(tau1, n_max, TargetFunction.builtin(TargetTag.TAU), config)
        tau2_mean = tau1 / (2.0 - tau1)
        full = series.as_mapping()
        logs = {n: value for n, value in full.items() if n >= 3}
        ratios = BoundsService.ratio_and_extrapolate(tau2_mean, logs)
        r, a, _ = ratios.as_tuple()
        upsilon = BoundsService.upsilon(tau1)
        lam = BoundsService.lambda_bound(tau1)
        n_values = sorted(r)
        frame = pd.DataFrame(
            {
                "N": n_values,
                "r_N": [r[n] for n in n_values],
                "A_N": [a.get(n, math.nan) for n in n_values],
                "upsilon_line": upsilon,
                "lambda_line": lam,
            }
        )
        trend = BoundsService.conjecture_trend(tau1, ratios, upsilon)
        logger.info("Conjecture trend:\n%s", trend.text)
        diagnostics = {
            "first_ray_violation": BoundsService.first_ray_violation(tau1),
            "successive_ratio": {str(n): value for n, value in BoundsService.successive_ratio(full).items()},
            "root_rate": {str(n): value for n, value in BoundsService.root_rate(full).items()},
        }
        return FigureData(
            frame=frame,
            error_estimates={"log_recurrence": [series.error_estimates[n - 1] for n in n_values]},
            trend=trend,
            diagnostics=diagnostics,
        )
