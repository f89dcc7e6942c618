"""
Service for the upper and lower bound factors, the envelopes and the extrapolation of the ratio series.
"""

import logging
import math
from typing import Mapping, Optional
import numpy as np
from scipy.optimize import minimize_scalar
from slabstack.errors import ConvergenceError, DomainError, SeriesGapError
from slabstack.models.bounds import BoundsReport, RatioSeries, TrendReport
from slabstack.models.slab import TWO_PI
from slabstack.services.slab import SlabService
from slabstack.templates import template_manager

logger = logging.getLogger(__name__)

UPSILON_TARGET = 1e-12
UPSILON_TOLERANCE = 1e-10
MAX_QUAD_NODES = 2**22
LAMBDA_BREAKPOINT = 2.0 - math.sqrt(2.0)
LAMBDA_SEARCH_LIMIT = 1e6
RAY_SCAN_LIMIT = 10**6
RAY_SCAN_BLOCK = 10**5
TREND_START = 50


class BoundsService:
    """
    Service for the analytic bounds <tau_2> lambda^(N-2) <= <tau_N> <= <tau_2> upsilon^(N-2).
    """

    @staticmethod
    def _upsilon_integrand(phi: np.ndarray, c_minus_s: float, s: float) -> np.ndarray:
        # C + S cos(phi) = (C - S) + 2 S cos^2(phi/2) keeps the minimum at phi = pi accurate
        return 1.0 / np.sqrt(c_minus_s + 2.0 * s * np.cos(0.5 * phi) ** 2)

    @staticmethod
    def upsilon(tau1: float, quad_nodes: int = 64) -> float:
        """
        Upper bound factor (1/2 pi) integral dphi (C + S cos phi)^(-1/2).
        Evaluated by the periodic trapezoid rule, doubling the nodes until two successive
        values agree to 1e-12.
        Args:
            tau1: Single-slab transmission probability.
            quad_nodes: Starting node count, >= 16.
        Returns:
            upsilon in (0, 1].
        """
        params = SlabService.slab_params(tau1)
        if quad_nodes < 16:
            raise DomainError(f"quad_nodes must be >= 16, got {quad_nodes!r}")
        if params.S == 0.0:
            return 1.0
        c_minus_s = math.exp(-params.two_theta)
        nodes = quad_nodes
        value = float(np.mean(BoundsService._upsilon_integrand(TWO_PI * np.arange(nodes) / nodes, c_minus_s, params.S)))
        change = math.inf
        while nodes < MAX_QUAD_NODES:
            midpoints = TWO_PI * (np.arange(nodes) + 0.5) / nodes
            refined = 0.5 * (value + float(np.mean(BoundsService._upsilon_integrand(midpoints, c_minus_s, params.S))))
            nodes *= 2
            change, value = abs(refined - value), refined
            if change <= UPSILON_TARGET:
                break
        if change > UPSILON_TOLERANCE:
            raise ConvergenceError(f"Upsilon at tau1={tau1} still moves by {change:.3e} with {nodes} nodes")
        return value

    @staticmethod
    def upsilon_agm(tau1: float) -> float:
        """
        Upsilon in closed form, 1 / AGM(e^theta, e^-theta).
        """
        params = SlabService.slab_params(tau1)
        a, b = math.exp(params.theta), math.exp(-params.theta)
        while abs(a - b) > 1e-16 * a:
            a, b = 0.5 * (a + b), math.sqrt(a * b)
        return 1.0 / a

    @staticmethod
    def lambda_bound(tau1: float) -> float:
        """
        Lower bound factor, the minimum over C' of f_3(C')/f_2(C').
        Args:
            tau1: Single-slab transmission probability.
        Returns:
            1/(2 - tau1) for tau1 >= 2 - sqrt(2), else sqrt(tau1 - tau1^2/4).
        """
        tau1 = SlabService.check_tau1(tau1)
        if tau1 >= LAMBDA_BREAKPOINT:
            return 1.0 / (2.0 - tau1)
        return math.sqrt(tau1 - 0.25 * tau1 * tau1)

    @staticmethod
    def lambda_numerical(tau1: float) -> float:
        """
        Minimize f_3(C')/f_2(C') over C' in [1, 1e6] numerically.
        """
        params = SlabService.slab_params(tau1)

        def ratio(log_c_prime: float) -> float:
            c_prime = math.exp(log_c_prime)
            return SlabService.f_small_n(3, c_prime, params) / SlabService.f_small_n(2, c_prime, params)

        upper = math.log(LAMBDA_SEARCH_LIMIT)
        found = minimize_scalar(ratio, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-12})
        return min(float(found.fun), ratio(0.0), ratio(upper))

    @staticmethod
    def envelopes(tau1: float, n_max: int, quad_nodes: int = 64) -> BoundsReport:
        """
        The upper, lower, Berry-Klein and ray-optics curves for 2 <= N <= N_max, in log space.
        Args:
            tau1: Single-slab transmission probability.
            n_max: Largest N, >= 2.
            quad_nodes: Starting node count for upsilon.
        Returns:
            The report, without ratios.
        """
        tau1 = SlabService.check_tau1(tau1)
        if n_max < 2:
            raise DomainError(f"N_max must be >= 2, got {n_max!r}")
        upsilon = BoundsService.upsilon(tau1, quad_nodes)
        lam = BoundsService.lambda_bound(tau1)
        log_tau2 = math.log(tau1 / (2.0 - tau1))
        n = np.arange(2, n_max + 1)
        return BoundsReport(
            tau1=tau1,
            upsilon=upsilon,
            lambda_=lam,
            n_values=n.tolist(),
            upper_envelope_log=(log_tau2 + (n - 2) * math.log(upsilon)).tolist(),
            lower_envelope_log=(log_tau2 + (n - 2) * math.log(lam)).tolist(),
            bk_lower_log=(n * math.log(tau1)).tolist(),
            ray_value=(tau1 / (tau1 + n * (1.0 - tau1))).tolist(),
        )

    @staticmethod
    def _consecutive(series: Mapping[int, float], first_allowed: int) -> list[int]:
        n_values = sorted(series)
        if not n_values:
            raise DomainError("The series is empty")
        if n_values[0] < first_allowed:
            raise DomainError(f"The series must start at N >= {first_allowed}, got N={n_values[0]}")
        for low, high in zip(n_values, n_values[1:]):
            if high != low + 1:
                raise SeriesGapError(f"The series jumps from N={low} to N={high}")
        return n_values

    @staticmethod
    def ratio_and_extrapolate(tau2_mean: float, series: Mapping[int, float]) -> RatioSeries:
        """
        The ratio series and the exact two-point fit r_N = A - B/N on every consecutive pair.
        Args:
            tau2_mean: <tau_2>.
            series: N -> log <tau_N>, consecutive N starting at 3 or later.
        Returns:
            r_N, A_N = (N+1) r_{N+1} - N r_N and B_N = N (A_N - r_N).
        """
        if tau2_mean <= 0.0:
            raise DomainError(f"<tau_2> must be positive, got {tau2_mean!r}")
        n_values = BoundsService._consecutive(series, 3)
        log_tau2 = math.log(tau2_mean)
        r = {n: math.exp((series[n] - log_tau2) / (n - 2)) for n in n_values}
        a, b = {}, {}
        for n in n_values[:-1]:
            a[n] = (n + 1) * r[n + 1] - n * r[n]
            b[n] = n * (a[n] - r[n])
        return RatioSeries(r=r, a=a, b=b)

    @staticmethod
    def successive_ratio(series: Mapping[int, float]) -> dict[int, float]:
        """
        <tau_{N+1}>/<tau_N> from N -> log <tau_N>.
        """
        n_values = BoundsService._consecutive(series, 1)
        return {n: math.exp(series[n + 1] - series[n]) for n in n_values[:-1]}

    @staticmethod
    def root_rate(series: Mapping[int, float]) -> dict[int, float]:
        """
        <tau_N>^(1/N) from N -> log <tau_N>.
        """
        return {n: math.exp(value / n) for n, value in series.items() if n >= 1}

    @staticmethod
    def first_ray_violation(tau1: float, n_limit: int = RAY_SCAN_LIMIT, quad_nodes: int = 64) -> Optional[int]:
        """
        Smallest N where the ray-optics value exceeds the upper envelope.
        Args:
            tau1: Single-slab transmission probability.
            n_limit: Largest N scanned.
            quad_nodes: Starting node count for upsilon.
        Returns:
            N, or None when no violation occurs up to n_limit.
        """
        tau1 = SlabService.check_tau1(tau1)
        if tau1 == 1.0:
            return None
        log_upsilon = math.log(BoundsService.upsilon(tau1, quad_nodes))
        log_tau2 = math.log(tau1 / (2.0 - tau1))
        for start in range(3, n_limit + 1, RAY_SCAN_BLOCK):
            n = np.arange(start, min(start + RAY_SCAN_BLOCK, n_limit + 1))
            log_ray = math.log(tau1) - np.log(tau1 + n * (1.0 - tau1))
            upper = log_tau2 + (n - 2) * log_upsilon
            above = np.nonzero(log_ray > upper + 1e-12)[0]
            if above.size:
                return int(n[above[0]])
        return None

    @staticmethod
    def conjecture_trend(tau1: float, ratios: RatioSeries, upsilon: float, n_from: int = TREND_START) -> TrendReport:
        """
        Track |upsilon - A_N| for N >= n_from and render the trend as text.
        Args:
            tau1: Single-slab transmission probability.
            ratios: Output of ratio_and_extrapolate.
            upsilon: The upper bound factor.
            n_from: First N considered.
        Returns:
            The report; a growing gap is logged, never raised.
        """
        n_values = [n for n in sorted(ratios.a) if n >= n_from]
        if not n_values:
            n_values = sorted(ratios.a)
        gaps = [abs(upsilon - ratios.a[n]) for n in n_values]
        violations = [n for n, now, following in zip(n_values, gaps, gaps[1:]) if following > now]
        report = TrendReport(tau1=tau1, upsilon=upsilon, n_values=n_values, gaps=gaps, violations=violations)
        if not n_values:
            return report
        if violations:
            logger.warning("|Upsilon - A_N| grows at %d of %d steps for tau1=%s", len(violations), len(gaps), tau1)
        return report.model_copy(update={"text": template_manager.render("trend_report", report=report)})
