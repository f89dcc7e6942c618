"""
Service for the phase-averaging recurrence f_{n+1}(C') = (1/2 pi) integral dpsi f_n(C'') on a rapidity grid.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional
import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp
from slabstack.errors import CapacityError, ConvergenceError, DomainError
from slabstack.models.grid import (
    GridFunction,
    Interpolation,
    RecurrenceResult,
    RecurrenceSeries,
    Representation,
    TargetFunction,
    TargetTag,
)
from slabstack.models.slab import SlabParams, TWO_PI
from slabstack.numerics import LOG_2, log_cosh
from slabstack.schemas.recurrence import RecurrenceConfig
from slabstack.services.slab import SlabService

logger = logging.getLogger(__name__)

# Extra nodes beyond the last composition so the stencil never extrapolates.
PADDING_NODES = 4
# Query plans above this many entries are evaluated block by block instead of cached.
PLAN_LIMIT = 20_000_000
MONOTONICITY_SLACK = 1e-10
# Output nodes sampled by the node-doubling check, spread from eta = 0 to the top of the level.
CHECK_ROWS = 33
MAX_QUAD_NODES = 2**14
# Rounding floor of the error estimate, in units of machine epsilon per propagation.
ROUNDING_ULPS = 16


class RecurrenceService:
    """
    Service evaluating stack averages <f(cosh 2 theta_tot)> by recursive phase averaging.
    """

    @staticmethod
    def quadrature_nodes(quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Distinct nodes and weights of the M-point periodic trapezoid rule.

        The integrand depends on cos psi only, so psi_k and 2 pi - psi_k are folded together:
        k = 0 .. M/2 with weights [1, 2, ..., 2, 1]/M.
        """
        half = quad_nodes // 2
        psi = TWO_PI * np.arange(half + 1, dtype=np.float64) / quad_nodes
        weights = np.full(half + 1, 2.0 / quad_nodes)
        weights[0] = weights[-1] = 1.0 / quad_nodes
        return psi, weights

    @staticmethod
    def build_initial_grid(
        target: TargetFunction, n_slabs: int, params: SlabParams, config: RecurrenceConfig
    ) -> GridFunction:
        """
        Sample f_1 = f on the rapidity grid needed by an N-slab chain.
        Args:
            target: The function to average.
            n_slabs: Number of slabs N >= 2.
            params: The slab parameters.
            config: Grid and quadrature settings.
        Returns:
            f_1 on [0, eta_max], eta_max = (N + 1) 2 theta plus a few padding nodes.
        """
        if n_slabs < 2:
            raise DomainError(f"build_initial_grid needs N >= 2, got {n_slabs!r}")
        eta_max = (n_slabs + 1) * params.two_theta + PADDING_NODES * config.delta_eta
        points = GridFunction.point_count(eta_max, config.delta_eta)
        if points > config.max_grid_points:
            raise CapacityError(
                f"N={n_slabs} at delta_eta={config.delta_eta} needs {points} grid points, "
                f"more than max_grid_points={config.max_grid_points}"
            )
        logger.info("Initial %s grid: %d points up to eta=%.4f", target.tag.value, points, eta_max)
        eta = config.delta_eta * np.arange(points, dtype=np.float64)
        try:
            values = target.sample(eta)
        except (ArithmeticError, ValueError) as e:
            raise DomainError(f"Target {target.tag.value!r} failed on the initial grid: {e}") from e
        if not np.all(np.isfinite(values)):
            raise DomainError(f"Target {target.tag.value!r} is not finite on [0, {eta_max:.4f}]")
        return GridFunction(
            tag=target.tag,
            eta_max=eta_max,
            delta_eta=config.delta_eta,
            values=values,
            representation=target.representation,
            level=1,
        )

    @staticmethod
    def closed_form_level3(n_slabs: int, params: SlabParams, config: RecurrenceConfig) -> GridFunction:
        """
        log f_3 of the transmission probability, sampled directly:
        f_3(C') = 2 / sqrt((C' + 1)(2 C^2 + C' - 1)).
        Args:
            n_slabs: Number of slabs N >= 3 the chain is built for.
            params: The slab parameters.
            config: Grid settings.
        """
        if n_slabs < 3:
            raise DomainError(f"The closed-form start needs N >= 3, got {n_slabs!r}")
        start = RecurrenceService.build_initial_grid(TargetFunction.builtin(TargetTag.TAU), n_slabs, params, config)
        eta_max = start.eta_max - 2.0 * params.two_theta
        eta = config.delta_eta * np.arange(GridFunction.point_count(eta_max, config.delta_eta), dtype=np.float64)
        log_c_plus_one = LOG_2 + 2.0 * log_cosh(0.5 * eta)
        log_c_plus_gap = np.logaddexp(log_cosh(eta), math.log(2.0 * params.C**2 - 1.0))
        values = LOG_2 - 0.5 * (log_c_plus_one + log_c_plus_gap)
        return GridFunction(
            tag=TargetTag.TAU,
            eta_max=eta_max,
            delta_eta=config.delta_eta,
            values=values,
            representation=Representation.LOG_OF_POSITIVE,
            level=3,
        )

    @staticmethod
    def interpolator(grid: GridFunction, interpolation: Interpolation) -> Callable[[np.ndarray], np.ndarray]:
        """
        Interpolate a grid in its stored representation.
        f_n is even in eta and is interpolated as a function of eta^2, which mirrors the
        grid about eta = 0 and keeps the slope away from zero there.
        """
        x = grid.eta**2
        if interpolation is Interpolation.LINEAR:
            return lambda query: np.interp(query * query, x, grid.values)
        spline = PchipInterpolator(x, grid.values, extrapolate=True)
        return lambda query: spline(query * query)

    @staticmethod
    def reduce(samples: np.ndarray, weights: np.ndarray, representation: Representation) -> np.ndarray:
        """
        Weighted quadrature sum along the last axis, by log-sum-exp for log storage.
        """
        if representation is Representation.LOG_OF_POSITIVE:
            return logsumexp(samples, b=weights, axis=-1)
        return np.sum(samples * weights, axis=-1)

    @staticmethod
    def query_plan(eta: np.ndarray, two_theta: float, psi: np.ndarray) -> np.ndarray:
        """
        compose_eta(eta_j, 2 theta, psi_k) for every output node and quadrature node.
        """
        return SlabService.compose_eta(eta[:, None], two_theta, psi[None, :])

    @staticmethod
    def _level_values(
        interpolate: Callable[[np.ndarray], np.ndarray],
        rows: int,
        params: SlabParams,
        config: RecurrenceConfig,
        representation: Representation,
        quad_nodes: int,
        plan: Optional[np.ndarray],
    ) -> np.ndarray:
        psi, weights = RecurrenceService.quadrature_nodes(quad_nodes)
        eta = config.delta_eta * np.arange(rows, dtype=np.float64)

        def block(bounds: tuple[int, int]) -> np.ndarray:
            start, stop = bounds
            if plan is not None and plan.shape[0] >= stop:
                queries = plan[start:stop]
            else:
                queries = RecurrenceService.query_plan(eta[start:stop], params.two_theta, psi)
            return RecurrenceService.reduce(interpolate(queries), weights, representation)

        block_rows = max(1, min(rows, PLAN_LIMIT // len(psi)))
        if config.workers > 1:
            block_rows = max(1, min(block_rows, math.ceil(rows / config.workers)))
        blocks = [(start, min(start + block_rows, rows)) for start in range(0, rows, block_rows)]
        if config.workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as executor:
                parts = list(executor.map(block, blocks))
        else:
            parts = [block(bounds) for bounds in blocks]
        return np.concatenate(parts)

    @staticmethod
    def node_doubling_delta(
        interpolate: Callable[[np.ndarray], np.ndarray],
        eta: np.ndarray,
        two_theta: float,
        quad_nodes: int,
        representation: Representation,
    ) -> float:
        """
        Largest change of the next level over the output nodes eta when M quadrature nodes become 2M.
        Measured in log units for log storage, relative to max(1, |value|) otherwise.
        """
        results = []
        for nodes in (quad_nodes, 2 * quad_nodes):
            psi, weights = RecurrenceService.quadrature_nodes(nodes)
            queries = RecurrenceService.query_plan(eta, two_theta, psi)
            results.append(RecurrenceService.reduce(interpolate(queries), weights, representation))
        coarse, fine = results
        change = np.abs(fine - coarse)
        if representation is not Representation.LOG_OF_POSITIVE:
            change = change / np.maximum(1.0, np.abs(coarse))
        return float(np.max(change))

    @staticmethod
    def settle_nodes(
        interpolate: Callable[[np.ndarray], np.ndarray],
        f_n: GridFunction,
        params: SlabParams,
        config: RecurrenceConfig,
    ) -> tuple[int, float]:
        """
        The smallest M = quad_nodes * 2^k whose doubling moves the next level by at most the tolerance.

        The check runs on CHECK_ROWS output nodes from eta = 0 to the top of the level plus eta = 2 theta.
        For small tau1 the integrand has a singularity close to psi = pi at large eta, so the top rows
        usually need more nodes than eta = 2 theta does.
        Returns:
            (M, the change measured at M)
        Raises:
            ConvergenceError: M would exceed MAX_QUAD_NODES before the change settles.
        """
        rows = GridFunction.point_count(f_n.eta_max - params.two_theta, f_n.delta_eta)
        picks = np.unique(np.linspace(0, rows - 1, min(rows, CHECK_ROWS)).round().astype(np.int64))
        eta = np.append(f_n.delta_eta * picks, params.two_theta)
        nodes = config.quad_nodes
        while True:
            delta = RecurrenceService.node_doubling_delta(
                interpolate, eta, params.two_theta, nodes, f_n.representation
            )
            if delta <= config.tolerance:
                return nodes, delta
            if 2 * nodes > MAX_QUAD_NODES:
                raise ConvergenceError(
                    f"Doubling quad_nodes={nodes} still changes f_{f_n.level + 1} by {delta:.3e} "
                    f"(tolerance {config.tolerance:.1e}) at tau1={params.tau1}"
                )
            logger.debug("f_%d: %d nodes move the level by %.3e, doubling", f_n.level + 1, nodes, delta)
            nodes *= 2

    @staticmethod
    def _propagate(
        f_n: GridFunction,
        params: SlabParams,
        config: RecurrenceConfig,
        plans: Optional[dict[int, np.ndarray]] = None,
        quad_nodes: Optional[int] = None,
    ) -> GridFunction:
        two_theta = params.two_theta
        if two_theta == 0.0:
            return f_n.model_copy(update={"level": f_n.level + 1})
        if f_n.eta_max < two_theta:
            raise DomainError(
                f"f_{f_n.level} covers [0, {f_n.eta_max:.4f}], too short for one more composition step of {two_theta:.4f}"
            )
        eta_max = f_n.eta_max - two_theta
        rows = GridFunction.point_count(eta_max, f_n.delta_eta)
        interpolate = RecurrenceService.interpolator(f_n, config.interpolation)
        delta = 0.0
        if quad_nodes is None:
            quad_nodes = config.quad_nodes
            if config.convergence_check:
                quad_nodes, delta = RecurrenceService.settle_nodes(interpolate, f_n, params, config)
        plan = None
        if plans is not None:
            plan = plans.get(quad_nodes)
            if plan is None and rows * (quad_nodes // 2 + 1) <= PLAN_LIMIT:
                psi, _ = RecurrenceService.quadrature_nodes(quad_nodes)
                eta = f_n.delta_eta * np.arange(rows, dtype=np.float64)
                plan = plans[quad_nodes] = RecurrenceService.query_plan(eta, two_theta, psi)
        values = RecurrenceService._level_values(
            interpolate, rows, params, config, f_n.representation, quad_nodes, plan
        )
        f_next = GridFunction(
            tag=f_n.tag,
            eta_max=eta_max,
            delta_eta=f_n.delta_eta,
            values=values,
            representation=f_n.representation,
            level=f_n.level + 1,
            quad_nodes=quad_nodes,
            node_doubling_delta=delta,
        )
        logger.debug("f_%d: %d points, %d nodes, node doubling delta %.3e", f_next.level, rows, quad_nodes, delta)
        if f_n.tag in (TargetTag.TAU, TargetTag.LOG_TAU):
            rise = float(np.max(np.diff(values), initial=0.0))
            if rise > MONOTONICITY_SLACK * max(1.0, float(np.max(np.abs(values)))):
                logger.warning("f_%d of %s increases by %.3e somewhere in eta", f_next.level, f_n.tag.value, rise)
        return f_next

    @staticmethod
    def propagate(f_n: GridFunction, params: SlabParams, config: RecurrenceConfig) -> GridFunction:
        """
        One recurrence step f_n -> f_{n+1} on [0, eta_max - 2 theta].
        Args:
            f_n: The current level.
            params: The slab parameters.
            config: Grid and quadrature settings.
        Returns:
            The next level.
        """
        return RecurrenceService._propagate(f_n, params, config)

    @staticmethod
    def evaluate(grid: GridFunction, params: SlabParams, interpolation: Interpolation) -> float:
        """
        f_n(C), the value of a level at eta = 2 theta.
        """
        interpolate = RecurrenceService.interpolator(grid, interpolation)
        return float(interpolate(np.array([params.two_theta]))[0])

    @staticmethod
    def _chain(
        tau1: float,
        n_max: int,
        target: TargetFunction,
        config: RecurrenceConfig,
        schedule: Optional[list[int]] = None,
    ) -> tuple[list[float], list[float], list[int]]:
        """
        f_n(C) and the node-doubling delta of every level for n = 1 .. n_max, plus the node
        count of every propagation. A given schedule replaces the node-doubling search.
        """
        params = SlabService.slab_params(tau1)
        first = target.sample(np.array([params.two_theta]))[0]
        values, deltas, nodes = [float(first)], [0.0], []
        if n_max == 1:
            return values, deltas, nodes
        closed_form = config.start_from_closed_form and target.tag is TargetTag.TAU and n_max >= 3
        if closed_form:
            grid = RecurrenceService.closed_form_level3(n_max, params, config)
            f_2 = SlabService.f_small_n(2, params.C, params)
            values += [math.log(f_2), RecurrenceService.evaluate(grid, params, config.interpolation)]
            deltas += [0.0, 0.0]
        else:
            grid = RecurrenceService.build_initial_grid(target, n_max, params, config)
        plans: dict[int, np.ndarray] = {}
        while grid.level < n_max:
            fixed = schedule[len(nodes)] if schedule else None
            grid = RecurrenceService._propagate(grid, params, config, plans, fixed)
            values.append(RecurrenceService.evaluate(grid, params, config.interpolation))
            deltas.append(grid.node_doubling_delta)
            nodes.append(grid.quad_nodes)
        return values, deltas, nodes

    @staticmethod
    def average_series(
        tau1: float, n_max: int, target: TargetFunction, config: Optional[RecurrenceConfig] = None
    ) -> RecurrenceSeries:
        """
        <f> for every N = 1 .. N_max from one propagation chain.

        The error estimate of f_N sums the node-doubling changes of all levels up to N and the
        change against a chain on a grid twice as coarse that reuses the same node counts.
        A rounding floor growing with N comes on top.
        Args:
            tau1: Single-slab transmission probability.
            n_max: Largest stack size.
            target: The function to average.
            config: Grid and quadrature settings, defaults when omitted.
        Returns:
            The series, in log form for positive targets.
        """
        config = config or RecurrenceConfig()
        tau1 = SlabService.check_tau1(tau1)
        if n_max < 1:
            raise DomainError(f"N must be >= 1, got {n_max!r}")
        logger.info("Recurrence for %s at tau1=%s up to N=%d", target.tag.value, tau1, n_max)
        values, deltas, nodes = RecurrenceService._chain(tau1, n_max, target, config)
        if nodes and max(nodes) > config.quad_nodes:
            logger.info("Node doubling raised quad_nodes from %d to %d", config.quad_nodes, max(nodes))
        errors = np.cumsum(deltas)
        if config.estimate_error and n_max > 1:
            coarse_config = config.model_copy(update={"delta_eta": 2.0 * config.delta_eta, "estimate_error": False})
            coarse, _, _ = RecurrenceService._chain(tau1, n_max, target, coarse_config, nodes)
            errors = errors + np.abs(np.asarray(values) - np.asarray(coarse))
        levels = np.arange(n_max)
        errors = errors + ROUNDING_ULPS * np.finfo(np.float64).eps * levels * np.maximum(1.0, np.abs(values))
        return RecurrenceSeries(
            tau1=tau1,
            tag=target.tag,
            representation=target.representation,
            n_values=list(range(1, n_max + 1)),
            values=values,
            error_estimates=[float(error) for error in errors],
            node_doubling_deltas=[float(delta) for delta in np.maximum.accumulate(deltas)],
        )

    @staticmethod
    def average_over_stack(
        tau1: float, n_slabs: int, target: TargetFunction, config: Optional[RecurrenceConfig] = None
    ) -> RecurrenceResult:
        """
        <f(cosh 2 theta_tot)> over the N-1 random gap phases of an N-slab stack.
        Args:
            tau1: Single-slab transmission probability.
            n_slabs: Number of slabs N >= 1.
            target: The function to average.
            config: Grid and quadrature settings, defaults when omitted.
        Returns:
            The value (log <f> for positive targets) with its error estimate.
        """
        return RecurrenceService.average_series(tau1, n_slabs, target, config).result(n_slabs)
