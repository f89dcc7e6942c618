"""
Service simulating ensembles of random stacks.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from slabstack.errors import CrossCheckMismatch, DomainError, MatrixOverflowError
from slabstack.models.slab import EtaValue, SlabParams, TWO_PI
from slabstack.models.stats import EnsembleStats, RngSpec
from slabstack.services.matrix import MatrixService
from slabstack.services.slab import SlabService

logger = logging.getLogger(__name__)

CHUNKS = 64
MATRIX_CHECK_EVERY = 1000
MATRIX_CHECK_MAX_N = 50
MATRIX_CHECK_TOLERANCE = 1e-10


class ChunkTask(BaseModel):
    """
    One fixed block of trials, small enough to ship to a worker process.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    n_values: list[int] = Field(..., description="Sorted stack sizes to record")
    rng: RngSpec = Field(..., description="Stream the phases come from")
    first_trial: int = Field(..., ge=0, description="Global index of the first trial")
    trials: int = Field(..., ge=1, description="Trials in this block")
    matrix_check: bool = Field(False, description="Re-simulate sampled trials with the matrix product")


class MonteCarloService:
    """
    Service for sampling realizations and accumulating their statistics.
    """

    @staticmethod
    def fold_phases(params: SlabParams, phases: Sequence[float]) -> EtaValue:
        """
        Total rapidity of a stack with the given gap angles, starting from eta = 2 theta.
        """
        eta = EtaValue(eta=params.two_theta)
        slab = EtaValue(eta=params.two_theta)
        for psi in phases:
            eta = SlabService.compose_eta(eta, slab, psi)
        return eta

    @staticmethod
    def sample_realization(params: SlabParams, n_slabs: int, rng: np.random.Generator) -> EtaValue:
        """
        Draw the N-1 gap angles uniformly on [0, 2 pi) and fold the composition law.
        Args:
            params: The slab parameters.
            n_slabs: Number of slabs N >= 1.
            rng: Generator of the stream, typically from RngSpec.generator().
        Returns:
            The total rapidity of the realization.
        """
        if n_slabs < 1:
            raise DomainError(f"N must be >= 1, got {n_slabs!r}")
        phases = rng.random(n_slabs - 1) * TWO_PI
        return MonteCarloService.fold_phases(params, phases)

    @staticmethod
    def chunk_bounds(trials: int) -> list[tuple[int, int]]:
        """
        The fixed split of trials into at most 64 blocks, a function of trials only.
        """
        count = min(CHUNKS, trials)
        edges = [chunk * trials // count for chunk in range(count + 1)]
        return list(zip(edges[:-1], edges[1:]))

    @staticmethod
    def _matrix_check(
        task: ChunkTask, params: SlabParams, row: int, phases: np.ndarray, recorded: dict[int, np.ndarray]
    ) -> None:
        checked = [n for n in task.n_values if n <= MATRIX_CHECK_MAX_N]
        if not checked:
            return
        top = max(checked)
        trial = task.first_trial + row
        products = MatrixService.partial_products(params, phases[: top - 1])
        try:
            for n, product in enumerate(products, start=1):
                if n not in recorded:
                    continue
                expected = float(SlabService.tau_from_eta(recorded[n][row])[0]) if n > 1 else params.tau1
                got = product.transmission
                if abs(got - expected) > MATRIX_CHECK_TOLERANCE * expected:
                    raise CrossCheckMismatch(
                        f"Matrix product gives tau={got!r}, composition law gives {expected!r} at N={n}",
                        seed=task.rng.seed,
                        stream_id=task.rng.stream_id,
                        trial=trial,
                        phases=[float(p) for p in phases[: n - 1]],
                    )
        except MatrixOverflowError:
            logger.debug("Matrix check of trial %d stopped, the product left the safe range", trial)

    @staticmethod
    def run_chunk(task: ChunkTask) -> dict[int, EnsembleStats]:
        """
        Simulate one block of trials, one path per trial extended to the largest N.
        Args:
            task: The block to simulate.
        Returns:
            Statistics of the block for every recorded N.
        """
        params = SlabService.slab_params(task.tau1)
        n_top = task.n_values[-1]
        rng = task.rng.generator(task.first_trial)
        phases = rng.random((task.trials, n_top - 1)) * TWO_PI
        eta = np.full(task.trials, params.two_theta)
        wanted = set(task.n_values)
        recorded = {1: eta.copy()} if 1 in wanted else {}
        for gap in range(n_top - 1):
            eta = SlabService.compose_eta(eta, params.two_theta, phases[:, gap])
            if gap + 2 in wanted:
                recorded[gap + 2] = eta
        if task.matrix_check:
            for row in range(-task.first_trial % MATRIX_CHECK_EVERY, task.trials, MATRIX_CHECK_EVERY):
                MonteCarloService._matrix_check(task, params, row, phases[row], recorded)
        return {n: EnsembleStats.from_eta(task.tau1, n, recorded[n]) for n in task.n_values}

    @staticmethod
    def merge(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
        """
        Statistics of the concatenation of two samples of the same (tau1, N).
        Raises:
            IncompatibleStatsError: on mismatched tags.
        """
        return a.merge(b)

    @staticmethod
    def run_mc(
        tau1: float,
        n_values: Sequence[int],
        trials: int,
        rng: RngSpec,
        matrix_check: bool = True,
        workers: Optional[int] = None,
    ) -> dict[int, EnsembleStats]:
        """
        Simulate `trials` random stacks and collect the statistics of tau_N at every requested N.
        Args:
            tau1: Single-slab transmission probability.
            n_values: Stack sizes to record.
            trials: Number of realizations.
            rng: Seed and stream of the phases.
            matrix_check: Re-simulate one trial in 1000 through the matrix product for N <= 50.
            workers: Processes sharing the chunks, 1 runs in-process.
        Returns:
            N -> merged ensemble statistics.
        """
        tau1 = SlabService.check_tau1(tau1)
        if trials < 1:
            raise DomainError(f"trials must be >= 1, got {trials!r}")
        if not n_values:
            raise DomainError("At least one N is needed")
        ordered = sorted(set(int(n) for n in n_values))
        if ordered[0] < 1:
            raise DomainError(f"N must be >= 1, got {ordered[0]!r}")
        tasks = [
            ChunkTask(
                tau1=tau1,
                n_values=ordered,
                rng=rng,
                first_trial=start,
                trials=stop - start,
                matrix_check=matrix_check,
            )
            for start, stop in MonteCarloService.chunk_bounds(trials)
        ]
        workers = max(1, workers or 1)
        logger.info(
            "Monte Carlo: %d trials in %d chunks on %d workers, N up to %d", trials, len(tasks), workers, ordered[-1]
        )
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
                parts = list(executor.map(MonteCarloService.run_chunk, tasks))
        else:
            parts = [MonteCarloService.run_chunk(task) for task in tasks]
        results = {}
        for n in ordered:
            merged = EnsembleStats(tau1=tau1, n_slabs=n)
            for part in parts:
                merged = merged.merge(part[n])
            results[n] = merged
            if not merged.jensen_holds:
                logger.warning("Jensen inequality fails on the N=%d sample", n)
            inv_tau = merged.summary()["invtau"]
            if not inv_tau.reliable:
                logger.warning(
                    "<1/tau_%d> is unreliable, jackknife error is %.0f%% of the mean", n, 100 * inv_tau.relative_error
                )
        return results

