"""
This module contains the mergeable ensemble statistics produced by the Monte Carlo simulator.
"""

import math
from typing import Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp
from slabstack.errors import IncompatibleStatsError
from slabstack.numerics import exp_or_inf, log_cosh

# Jackknife relative errors above this mark an estimator as unreliable.
UNRELIABLE_RELATIVE_ERROR = 0.3
JENSEN_SLACK = 1e-12


class RngSpec(BaseModel):
    """
    Identifies one reproducible random stream.
    """

    model_config = ConfigDict(frozen=True)
    seed: int = Field(..., ge=0, lt=2**64, description="User seed")
    stream_id: int = Field(0, ge=0, lt=2**64, description="Independent stream under the same seed")

    def generator(self, first_trial: int = 0) -> np.random.Generator:
        """
        A Philox generator positioned at the block of trials starting at first_trial.
        Args:
            first_trial: Global index of the first trial drawn from the generator.
        """
        key = np.random.SeedSequence([self.seed, self.stream_id]).generate_state(2, np.uint64)
        counter = np.array([0, 0, first_trial, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))


class WelfordMoments(BaseModel):
    """
    Count, mean and sum of squared deviations of a sample.
    """

    model_config = ConfigDict(frozen=True)
    count: int = Field(0, ge=0, description="Number of samples")
    mean: float = Field(0.0, description="Sample mean")
    m2: float = Field(0.0, ge=0.0, description="Sum of squared deviations from the mean")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "WelfordMoments":
        """
        Moments of a block of samples.
        """
        if samples.size == 0:
            return cls()
        mean = float(np.mean(samples))
        return cls(count=int(samples.size), mean=mean, m2=float(np.sum((samples - mean) ** 2)))

    def merge(self, other: "WelfordMoments") -> "WelfordMoments":
        """
        Chan's pairwise combination.
        """
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return WelfordMoments(count=count, mean=mean, m2=m2)

    @property
    def variance(self) -> float:
        """
        Unbiased sample variance, nan below two samples.
        """
        if self.count < 2:
            return math.nan
        return self.m2 / (self.count - 1)

    @property
    def standard_error(self) -> float:
        """
        Standard error of the mean.
        """
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance / self.count)


class LogSumChunk(BaseModel):
    """
    log sum exp(x) of one chunk of samples.
    """

    model_config = ConfigDict(frozen=True)
    count: int = Field(..., ge=1, description="Samples in the chunk")
    log_sum: float = Field(..., description="log of the sum of exp(x)")


class LogMeanAccumulator(BaseModel):
    """
    Running maximum plus scaled sum of exp(x), for averaging exponentially large samples.
    Chunk records are kept for the jackknife.
    """

    model_config = ConfigDict(frozen=True)
    count: int = Field(0, ge=0, description="Number of samples")
    max_log: float = Field(-math.inf, description="Largest log sample seen")
    scaled_sum: float = Field(0.0, ge=0.0, description="sum of exp(x - max_log)")
    chunks: list[LogSumChunk] = Field(default_factory=list, description="Per-chunk log sums")

    @classmethod
    def from_logs(cls, log_samples: np.ndarray) -> "LogMeanAccumulator":
        """
        Accumulate one chunk of log samples.
        """
        if log_samples.size == 0:
            return cls()
        max_log = float(np.max(log_samples))
        scaled_sum = float(np.sum(np.exp(log_samples - max_log)))
        count = int(log_samples.size)
        return cls(
            count=count,
            max_log=max_log,
            scaled_sum=scaled_sum,
            chunks=[LogSumChunk(count=count, log_sum=max_log + math.log(scaled_sum))],
        )

    def merge(self, other: "LogMeanAccumulator") -> "LogMeanAccumulator":
        """
        Combine two accumulators without leaving log space.
        """
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        if other.max_log <= self.max_log:
            max_log = self.max_log
            scaled_sum = self.scaled_sum + math.exp(other.max_log - self.max_log) * other.scaled_sum
        else:
            max_log = other.max_log
            scaled_sum = math.exp(self.max_log - other.max_log) * self.scaled_sum + other.scaled_sum
        return LogMeanAccumulator(
            count=self.count + other.count,
            max_log=max_log,
            scaled_sum=scaled_sum,
            chunks=self.chunks + other.chunks,
        )

    @property
    def log_mean(self) -> float:
        """
        log of the sample mean of exp(x).
        """
        if self.count == 0:
            return math.nan
        return self.max_log + math.log(self.scaled_sum) - math.log(self.count)

    def jackknife_relative_error(self) -> float:
        """
        Delete-one-chunk jackknife standard error of the mean, relative to the mean.

        Leave-one-out means are formed as ratios m_{-k}/m, which stay O(1) however
        large the mean itself is.
        """
        if len(self.chunks) < 2:
            return math.nan
        log_total = float(logsumexp([chunk.log_sum for chunk in self.chunks]))
        ratios = np.array(
            [
                -math.expm1(chunk.log_sum - log_total) * self.count / (self.count - chunk.count)
                for chunk in self.chunks
            ]
        )
        k = len(ratios)
        return math.sqrt((k - 1) / k * float(np.sum((ratios - ratios.mean()) ** 2)))


class QuantitySummary(BaseModel):
    """
    Mean and standard error of one sampled quantity.
    """

    model_config = ConfigDict(frozen=True)
    name: str = Field(..., description="tau, logtau, invtau, cosh or cosh2")
    mean: float = Field(..., description="Sample mean, inf when it overflows")
    log_mean: Optional[float] = Field(None, description="log of the sample mean, for positive quantities")
    standard_error: float = Field(..., description="Standard error of the mean")
    relative_error: Optional[float] = Field(None, description="standard_error / mean")
    reliable: bool = Field(True, description="False when the relative error exceeds the reliability limit")


class EnsembleStats(BaseModel):
    """
    Statistics of tau_N over an ensemble of random stacks, mergeable across chunks.
    """

    model_config = ConfigDict(frozen=True)
    tau1: float = Field(..., description="Single-slab transmission probability")
    n_slabs: int = Field(..., ge=1, description="Number of slabs N")
    count: int = Field(0, ge=0, description="Number of realizations")
    tau: WelfordMoments = Field(default_factory=WelfordMoments, description="Moments of tau")
    log_tau: WelfordMoments = Field(default_factory=WelfordMoments, description="Moments of log tau")
    inv_tau: LogMeanAccumulator = Field(default_factory=LogMeanAccumulator, description="Mean of 1/tau")
    cosh: LogMeanAccumulator = Field(default_factory=LogMeanAccumulator, description="Mean of cosh 2 theta_tot")
    cosh_sq: LogMeanAccumulator = Field(default_factory=LogMeanAccumulator, description="Mean of cosh^2 2 theta_tot")

    @classmethod
    def from_eta(cls, tau1: float, n_slabs: int, eta: np.ndarray) -> "EnsembleStats":
        """
        Statistics of one chunk of realizations given their total rapidities.
        Args:
            tau1: Single-slab transmission probability.
            n_slabs: Number of slabs N.
            eta: Rapidity of every realization.
        """
        eta = np.asarray(eta, dtype=np.float64)
        half_log_cosh = log_cosh(0.5 * eta)
        if n_slabs == 1:
            log_tau = np.full(eta.shape, math.log(tau1))
            tau = np.full(eta.shape, tau1)
        else:
            log_tau = -2.0 * half_log_cosh
            tau = np.exp(log_tau)
        log_c = log_cosh(eta)
        return cls(
            tau1=tau1,
            n_slabs=n_slabs,
            count=int(eta.size),
            tau=WelfordMoments.from_samples(tau),
            log_tau=WelfordMoments.from_samples(log_tau),
            inv_tau=LogMeanAccumulator.from_logs(-log_tau),
            cosh=LogMeanAccumulator.from_logs(log_c),
            cosh_sq=LogMeanAccumulator.from_logs(2.0 * log_c),
        )

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """
        Statistics of the concatenated sample.
        """
        if self.tau1 != other.tau1 or self.n_slabs != other.n_slabs:
            raise IncompatibleStatsError(
                f"Cannot merge tau1={self.tau1}, N={self.n_slabs} with tau1={other.tau1}, N={other.n_slabs}"
            )
        return EnsembleStats(
            tau1=self.tau1,
            n_slabs=self.n_slabs,
            count=self.count + other.count,
            tau=self.tau.merge(other.tau),
            log_tau=self.log_tau.merge(other.log_tau),
            inv_tau=self.inv_tau.merge(other.inv_tau),
            cosh=self.cosh.merge(other.cosh),
            cosh_sq=self.cosh_sq.merge(other.cosh_sq),
        )

    @property
    def jensen_holds(self) -> bool:
        """
        log(mean tau) >= mean(log tau) on the sample.
        """
        if self.count == 0 or self.tau.mean <= 0.0:
            return False
        mean_log = self.log_tau.mean
        return math.log(self.tau.mean) >= mean_log - JENSEN_SLACK * max(1.0, abs(mean_log))

    @staticmethod
    def _log_summary(name: str, accumulator: LogMeanAccumulator) -> QuantitySummary:
        log_mean = accumulator.log_mean
        relative = accumulator.jackknife_relative_error()
        mean = exp_or_inf(log_mean)
        return QuantitySummary(
            name=name,
            mean=mean,
            log_mean=log_mean,
            standard_error=mean * relative if math.isfinite(relative) else math.nan,
            relative_error=relative,
            reliable=not relative > UNRELIABLE_RELATIVE_ERROR,
        )

    def summary(self) -> dict[str, QuantitySummary]:
        """
        Mean and standard error of every sampled quantity, keyed by its CLI target name.
        """
        tau_relative = self.tau.standard_error / self.tau.mean if self.tau.mean > 0.0 else math.nan
        return {
            "tau": QuantitySummary(
                name="tau",
                mean=self.tau.mean,
                log_mean=math.log(self.tau.mean) if self.tau.mean > 0.0 else -math.inf,
                standard_error=self.tau.standard_error,
                relative_error=tau_relative,
            ),
            "logtau": QuantitySummary(
                name="logtau", mean=self.log_tau.mean, standard_error=self.log_tau.standard_error
            ),
            "invtau": self._log_summary("invtau", self.inv_tau),
            "cosh": self._log_summary("cosh", self.cosh),
            "cosh2": self._log_summary("cosh2", self.cosh_sq),
        }
