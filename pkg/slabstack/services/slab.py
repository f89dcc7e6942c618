"""
Service for the single-slab parameterization, the composition law and the closed-form statistics.
"""

import math
from typing import overload
import numpy as np
from numpy.typing import ArrayLike, NDArray
from slabstack.errors import DomainError
from slabstack.models.slab import EtaValue, ExactStats, SlabParams, TWO_PI
from slabstack.numerics import LOG_2, exp_or_inf, log_cosh, log_sinh

LOG_1_3 = math.log(1.0 / 3.0)
LOG_2_3 = math.log(2.0 / 3.0)


class SlabService:
    """
    Service for the slab model: parameters, composition of rapidities and exact results.
    """

    @staticmethod
    def check_tau1(tau1: float) -> float:
        """
        Validate a single-slab transmission probability.
        Args:
            tau1: The value to validate.
        Returns:
            tau1 as a float.
        """
        tau1 = float(tau1)
        if not math.isfinite(tau1) or tau1 <= 0.0 or tau1 > 1.0:
            raise DomainError(f"tau1 must satisfy 0 < tau1 <= 1, got {tau1!r}")
        return tau1

    @staticmethod
    def slab_params(tau1: float) -> SlabParams:
        """
        Build the constants of a single slab.
        Args:
            tau1: Single-slab transmission probability in (0, 1].
        Returns:
            The slab parameters C = 2/tau1 - 1, S = (2/tau1) sqrt(1 - tau1), theta.
        """
        tau1 = SlabService.check_tau1(tau1)
        if not math.isfinite(2.0 / tau1):
            raise DomainError(f"tau1={tau1!r} is too small, C = 2/tau1 - 1 overflows")
        c_minus_one = 2.0 * (1.0 - tau1) / tau1
        s = (2.0 / tau1) * math.sqrt(1.0 - tau1)
        # arccosh(C) = log(C + S), written to stay accurate as tau1 -> 1
        theta = 0.5 * math.log1p(c_minus_one + s)
        return SlabParams(tau1=tau1, C=2.0 / tau1 - 1.0, S=s, theta=theta)

    @overload
    @staticmethod
    def compose_eta(eta1: EtaValue, eta2: EtaValue, psi: float) -> EtaValue: ...

    @overload
    @staticmethod
    def compose_eta(eta1: ArrayLike, eta2: ArrayLike, psi: ArrayLike) -> NDArray[np.float64] | float: ...

    @staticmethod
    def compose_eta(eta1, eta2, psi):
        """
        Compose two rapidities joined by the angle psi:
        cosh(eta) = cosh(eta1) cosh(eta2) + cos(psi) sinh(eta1) sinh(eta2).

        The law is evaluated as sinh^2(eta/2) = cos^2(psi/2) sinh^2((eta1+eta2)/2)
        + sin^2(psi/2) sinh^2((eta1-eta2)/2), entirely in log space, so it neither
        overflows for large rapidities nor loses digits when eta is small.
        Args:
            eta1: First rapidity (EtaValue, float or array), >= 0.
            eta2: Second rapidity, >= 0.
            psi: Angle, any real (reduced mod 2 pi).
        Returns:
            The composed rapidity, as an EtaValue when both inputs are EtaValues,
            otherwise a float or an array broadcast from the inputs.
        """
        wrap = isinstance(eta1, EtaValue) and isinstance(eta2, EtaValue)
        e1 = np.asarray(eta1.eta if isinstance(eta1, EtaValue) else eta1, dtype=np.float64)
        e2 = np.asarray(eta2.eta if isinstance(eta2, EtaValue) else eta2, dtype=np.float64)
        half = 0.5 * np.mod(np.asarray(psi, dtype=np.float64), TWO_PI)
        total = e1 + e2
        spread = np.abs(e1 - e2)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_p = 2.0 * np.log(np.abs(np.cos(half)))
            log_q = 2.0 * np.log(np.abs(np.sin(half)))
            log_u2 = np.logaddexp(log_p + 2.0 * log_sinh(0.5 * total), log_q + 2.0 * log_sinh(0.5 * spread))
            log_u = 0.5 * log_u2
            asinh_large = log_u + np.log1p(np.sqrt(1.0 + np.exp(-2.0 * log_u)))
            asinh_small = np.arcsinh(np.exp(np.minimum(log_u, 0.0)))
        eta = 2.0 * np.where(log_u > 0.0, asinh_large, asinh_small)
        eta = np.clip(eta, spread, total)
        if wrap:
            return EtaValue(eta=float(eta))
        if eta.ndim == 0:
            return float(eta)
        return eta

    @staticmethod
    def tau_from_eta(eta: EtaValue | ArrayLike) -> tuple:
        """
        Transmission probability of a stack with rapidity eta.
        Args:
            eta: EtaValue, float or array of rapidities >= 0.
        Returns:
            (tau, log_tau) with tau = 2/(cosh eta + 1); log_tau stays finite where tau underflows.
        """
        value = np.asarray(eta.eta if isinstance(eta, EtaValue) else eta, dtype=np.float64)
        if np.any(value < 0.0):
            raise DomainError("eta must be >= 0")
        log_tau = -2.0 * log_cosh(0.5 * value)
        tau = np.exp(log_tau)
        if log_tau.ndim == 0:
            return float(tau), float(log_tau)
        return tau, log_tau

    @staticmethod
    def f_small_n(n: int, c_prime: float, params: SlabParams) -> float:
        """
        The intermediate averages f_1, f_2, f_3 of the transmission probability.
        Args:
            n: Level, 1, 2 or 3.
            c_prime: cosh of the rapidity of the remaining stack, >= 1.
            params: The slab parameters.
        Returns:
            f_n(C').
        """
        if c_prime < 1.0:
            raise DomainError(f"c_prime must be >= 1, got {c_prime!r}")
        if n == 1:
            return 2.0 / (c_prime + 1.0)
        if n == 2:
            return 2.0 / (c_prime + params.C)
        if n == 3:
            return 2.0 / math.sqrt((c_prime + 1.0) * (2.0 * params.C**2 + c_prime - 1.0))
        raise DomainError(f"Closed forms exist for n = 1, 2, 3 only, got {n!r}")

    @staticmethod
    def exact_statistics(tau1: float, n_slabs: int) -> ExactStats:
        """
        Every closed-form statistic of an N-slab stack.
        Args:
            tau1: Single-slab transmission probability.
            n_slabs: Number of slabs N >= 1.
        Returns:
            The exact statistics, large moments carried in log form.
        """
        params = SlabService.slab_params(tau1)
        if n_slabs < 1:
            raise DomainError(f"N must be >= 1, got {n_slabs!r}")
        n = n_slabs
        tau1 = params.tau1
        log_tau1 = math.log(tau1)
        log_c = math.log(params.C)
        log_inv = float(np.logaddexp(-LOG_2, -LOG_2 + n * log_c))
        log_cosh_sq = float(np.logaddexp(LOG_1_3, LOG_2_3 + n * math.log((3.0 * params.C**2 - 1.0) / 2.0)))
        tanh_sq = (params.S / params.C) ** 2
        log_ratio = float(np.logaddexp(LOG_1_3 - 2.0 * n * log_c, LOG_2_3 + n * math.log1p(0.5 * tanh_sq)))
        inv_c = tau1 / (2.0 - tau1)
        return ExactStats(
            tau1=tau1,
            n_slabs=n,
            mean_log_tau=n * log_tau1,
            bk_lower=exp_or_inf(n * log_tau1),
            log_bk_lower=n * log_tau1,
            ray=tau1 / (tau1 + n * (1.0 - tau1)),
            mean_inv_tau=exp_or_inf(log_inv),
            log_mean_inv_tau=log_inv,
            mean_cosh=exp_or_inf(n * log_c),
            log_mean_cosh=n * log_c,
            mean_cosh_sq=exp_or_inf(log_cosh_sq),
            log_mean_cosh_sq=log_cosh_sq,
            log_cosh_moment_ratio=log_ratio,
            normalized_cosh_variance=float(np.expm1(log_ratio)) if log_ratio < 700.0 else math.inf,
            log_normalized_cosh_variance_asymptotic=LOG_2_3 + n * math.log(1.5 - 0.5 * inv_c**2),
            mean_tau2=tau1 / (2.0 - tau1) if n == 2 else None,
            mean_tau3=tau1 / math.sqrt(4.0 / tau1 - 3.0) if n == 3 else None,
        )
