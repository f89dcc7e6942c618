"""
Service for the full 2x2 complex transfer-matrix product, used to cross-check the scalar composition.
"""

import math
from typing import Iterator, Sequence
import numpy as np
from slabstack.errors import DomainError, MatrixOverflowError
from slabstack.models.slab import EtaValue, PhaseSequence, SlabParams, TransferMatrix

# Entries beyond this make |T|^2 and the flux products lose their meaning.
SAFE_MAGNITUDE = 1e60


class MatrixService:
    """
    Service for building and multiplying slab and gap transfer matrices.
    """

    @staticmethod
    def slab_matrix(theta: float) -> np.ndarray:
        """
        t(theta) = [[cosh theta, sinh theta], [sinh theta, cosh theta]], all free phases set to zero.
        """
        c, s = math.cosh(theta), math.sinh(theta)
        return np.array([[c, s], [s, c]], dtype=np.complex128)

    @staticmethod
    def gap_matrix(phi: float) -> np.ndarray:
        """
        D(phi) = diag(exp(i phi), exp(-i phi)).
        """
        return np.diag([np.exp(1j * phi), np.exp(-1j * phi)]).astype(np.complex128)

    @staticmethod
    def outgoing_phase(matrix: np.ndarray) -> float:
        """
        The phase gamma' of a product written as D(gamma) t(theta) D(gamma').
        Args:
            matrix: The partial product.
        Returns:
            gamma', 0 when the product carries no rapidity.
        """
        w = matrix[0, 0] * np.conj(matrix[0, 1])
        if abs(w) == 0.0:
            return 0.0
        return 0.5 * float(np.angle(w))

    @staticmethod
    def partial_products(params: SlabParams, phases: PhaseSequence | Sequence[float]) -> Iterator[TransferMatrix]:
        """
        Yield the partial products t, t D t, t D t D t, ... of a stack.

        Each gap matrix is D(psi_k/2 - gamma'_k), gamma'_k being the outgoing phase of the
        partial product so far, so that the k-th composition happens at exactly psi_k.
        Args:
            params: The slab parameters.
            phases: The N-1 gap angles.
        Returns:
            An iterator over the N partial products.
        """
        angles = phases.angles if isinstance(phases, PhaseSequence) else list(phases)
        slab = MatrixService.slab_matrix(params.theta)
        product = slab.copy()
        yield TransferMatrix(matrix=product)
        for psi in angles:
            gap = MatrixService.gap_matrix(0.5 * psi - MatrixService.outgoing_phase(product))
            product = product @ gap @ slab
            largest = float(np.max(np.abs(product)))
            if not math.isfinite(largest) or largest > SAFE_MAGNITUDE:
                raise MatrixOverflowError(
                    f"Transfer matrix entry reached {largest:.3e} after {len(angles)} gaps at tau1={params.tau1}; "
                    "use the scalar log-domain path for stacks this opaque"
                )
            yield TransferMatrix(matrix=product)

    @staticmethod
    def simulate_matrix_stack(params: SlabParams, phases: PhaseSequence | Sequence[float]) -> tuple[float, EtaValue]:
        """
        Transmission of one realization through the complex matrix product.
        Args:
            params: The slab parameters.
            phases: The N-1 gap angles.
        Returns:
            (tau, eta) with tau = 1/|T_22|^2 and eta = 2 asinh|T_12|.
        """
        if phases is None:
            raise DomainError("phases must be a sequence (empty for a single slab)")
        total = None
        for total in MatrixService.partial_products(params, phases):
            pass
        tau = total.transmission
        eta = 2.0 * math.asinh(abs(total.matrix[0, 1]))
        return tau, EtaValue(eta=eta)
