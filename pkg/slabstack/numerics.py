"""
Overflow-free hyperbolic helpers shared by the models and the services.
"""

import math
import numpy as np
from numpy.typing import ArrayLike, NDArray

LOG_2 = math.log(2.0)
# Above this argument log(sinh x) is taken from its exponential form.
_LOG_SINH_SWITCH = 0.5


def log_cosh(x: ArrayLike) -> NDArray[np.float64]:
    """
    log cosh(x) without overflow.
    """
    ax = np.abs(np.asarray(x, dtype=np.float64))
    return ax + np.log1p(np.exp(-2.0 * ax)) - LOG_2


def log_sinh(x: ArrayLike) -> NDArray[np.float64]:
    """
    log sinh(x) for x >= 0, -inf at 0.
    """
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        large = x + np.log1p(-np.exp(-2.0 * x)) - LOG_2
        small = np.log(np.sinh(np.minimum(x, _LOG_SINH_SWITCH)))
    return np.where(x > _LOG_SINH_SWITCH, large, small)


def exp_or_inf(log_value: float) -> float:
    """
    exp that saturates at inf instead of raising.
    """
    with np.errstate(over="ignore"):
        return float(np.exp(log_value))
