"""Log-log slope fits for order-of-accuracy studies."""

from __future__ import annotations

import numpy as np


def loglog_slope(x, y) -> float:
    """Ordinary least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.shape != y.shape:
        raise ValueError("need at least two matching samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def geometric(lo: float, hi: float, samples: int) -> np.ndarray:
    return np.geomspace(lo, hi, samples)


def expected_exponent(family, N: int) -> int:
    """4N+2 for the flat family, 4[N/2]+2 for the variable-bottom family."""
    from .core import Family

    if Family.parse(family) is Family.H1:
        return 4 * N + 2
    return 4 * (N // 2) + 2
