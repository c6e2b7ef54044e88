"""Linear dispersion of the model and its comparison with full water waves.

Linearizing about rest with a flat bottom and a plane wave of wavenumber
xi gives c^2 = 1/(1^T A(mu)^{-1} 1), mu = delta*|xi|, where
A_ij = 1/(p_i+p_j+1) + p_i p_j/((p_i+p_j-1) mu^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .core import ModelParams
from .fitting import loglog_slope
from .operators import coefficient_table


def _powers(params_or_p) -> tuple[int, ...]:
    if isinstance(params_or_p, ModelParams):
        return params_or_p.p
    return tuple(params_or_p)


def dispersion_matrix(mu: float, params) -> np.ndarray:
    t = coefficient_table(_powers(params))
    if mu <= 0:
        raise ValueError("dispersion matrix needs mu > 0")
    return t.grad + t.zero / mu ** 2


def cik_squared(mu: float, params) -> float:
    """Squared phase speed of the linearized model at mu = delta*|xi|."""
    p = _powers(params)
    if mu == 0:
        return 1.0
    A = dispersion_matrix(mu, p)
    ones = np.ones(len(p))
    x = np.linalg.solve(A, ones)
    val = 1.0 / float(ones @ x)
    if not np.isfinite(val):
        raise ArithmeticError(f"singular dispersion matrix at mu={mu!r}")
    return val


def cik_squared_mp(mu, params, dps: int = 50):
    """High-precision c_IK^2 (mpmath), for error fits below double precision."""
    p = _powers(params)
    t = coefficient_table(p)
    with mpmath.workdps(dps):
        mu = mpmath.mpf(mu)
        n = len(p)
        A = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                g = t.exact["grad"][i][j]
                z = t.exact["zero"][i][j]
                A[i, j] = mpmath.mpf(g.numerator) / g.denominator \
                    + mpmath.mpf(z.numerator) / z.denominator / mu ** 2
        x = mpmath.lu_solve(A, mpmath.matrix([1] * n))
        return 1 / mpmath.fsum(x)


def cww_squared(mu: float) -> float:
    """tanh(mu)/mu, the squared phase speed of linear water waves."""
    mu = float(mu)
    if mu == 0.0:
        return 1.0
    return float(np.tanh(mu) / mu)


def tanh_over_mu_series(terms: int) -> list[Fraction]:
    """Coefficients t_k of tanh(mu)/mu = sum t_k mu^{2k}, k < terms.

    From tanh' = 1 - tanh^2: (2k+1) t_k = -sum_{i+j=k-1} t_i t_j.
    """
    t = [Fraction(1)]
    for k in range(1, terms):
        acc = sum((t[i] * t[k - 1 - i] for i in range(k)), Fraction(0))
        t.append(-acc / (2 * k + 1))
    return t[:terms]


def solve_rational(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ArithmeticError("degenerate Padé table")
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] / M[r][r] for r in range(n)]


@dataclass(frozen=True)
class PadeApproximant:
    """num(y)/den(y) with y = mu^2; coefficients in ascending powers of y."""

    num: tuple[Fraction, ...]
    den: tuple[Fraction, ...]

    def __call__(self, mu):
        y = np.asarray(mu, dtype=float) ** 2
        nums = np.polyval([float(c) for c in self.num[::-1]], y)
        dens = np.polyval([float(c) for c in self.den[::-1]], y)
        return nums / dens

    def series(self, terms: int) -> list:
        """Taylor coefficients in y of num/den."""
        q = list(self.den) + [0] * terms
        a = list(self.num) + [0] * terms
        c = []
        for k in range(terms):
            ck = a[k] - sum(q[m] * c[k - m] for m in range(1, k + 1))
            c.append(ck / q[0])
        return c


def pade_tanh_over_mu(N: int) -> PadeApproximant:
    """[2N/2N] Padé approximant (in mu) of tanh(mu)/mu, i.e. [N/N] in mu^2."""
    if N < 0 or N > 6:
        raise ValueError("Padé order must satisfy 0 <= N <= 6")
    c = tanh_over_mu_series(2 * N + 1)
    if N == 0:
        return PadeApproximant((Fraction(1),), (Fraction(1),))
    # sum_{m=0}^N q_m c_{k-m} = 0 for k = N+1 .. 2N, q_0 = 1
    A = [[c[k - m] for m in range(1, N + 1)] for k in range(N + 1, 2 * N + 1)]
    b = [-c[k] for k in range(N + 1, 2 * N + 1)]
    q = [Fraction(1)] + solve_rational(A, b)
    a = [sum((q[m] * c[k - m] for m in range(k + 1)), Fraction(0)) for k in range(N + 1)]
    return PadeApproximant(tuple(a), tuple(q))


def dispersion_errors(params, mus: Sequence[float], dps: int = 50) -> np.ndarray:
    """|c_WW^2 - c_IK^2| at each mu, evaluated in extended precision."""
    out = []
    with mpmath.workdps(dps):
        for mu in mus:
            m = mpmath.mpf(mu)
            out.append(float(abs(mpmath.tanh(m) / m - cik_squared_mp(m, params, dps))))
    return np.array(out)


def dispersion_error_order(params, mu_lo: float, mu_hi: float, samples: int) -> float:
    """Least-squares slope of log|c_WW^2 - c_IK^2| against log mu."""
    if not (0 < mu_lo < mu_hi <= 0.5):
        raise ValueError("need 0 < mu_lo < mu_hi <= 0.5")
    if samples < 5:
        raise ValueError("need at least 5 samples")
    mus = np.geomspace(mu_lo, mu_hi, samples)
    err = dispersion_errors(params, mus)
    if err[-1] < 1e-14:
        raise ValueError(f"error {err[-1]:.2e} at mu_hi is below 1e-14; increase the mu range")
    return loglog_slope(mus, err)


def dispersion_curve(params, mu_min: float, mu_max: float, samples: int) -> np.ndarray:
    """Rows (mu, cik2, cww2, abs_err) on a geometric mu grid."""
    mus = np.geomspace(mu_min, mu_max, samples)
    cik = np.array([cik_squared(m, params) for m in mus])
    cww = np.array([cww_squared(m) for m in mus])
    return np.column_stack([mus, cik, cww, np.abs(cww - cik)])


def model_frequency(k, params: ModelParams) -> np.ndarray:
    """Linear angular frequency |k| c_IK(delta |k|)."""
    k = np.abs(np.atleast_1d(np.asarray(k, dtype=float)))
    c2 = np.array([cik_squared(params.delta * kk, params) for kk in k])
    return k * np.sqrt(c2)

