"""Recursion constants, the closed-form recursions satisfied by compatible
potentials, and the remainder fields of the extended approximate potential.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import Bathymetry, Family, ModelParams, PotentialVec, ScalarField
from .dispersion import solve_rational


@lru_cache(maxsize=None)
def beta_constants(N: int) -> tuple[Fraction, ...]:
    """beta_{j,N}, j = 1..N, from sum_j 4ij/(2(i+j)-1) beta_j = -2i/((2(N+i)+1)(2N+1))."""
    if N < 1:
        return ()
    A = [[Fraction(4 * i * j, 2 * (i + j) - 1) for j in range(1, N + 1)] for i in range(1, N + 1)]
    b = [Fraction(-2 * i, (2 * (N + i) + 1) * (2 * N + 1)) for i in range(1, N + 1)]
    return tuple(solve_rational(A, b))


@lru_cache(maxsize=None)
def gamma_constants(k: int, size: int) -> tuple[Fraction, ...]:
    """gamma_{j,k}, j = 1..size, from sum_j ij/(i+j-1) gamma_j = -i/((k+i+1)(k+1))."""
    if size < 1:
        return ()
    A = [[Fraction(i * j, i + j - 1) for j in range(1, size + 1)] for i in range(1, size + 1)]
    b = [Fraction(-i, (k + i + 1) * (k + 1)) for i in range(1, size + 1)]
    return tuple(solve_rational(A, b))


def _parts(phi: PotentialVec, bathy: Bathymetry):
    grid = phi.grid
    arr = phi.array
    lap = grid.d1(grid.d1(arr))
    db = bathy.grad_b.values

    def Q(v):
        return grid.d1(v * db) + db * grid.d1(v)

    return grid, arr, lap, db, Q


def recursion_prediction(phi: PotentialVec, eta: ScalarField, bathy: Bathymetry,
                         params: ModelParams) -> np.ndarray:
    """Right-hand sides of the recursions for phi_1 .. phi_N, shape (N, M).

    Flat family:   phi_j = delta^2 (-Lap phi_{j-1}/(2j(2j-1)) + beta_{j,N} H^{2(N-j)+2} Lap phi_N).
    General family: phi_j = delta^2/(1+delta^2 b'^2) {...} with gamma_{j,N-1}, gamma_{j,N} and Q.
    """
    N = len(phi) - 1
    if N < 1:
        return np.zeros((0, phi.grid.modes))
    grid, arr, lap, db, Q = _parts(phi, bathy)
    H = 1.0 + eta.values - bathy.b.values
    d2 = params.delta ** 2
    out = np.empty((N, grid.modes))
    if params.family is Family.H1:
        beta = beta_constants(N)
        for j in range(1, N + 1):
            out[j - 1] = d2 * (-lap[j - 1] / (2 * j * (2 * j - 1))
                               + float(beta[j - 1]) * H ** (2 * (N - j) + 2) * lap[N])
        return out
    g_lo = gamma_constants(N - 1, N)
    g_hi = gamma_constants(N, N)
    mixed = lap[N - 1] - N * Q(arr[N])
    factor = d2 / (1.0 + d2 * db * db)
    for j in range(1, N + 1):
        if j == 1:
            head = db * grid.d1(arr[0])
        else:
            head = -lap[j - 2] / (j * (j - 1)) + Q(arr[j - 1]) / j
        out[j - 1] = factor * (head + float(g_lo[j - 1]) * H ** (N - j + 1) * mixed
                               + float(g_hi[j - 1]) * H ** (N - j + 2) * lap[N])
    return out


def recursion_residual(phi: PotentialVec, eta: ScalarField, bathy: Bathymetry,
                       params: ModelParams) -> float:
    """max |phi_j - prediction_j| / max |phi_j| over j >= 1."""
    pred = recursion_prediction(phi, eta, bathy, params)
    if pred.size == 0:
        return 0.0
    actual = phi.array[1:]
    scale = np.max(np.abs(actual))
    return float(np.max(np.abs(actual - pred)) / scale) if scale > 0 else float(np.max(np.abs(pred)))


@dataclass(frozen=True)
class RemainderFields:
    r: tuple[ScalarField, ...]
    rB: ScalarField
    family: Family

    def interior(self, z: float | np.ndarray, bathy: Bathymetry) -> np.ndarray:
        """R(x, z) = sum_j s^{p_j} r_j with s = z+1 (flat) or z+1-b."""
        z = np.asarray(z, dtype=float)
        s = z + 1.0 - bathy.b.values
        step = 2 if self.family is Family.H1 else 1
        return sum(s ** (step * j) * rj.values for j, rj in enumerate(self.r))


def remainder_fields(phi_tilde: PotentialVec, eta: ScalarField, bathy: Bathymetry,
                     params: ModelParams) -> RemainderFields:
    """Interior and bottom remainders of the extended potential (2N+3 components).

    The extended potential solves Lap + delta^-2 d_z^2 = R inside the fluid with
    the bottom condition residual r_B (identically zero on a flat bottom).
    """
    K = len(phi_tilde) - 1
    if K != 2 * params.N + 2:
        raise ValueError(f"expected {2 * params.N + 3} components, got {K + 1}")
    grid, arr, lap, db, Q = _parts(phi_tilde, bathy)
    H = 1.0 + eta.values - bathy.b.values
    r = np.empty((K + 1, grid.modes))
    if params.family is Family.H1:
        beta = beta_constants(K)
        for j in range(K):
            r[j] = (2 * j + 2) * (2 * j + 1) * float(beta[j]) * H ** (2 * K - 2 * j) * lap[K]
        r[K] = lap[K]
        rB = np.zeros(grid.modes)
    else:
        g_lo = gamma_constants(K - 1, K)
        g_hi = gamma_constants(K, K)
        mixed = lap[K - 1] - K * Q(arr[K])
        for j in range(K - 1):
            r[j] = (j + 2) * (j + 1) * (float(g_lo[j + 1]) * H ** (K - 1 - j) * mixed
                                        + float(g_hi[j + 1]) * H ** (K - j) * lap[K])
        r[K - 1] = mixed
        r[K] = lap[K]
        rB = float(g_lo[0]) * H ** K * mixed + float(g_hi[0]) * H ** (K + 1) * lap[K]
    fields = tuple(ScalarField(grid, row) for row in r)
    return RemainderFields(fields, ScalarField(grid, rB), params.family)
