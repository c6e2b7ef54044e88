"""Dirichlet-to-Neumann map of the scaled Laplace problem in the fluid layer.

The layer -1 + b(x) < z < eta(x) is flattened by z = theta(x, s) =
eta (s+1) + (1-b) s, s in [-1, 0].  In (x, s) the potential solves the
divergence-form problem

    d_x(H Psi_x - theta_x Psi_s) + d_s(-theta_x Psi_x + c Psi_s) = 0,
    c = (theta_x^2 + delta^-2)/H,

with Psi = phi on s = 0 and zero conormal flux on s = -1.  It is discretized
with Fourier collocation in x and Chebyshev-Gauss-Lobatto points in s, and
solved by GMRES, left-preconditioned by the exact per-mode solve of the
constant-depth flat problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .core import Bathymetry, PeriodicGrid, ScalarField


class DtNError(RuntimeError):
    pass


@dataclass(frozen=True)
class DtNConfig:
    nz: int = 32
    tol: float = 1e-13
    max_iter: int = 200

    def __post_init__(self):
        if self.nz < 8:
            raise ValueError("DtN needs nz >= 8")


@lru_cache(maxsize=16)
def chebyshev_s(nz: int) -> tuple[np.ndarray, np.ndarray]:
    """Lobatto points s_l in [-1, 0] (s_0 = 0 at the surface) and d/ds."""
    j = np.arange(nz + 1)
    x = np.cos(np.pi * j / nz)
    c = np.where((j == 0) | (j == nz), 2.0, 1.0) * (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(nz + 1))
    D -= np.diag(D.sum(axis=1))
    s = 0.5 * (x - 1.0)
    Ds = 2.0 * D
    s.setflags(write=False)
    Ds.setflags(write=False)
    return s, Ds


class DtNProblem:
    """The discretized mapped problem for one (eta, b, delta)."""

    def __init__(self, eta: np.ndarray, bathy: Bathymetry, delta: float, cfg: DtNConfig):
        grid = bathy.grid
        self.grid: PeriodicGrid = grid
        self.cfg = cfg
        b = bathy.b.values
        H = 1.0 + eta - b
        if np.min(H) <= 0:
            raise ValueError(f"depth {np.min(H):.3e} is not positive")
        self.s, self.Ds = chebyshev_s(cfg.nz)
        s = self.s[:, None]
        deta = grid.d1(eta)
        self.H = H
        self.eta_x = deta
        self.theta_x = deta[None, :] * (s + 1.0) - bathy.grad_b.values[None, :] * s
        self.inv_d2 = delta ** -2
        self.C = (self.theta_x ** 2 + self.inv_d2) / H[None, :]
        self.shape = (cfg.nz + 1, grid.modes)
        self._blocks = self._mode_blocks(float(np.mean(H)))

    def fluxes(self, psi: np.ndarray):
        psi_x = self.grid.d1(psi)
        psi_s = self.Ds @ psi
        fx = self.H * psi_x - self.theta_x * psi_s
        fs = -self.theta_x * psi_x + self.C * psi_s
        return fx, fs

    def apply(self, psi: np.ndarray) -> np.ndarray:
        fx, fs = self.fluxes(psi)
        out = self.grid.d1(fx) + self.Ds @ fs
        out[0] = psi[0]
        out[-1] = fs[-1]
        return out

    def _mode_blocks(self, Hb: float) -> np.ndarray:
        k = np.array(self.grid.rfft_wavenumbers)
        k[-1] = 0.0
        c = self.inv_d2 / Hb
        D2 = self.Ds @ self.Ds
        n = self.cfg.nz + 1
        A = np.empty((k.size, n, n))
        A[:] = c * D2
        A -= (Hb * k ** 2)[:, None, None] * np.eye(n)[None]
        A[:, 0, :] = 0.0
        A[:, 0, 0] = 1.0
        A[:, -1, :] = c * self.Ds[-1]
        return np.linalg.inv(A)

    def precondition(self, res: np.ndarray) -> np.ndarray:
        spec = np.fft.rfft(res, axis=-1)
        spec = np.einsum("kab,bk->ak", self._blocks, spec)
        return np.fft.irfft(spec, n=self.grid.modes, axis=-1)

    def solve(self, phi: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self.shape)
        rhs[0] = phi
        size = rhs.size
        shape = self.shape
        op = LinearOperator((size, size), dtype=float,
                            matvec=lambda v: self.precondition(self.apply(v.reshape(shape))).ravel())
        b = self.precondition(rhs).ravel()
        x, info = gmres(op, b, x0=b.copy(), rtol=self.cfg.tol, atol=0.0, restart=60,
                        maxiter=self.cfg.max_iter)
        res = np.linalg.norm(op.matvec(x) - b) / max(np.linalg.norm(b), 1e-300)
        if info != 0 and res > self.cfg.tol:
            raise DtNError(f"DtN solve did not converge: relative residual {res:.3e}")
        return x.reshape(shape)

    def dtn(self, phi: np.ndarray) -> np.ndarray:
        """(delta^-2 + eta_x^2) Psi_s / H - eta_x Psi_x at the surface."""
        psi = self.solve(phi)
        fx, fs = self.fluxes(psi)
        return fs[0]


def dtn_apply(eta: ScalarField, bathy: Bathymetry, delta: float, phi_trace: ScalarField,
              cfg: DtNConfig = DtNConfig()) -> ScalarField:
    """Lambda(eta, b, delta) phi = (delta^-2 Phi_z - eta_x Phi_x) at z = eta."""
    problem = DtNProblem(eta.values, bathy, delta, cfg)
    return ScalarField(eta.grid, problem.dtn(phi_trace.values))
