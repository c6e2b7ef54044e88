"""Solvers for the compatibility system and the implicit time derivative."""

from __future__ import annotations

from dataclasses import dataclass, field

from functools import lru_cache

import numpy as np

from .core import Bathymetry, ModelParams, PotentialVec, ScalarField, State, H_MIN_DEFAULT
from .operators import OperatorContext, coefficient_table


class SolverError(RuntimeError):
    """Raised when an iterative solve stalls or a post-check fails."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-12
    max_iter: int = 500
    order: int | None = None
    precondition: bool = True

    def __post_init__(self):
        if not self.tol >= 1e-14:
            raise ValueError(f"tol must be >= 1e-14, got {self.tol!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class RHSVector:
    F0: ScalarField
    Fprime: tuple[ScalarField, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "Fprime", tuple(self.Fprime))
        if any(f.grid != self.F0.grid for f in self.Fprime):
            raise ValueError("right-hand side components live on different grids")

    @property
    def array(self) -> np.ndarray:
        return np.stack([self.F0.values] + [f.values for f in self.Fprime])

    @classmethod
    def from_array(cls, grid, array: np.ndarray) -> "RHSVector":
        rows = [ScalarField(grid, r) for r in array]
        return cls(rows[0], tuple(rows[1:]))


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0


def _vec_norm(ctx: OperatorContext, arr: np.ndarray) -> float:
    return float(np.sqrt(ctx.grid.spacing * np.sum(arr * arr)))


@lru_cache(maxsize=64)
def _mode_blocks(p: tuple[int, ...], k: tuple[float, ...], Hb: float, zero_weight: float) -> np.ndarray:
    t = coefficient_table(p)
    s = t.s
    k = np.array(k)
    g = t.grad * Hb ** (s + 1.0)
    z = t.zero * Hb ** (s - 1.0) * zero_weight
    Lhat = k[:, None, None] ** 2 * g[None] + z[None]
    h = Hb ** np.array(p[1:], dtype=float)
    E = np.vstack([-h[None, :], np.eye(len(p) - 1)])
    Phat = np.einsum("ai,kab,bj->kij", E, Lhat, E)
    inv = np.linalg.inv(Phat)
    inv.setflags(write=False)
    return inv


def mode_preconditioner(ctx: OperatorContext) -> np.ndarray:
    """Inverse blocks of the constant-depth symbol of P, one N x N block per rfft mode.

    The mean depth is rounded to three decimals so that consecutive solves
    reuse the factorization; the blocks only need to be spectrally close to P.
    """
    k = np.array(ctx.grid.rfft_wavenumbers)
    k[-1] = 0.0
    Hb = round(float(np.mean(ctx.H)), 3)
    zero_weight = ctx.inv_delta2 + round(float(np.mean(ctx.db ** 2)), 3)
    return _mode_blocks(tuple(int(v) for v in ctx.p), tuple(k), Hb, zero_weight)


def depth_scaling(ctx: OperatorContext) -> np.ndarray:
    """Pointwise factors (Hbar/H)^{p_i - 1/2}, i >= 1, that equalize the depth powers of P."""
    Hb = float(np.mean(ctx.H))
    return (Hb / ctx.H)[None, :] ** (ctx.p[1:, None] - 0.5)


class _Preconditioner:
    def __init__(self, ctx: OperatorContext, enabled: bool):
        self.ctx = ctx
        self.enabled = enabled
        if enabled:
            self.blocks = mode_preconditioner(ctx)
            self.scale = depth_scaling(ctx)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if not self.enabled:
            return r
        spec = np.fft.rfft(r * self.scale, axis=-1)
        spec = np.einsum("kij,jk->ik", self.blocks, spec)
        return self.scale * np.fft.irfft(spec, n=self.ctx.grid.modes, axis=-1)


def _pcg(ctx: OperatorContext, residual, x: np.ndarray, target: float,
         opts: SolveOptions, info: SolveInfo) -> np.ndarray:
    """Preconditioned CG on P with a caller-supplied true residual ``residual(x)``.

    Iterates on the recursive residual and re-checks the true residual when
    it reports convergence, restarting if round-off has let the two drift apart.
    """
    M = _Preconditioner(ctx, opts.precondition)
    h = ctx.grid.spacing
    r = residual(x)
    rnorm = _vec_norm(ctx, r)
    iterations = 0
    for _restart in range(3):
        if rnorm <= target:
            break
        z = M(r)
        rz = h * np.sum(r * z)
        p = z
        while iterations < opts.max_iter:
            Ap = ctx.apply_P(p)
            pAp = h * np.sum(p * Ap)
            if pAp <= 0:
                raise SolverError(f"P lost positivity (p.Ap = {pAp:.3e})", rnorm)
            alpha = rz / pAp
            x = x + alpha * p
            r = r - alpha * Ap
            iterations += 1
            rnorm = _vec_norm(ctx, r)
            if rnorm <= target:
                break
            z = M(r)
            rz_new = h * np.sum(r * z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = residual(x)
        rnorm = _vec_norm(ctx, r)
        if iterations >= opts.max_iter:
            break
    info.iterations += iterations
    info.residual = rnorm
    if rnorm > target:
        raise SolverError(
            f"CG stopped after {iterations} iterations with residual {rnorm:.3e} "
            f"above the target {target:.3e}", rnorm)
    return x


def cg_solve_P(ctx: OperatorContext, rhs, opts: SolveOptions,
               guess=None, info: SolveInfo | None = None) -> list[ScalarField]:
    """Solve P phi' = rhs to relative residual ``opts.tol`` in the discrete L2 norm."""
    if ctx.n < 2:
        raise ValueError("P is empty for N = 0")
    b = np.stack([f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
                  for f in rhs])
    if b.shape[0] != ctx.n - 1:
        raise ValueError(f"expected {ctx.n - 1} right-hand side components, got {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    info = info if info is not None else SolveInfo()
    x0 = np.zeros_like(b) if guess is None else np.array(guess, dtype=float)
    if not np.any(b):
        return [ScalarField(ctx.grid, np.zeros(ctx.grid.modes)) for _ in b]
    x = _pcg(ctx, lambda v: b - ctx.apply_P(v), x0, opts.tol * _vec_norm(ctx, b), opts, info)
    return [ScalarField(ctx.grid, row) for row in x]


def solve_scrL_array(ctx: OperatorContext, F: np.ndarray, opts: SolveOptions,
                     guess: np.ndarray | None = None,
                     info: SolveInfo | None = None) -> np.ndarray:
    """Array version of :func:`solve_scrL`; ``guess`` is an initial phi' iterate.

    With phi = lift(phi') + (F_0, 0, ..., 0) the first row holds exactly and
    the remaining rows reduce to P phi' = F' - (L_i0 - H^{p_i} L_00) F_0.
    The residual is always evaluated through the assembled operator on phi,
    so convergence to tol*||F|| is the post-check itself.
    """
    info = info if info is not None else SolveInfo()
    if F.shape[0] != ctx.n:
        raise ValueError(f"expected {ctx.n} right-hand side components, got {F.shape[0]}")
    if ctx.n == 1:
        return F.copy()
    fnorm = _vec_norm(ctx, F)
    if fnorm == 0.0:
        return np.zeros_like(F)

    def full(x):
        phi = ctx.lift(x)
        phi[0] += F[0]
        return phi

    def residual(x):
        return F[1:] - ctx.restrict(ctx.apply_L(full(x)))

    x0 = np.zeros_like(F[1:]) if guess is None else np.array(guess, dtype=float)
    x = _pcg(ctx, residual, x0, opts.tol * fnorm, opts, info)
    return full(x)


def solve_scrL(ctx: OperatorContext, F: RHSVector, opts: SolveOptions) -> PotentialVec:
    """Solve the compatibility system for phi given its right-hand side."""
    arr = F.array
    return PotentialVec.from_array(ctx.grid, solve_scrL_array(ctx, arr, opts))


def assemble_F_array(ctx: OperatorContext, eta: np.ndarray, phi: np.ndarray):
    """Return (F, deta, u, w) for the implicit phi time derivative."""
    dphi, lphi = ctx.grid.d1d2(phi)
    deta = ctx.apply_L0(phi, dphi)
    u, w = ctx.uw(phi, dphi)
    F = np.empty_like(phi)
    F[0] = -eta - 0.5 * (u * u + ctx.params.delta ** 2 * w * w)
    if ctx.n > 1:
        F[1:] = -ctx.apply_dH_scrL(phi, (dphi, lphi)) * deta
    return F, deta, u, w


def assemble_F(state: State) -> RHSVector:
    ctx = OperatorContext.from_state(state)
    F, _, _, _ = assemble_F_array(ctx, state.eta.values, state.phi.array)
    return RHSVector.from_array(state.grid, F)


def time_derivative_array(ctx: OperatorContext, eta: np.ndarray, phi: np.ndarray,
                          opts: SolveOptions, guess: np.ndarray | None = None,
                          info: SolveInfo | None = None):
    """Return (deta, dphi, u, w) as arrays."""
    F, deta, u, w = assemble_F_array(ctx, eta, phi)
    dphi = solve_scrL_array(ctx, F, opts, guess, info)
    return deta, dphi, u, w


def time_derivative(state: State, opts: SolveOptions) -> tuple[ScalarField, PotentialVec]:
    ctx = OperatorContext.from_state(state)
    deta, dphi, _, _ = time_derivative_array(ctx, state.eta.values, state.phi.array, opts)
    return ScalarField(state.grid, deta), PotentialVec.from_array(state.grid, dphi)


def _trace_solve(eta0: ScalarField, phi0_trace: ScalarField, bathy: Bathymetry,
                 params: ModelParams, opts: SolveOptions, h_min: float) -> np.ndarray:
    H = 1.0 + eta0.values - bathy.b.values
    if np.min(H) < h_min:
        raise ValueError(f"initial depth {np.min(H):.3e} below h_min={h_min:g}")
    ctx = OperatorContext(H, bathy, params)
    F = np.zeros((params.N + 1, eta0.grid.modes))
    F[0] = phi0_trace.values
    return solve_scrL_array(ctx, F, opts)


def build_initial_data(eta0: ScalarField, phi0_trace: ScalarField, bathy: Bathymetry,
                       params: ModelParams, opts: SolveOptions = SolveOptions(),
                       h_min: float = H_MIN_DEFAULT, time: float = 0.0) -> State:
    """State whose potential satisfies the compatibility relations with the given trace."""
    phi = _trace_solve(eta0, phi0_trace, bathy, params, opts, h_min)
    return State(eta0, PotentialVec.from_array(eta0.grid, phi), params, bathy,
                 time=time, h_min=h_min)


def solve_modified_potential(eta: ScalarField, phi_trace: ScalarField, bathy: Bathymetry,
                             params: ModelParams, opts: SolveOptions = SolveOptions(),
                             h_min: float = H_MIN_DEFAULT) -> PotentialVec:
    """Same construction as the initial data but at order 2N+2 (2N+3 components)."""
    ext = params.with_order(2 * params.N + 2)
    phi = _trace_solve(eta, phi_trace, bathy, ext, opts, h_min)
    return PotentialVec.from_array(eta.grid, phi)
