"""Residuals of model states in the water-wave equations and their delta-order."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Bathymetry, ModelParams, PeriodicGrid, ScalarField, State
from .dtn import DtNConfig, DtNProblem
from .elliptic import SolveOptions, build_initial_data, time_derivative_array
from .fitting import expected_exponent, loglog_slope
from .operators import OperatorContext


class UnderResolvedError(RuntimeError):
    """The DtN residual changes by more than the allowed fraction under nz refinement."""


@dataclass(frozen=True)
class ResidualReport:
    r1_norm: float
    r2_norm: float
    compat_norms: tuple[float, ...]
    delta: float
    r1: np.ndarray = field(repr=False, default=None)
    r2: np.ndarray = field(repr=False, default=None)


def residual_fields(state: State, cfg: DtNConfig, opts: SolveOptions = SolveOptions()):
    """Pointwise r1 = eta_t - Lambda phi and r2 (Bernoulli-type) residuals."""
    ctx = OperatorContext.from_state(state)
    grid = state.grid
    eta = state.eta.values
    phi = state.phi.array
    deta, dphi, _, _ = time_derivative_array(ctx, eta, phi, opts)
    p = ctx.p
    hp = ctx.Hpow
    trace = ctx.surface_sum(phi)
    dtrace = ctx.surface_sum(dphi) + deta * np.einsum("j,jm,jm->m", p, hp[p], phi)
    problem = DtNProblem(eta, state.bathy, state.params.delta, cfg)
    lam = problem.dtn(trace)
    r1 = deta - lam
    d2 = state.params.delta ** 2
    ex = problem.eta_x
    tx = grid.d1(trace)
    r2 = dtrace + eta + 0.5 * tx ** 2 - d2 * (lam + ex * tx) ** 2 / (2.0 * (1.0 + d2 * ex ** 2))
    return r1, r2, ctx


def ww_residuals(state: State, cfg: DtNConfig = DtNConfig(),
                 opts: SolveOptions = SolveOptions()) -> ResidualReport:
    r1, r2, ctx = residual_fields(state, cfg, opts)
    grid = state.grid
    compat = tuple(grid.norm(row) for row in ctx.apply_scrL(state.phi.array)[1:])
    return ResidualReport(grid.norm(r1), grid.norm(r2), compat, state.params.delta, r1, r2)


@dataclass
class OrderStudy:
    deltas: list
    r1: list
    r2: list
    r1_slope: float
    r2_slope: float
    expected: int
    params: ModelParams

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.deltas, self.r1, self.r2))


def consistency_order_study(grid: PeriodicGrid, eta0: np.ndarray, phi0_trace: np.ndarray,
                            bathy: Bathymetry, params: ModelParams, deltas: Sequence[float],
                            dtn_cfg: DtNConfig = DtNConfig(),
                            opts: SolveOptions = SolveOptions(tol=1e-12),
                            refine_tol: float = 0.1) -> OrderStudy:
    """Residual norms of initial-data states over a delta sweep, with log-log slopes.

    The same physical (eta0, trace) is prepared at every delta.  Each r1 is
    recomputed with 1.5x the vertical resolution; a relative change above
    ``refine_tol`` raises :class:`UnderResolvedError`.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("an order study needs at least four deltas")
    fine = DtNConfig(nz=dtn_cfg.nz + dtn_cfg.nz // 2, tol=dtn_cfg.tol, max_iter=dtn_cfg.max_iter)
    r1s, r2s = [], []
    for delta in deltas:
        pr = params.with_delta(delta)
        st = build_initial_data(ScalarField(grid, eta0), ScalarField(grid, phi0_trace), bathy, pr, opts)
        rep = ww_residuals(st, dtn_cfg, opts)
        check = ww_residuals(st, fine, opts)
        if abs(check.r1_norm - rep.r1_norm) > refine_tol * check.r1_norm:
            raise UnderResolvedError(
                f"delta={delta}: r1 changes from {rep.r1_norm:.3e} to {check.r1_norm:.3e} "
                f"when nz goes {dtn_cfg.nz} -> {fine.nz}")
        r1s.append(rep.r1_norm)
        r2s.append(rep.r2_norm)
    return OrderStudy(deltas, r1s, r2s, loglog_slope(deltas, r1s), loglog_slope(deltas, r2s),
                      expected_exponent(params.family, params.N), params)
