"""Method-of-lines RK4 integration with conservation diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PotentialVec, ScalarField, State
from .dispersion import model_frequency
from .elliptic import SolveInfo, SolveOptions, build_initial_data, time_derivative, time_derivative_array
from .operators import OperatorContext

RK4_IMAG_BOUND = 2.0 * math.sqrt(2.0)


class GuardTrip(RuntimeError):
    """A depth, sign-condition or finiteness guard fired during a run."""

    def __init__(self, message: str, time: float, location: float | None = None,
                 trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.time = time
        self.location = location
        self.trajectory = trajectory


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    projection: bool = False
    solve: SolveOptions = field(default_factory=SolveOptions)
    diag_stride: int = 1
    store_phi: bool = False
    check_cfl: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.diag_stride < 1:
            raise ValueError("diag_stride must be a positive integer")

    @property
    def steps(self) -> int:
        return max(1, int(math.ceil(self.t_end / self.dt - 1e-9)))


@dataclass
class Diagnostics:
    mass: float
    energy: float
    compat_resid: float
    min_H: float
    min_a: float


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    final: State | None = None
    cg_iterations: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])

    def rows(self) -> list[tuple]:
        return [(t, d.mass, d.energy, d.compat_resid, d.min_H, d.min_a)
                for t, d in zip(self.times, self.diagnostics)]


def max_linear_frequency(state: State) -> float:
    k = state.grid.rfft_wavenumbers[:-1]
    return float(np.max(model_frequency(k, state.params)))


def check_cfl(state: State, dt: float) -> float:
    """Return dt * max|omega| and raise if it exceeds the RK4 imaginary-axis bound."""
    courant = dt * max_linear_frequency(state)
    if courant >= RK4_IMAG_BOUND:
        raise ValueError(f"dt={dt:g} violates the RK4 stability bound: "
                         f"dt*max|omega| = {courant:.3f} >= {RK4_IMAG_BOUND:.3f}")
    return courant


def rhs(state: State, opts: SolveOptions) -> tuple[ScalarField, PotentialVec]:
    return time_derivative(state, opts)


class _Stepper:
    """RK4 stages on raw arrays, warm-starting each solve from the last one."""

    def __init__(self, state: State, opts: SolveOptions):
        self.bathy = state.bathy
        self.params = state.params
        self.grid = state.grid
        self.opts = opts
        self.guess = None
        self.info = SolveInfo()

    def evaluate(self, eta: np.ndarray, phi: np.ndarray, t: float):
        H = 1.0 + eta - self.bathy.b.values
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(phi))):
            raise GuardTrip(f"non-finite values at t={t:.6g}", t)
        k = int(np.argmin(H))
        if H[k] <= 0:
            raise GuardTrip(f"depth {H[k]:.3e} at x={self.grid.points[k]:.6g}, t={t:.6g}",
                            t, float(self.grid.points[k]))
        ctx = OperatorContext(H, self.bathy, self.params)
        deta, dphi, u, w = time_derivative_array(ctx, eta, phi, self.opts, self.guess, self.info)
        if dphi.shape[0] > 1:
            self.guess = dphi[1:]
        return ctx, deta, dphi, u, w

    def step(self, eta, phi, t, dt, first=None):
        k1 = first if first is not None else self.evaluate(eta, phi, t)[1:3]
        e1, p1 = k1
        e2, p2 = self.evaluate(eta + 0.5 * dt * e1, phi + 0.5 * dt * p1, t + 0.5 * dt)[1:3]
        e3, p3 = self.evaluate(eta + 0.5 * dt * e2, phi + 0.5 * dt * p2, t + 0.5 * dt)[1:3]
        e4, p4 = self.evaluate(eta + dt * e3, phi + dt * p3, t + dt)[1:3]
        eta_new = eta + dt / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
        phi_new = phi + dt / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        return eta_new, phi_new


def _make_state(template: State, eta: np.ndarray, phi: np.ndarray, t: float) -> State:
    grid = template.grid
    try:
        return template.replace(eta=ScalarField(grid, eta), phi=PotentialVec.from_array(grid, phi), time=t)
    except (ValueError, FloatingPointError) as exc:
        k = int(np.argmin(1.0 + eta - template.bathy.b.values))
        raise GuardTrip(str(exc), t, float(grid.points[k])) from exc


def _project(state: State, opts: SolveOptions) -> State:
    return build_initial_data(state.eta, state.trace(), state.bathy, state.params, opts,
                              h_min=state.h_min, time=state.time)


def rk4_step(state: State, cfg: StepperConfig, dt: float | None = None) -> State:
    """One classical RK4 step (``dt`` overrides ``cfg.dt``, e.g. for a backward step)."""
    dt = cfg.dt if dt is None else dt
    st = _Stepper(state, cfg.solve)
    eta, phi = st.step(state.eta.values, state.phi.array, state.time, dt)
    new = _make_state(state, eta, phi, state.time + dt)
    return _project(new, cfg.solve) if cfg.projection else new


def diagnostics(ctx: OperatorContext, eta, phi, dphi, u, w) -> Diagnostics:
    grid = ctx.grid
    a = ctx.rayleigh_taylor(phi, dphi, u, w)
    compat = 0.0
    if ctx.n > 1:
        compat = float(np.sqrt(grid.spacing * np.sum(ctx.apply_scrL(phi)[1:] ** 2)))
    energy = 0.5 * grid.inner(eta, eta) + 0.5 * ctx.kinetic(phi)
    return Diagnostics(float(grid.integrate(eta)), energy, compat, float(np.min(ctx.H)),
                       float(np.min(a)))


def simulate(initial: State, cfg: StepperConfig) -> Trajectory:
    """Integrate to ``cfg.t_end``, recording diagnostics every ``diag_stride`` steps.

    The step count is ceil(t_end/dt) and the step is shrunk so the run ends at t_end.
    """
    if cfg.check_cfl:
        check_cfl(initial, cfg.dt)
    steps = cfg.steps
    dt = cfg.t_end / steps
    traj = Trajectory()
    st = _Stepper(initial, cfg.solve)
    state = initial
    eta, phi = initial.eta.values, initial.phi.array
    t = initial.time

    def record(ctx, deta, dphi, u, w):
        d = diagnostics(ctx, eta, phi, dphi, u, w)
        traj.times.append(t)
        traj.diagnostics.append(d)
        traj.eta.append(eta.copy())
        traj.trace.append(ctx.surface_sum(phi))
        if cfg.store_phi:
            traj.phi.append(phi.copy())
        if d.min_a < 0:
            k = int(np.argmin(ctx.rayleigh_taylor(phi, dphi, u, w)))
            raise GuardTrip(f"Rayleigh-Taylor sign condition violated: min a = {d.min_a:.3e} "
                            f"at x={ctx.grid.points[k]:.6g}, t={t:.6g}",
                            t, float(ctx.grid.points[k]), traj)
        if d.min_H < initial.h_min:
            raise GuardTrip(f"depth {d.min_H:.3e} below h_min at t={t:.6g}", t, None, traj)

    try:
        for n in range(steps + 1):
            ctx, deta, dphi, u, w = st.evaluate(eta, phi, t)
            if n % cfg.diag_stride == 0 or n == steps:
                record(ctx, deta, dphi, u, w)
            if n == steps:
                break
            eta, phi = st.step(eta, phi, t, dt, first=(deta, dphi))
            t = initial.time + (n + 1) * dt
            if cfg.projection:
                state = _project(_make_state(initial, eta, phi, t), cfg.solve)
                eta, phi = state.eta.values, state.phi.array
            elif np.min(1.0 + eta - initial.bathy.b.values) < initial.h_min \
                    or not np.all(np.isfinite(phi)):
                _make_state(initial, eta, phi, t)
    except GuardTrip as trip:
        trip.trajectory = trip.trajectory or traj
        raise
    traj.final = _make_state(initial, eta, phi, t)
    traj.cg_iterations = st.info.iterations
    return traj
