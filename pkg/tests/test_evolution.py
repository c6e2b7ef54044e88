import numpy as np
import pytest

from ikwave.core import Bathymetry, ModelParams, PeriodicGrid, ScalarField
from ikwave.dispersion import cik_squared
from ikwave.elliptic import SolveOptions, build_initial_data
from ikwave.evolution import (GuardTrip, StepperConfig, check_cfl, max_linear_frequency, rk4_step,
                              simulate)

OPTS = SolveOptions(tol=1e-12)


def wave_state(family="h1", N=1, delta=0.3, M=32, eta_amp=0.1, trace_amp=0.1, bottom=0.1, h_min=1e-6):
    grid = PeriodicGrid(2 * np.pi, M)
    x = grid.points
    bathy = Bathymetry.flat(grid) if family == "h1" else Bathymetry.cosine(grid, bottom, 1, family)
    return build_initial_data(ScalarField(grid, eta_amp * np.cos(x)),
                              ScalarField(grid, trace_amp * np.sin(x)), bathy,
                              ModelParams(family, N, delta), OPTS, h_min=h_min)


def test_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        StepperConfig(dt=2.0, t_end=1.0)
    assert StepperConfig(dt=0.3, t_end=1.0).steps == 4


def test_rest_state_stays_at_rest():
    st = wave_state(eta_amp=0.0, trace_amp=0.0)
    traj = simulate(st, StepperConfig(0.05, 0.5, solve=OPTS))
    rows = np.array(traj.rows())
    assert rows.shape == (11, 6)
    np.testing.assert_allclose(rows[:, 0], np.linspace(0, 0.5, 11), atol=1e-15)
    assert np.all(rows[:, 1:] == rows[0, 1:])
    assert not np.any(traj.final.eta.values)


def test_final_time_is_hit_exactly():
    st = wave_state()
    traj = simulate(st, StepperConfig(0.07, 0.5, solve=OPTS, diag_stride=3))
    assert traj.times[-1] == pytest.approx(0.5, abs=1e-14)
    assert traj.final.time == pytest.approx(0.5, abs=1e-14)


def test_linear_standing_wave_frequency():
    delta, eps = 0.5, 1e-4
    grid = PeriodicGrid(2 * np.pi, 16)
    x = grid.points
    params = ModelParams("h1", 1, delta)
    st = build_initial_data(ScalarField(grid, eps * np.cos(x)), ScalarField.zeros(grid),
                            Bathymetry.flat(grid), params, OPTS)
    traj = simulate(st, StepperConfig(0.01, 1.0, solve=OPTS, diag_stride=1000))
    omega = np.sqrt(cik_squared(delta, params))
    exact = eps * np.cos(x) * np.cos(omega)
    # nonlinear effects are O(eps^2)
    assert np.max(np.abs(traj.final.eta.values - exact)) <= 1e-6


@pytest.mark.parametrize("family", ["h1", "h2"])
def test_rk4_dt_refinement_is_fourth_order(family):
    st = wave_state(family)
    finals = []
    for dt in (0.1, 0.05, 0.025):
        traj = simulate(st, StepperConfig(dt, 1.0, solve=OPTS, diag_stride=1000))
        finals.append(traj.final.eta.values)
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert 16 * 0.8 <= e1 / e2 <= 16 * 1.2


@pytest.mark.parametrize("family,N", [("h1", 2), ("h2", 2)])
def test_conservation_short_run(family, N):
    st = wave_state(family, N)
    traj = simulate(st, StepperConfig(0.01, 1.0, solve=OPTS, diag_stride=10))
    mass = traj.column("mass")
    energy = traj.column("energy")
    assert np.max(np.abs(mass - mass[0])) <= 1e-12
    assert np.max(np.abs(energy - energy[0])) <= 1e-7 * energy[0]
    assert np.all(traj.column("compat_resid") < 1e-8)
    assert np.all(traj.column("min_a") > 0)


def test_backward_step_returns():
    st = wave_state("h2", 1)
    cfg = StepperConfig(0.01, 1.0, solve=OPTS)
    back = rk4_step(rk4_step(st, cfg), cfg, dt=-0.01)
    assert back.time == pytest.approx(0.0, abs=1e-15)
    # one forward and one backward step differ at O(dt^5)
    assert np.max(np.abs(back.eta.values - st.eta.values)) < 1e-9


def test_projection_keeps_compatibility():
    st = wave_state("h2", 2)
    traj = simulate(st, StepperConfig(0.05, 0.5, projection=True, solve=OPTS))
    assert np.all(traj.column("compat_resid") < 1e-9)


def test_cfl_violation_is_rejected():
    st = wave_state(M=64, delta=0.05)
    omega = max_linear_frequency(st)
    assert check_cfl(st, 1.0 / omega) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="stability"):
        simulate(st, StepperConfig(3.0 / omega, 1.0, solve=OPTS))


def test_depth_guard_trips_with_trajectory():
    st = wave_state(eta_amp=0.0, trace_amp=0.5, h_min=0.95)
    with pytest.raises(GuardTrip) as exc:
        simulate(st, StepperConfig(0.02, 2.0, solve=OPTS))
    assert exc.value.time > 0
    assert exc.value.trajectory is not None and len(exc.value.trajectory.times) > 0


def test_rhs_linear_mode():
    # eta = 0, trace eps sin x: eta_t = k^2 c_IK^2(delta k) * trace up to O(eps^2)
    from ikwave.evolution import rhs
    eps = 1e-5
    for family in ("h1", "h2"):
        st = wave_state(family, N=2, delta=0.4, eta_amp=0.0, trace_amp=eps, bottom=0.0)
        deta, dphi = rhs(st, OPTS)
        x = st.grid.points
        c2 = cik_squared(0.4, st.params)
        np.testing.assert_allclose(deta.values, c2 * eps * np.sin(x), atol=1e-3 * eps)


def test_rhs_translation_equivariance():
    from ikwave.evolution import rhs
    grid = PeriodicGrid(2 * np.pi, 32)
    x = grid.points
    h = grid.spacing
    params = ModelParams("h2", 2, 0.3)

    def state(shift):
        bathy = Bathymetry.from_values(grid, 0.1 * np.cos(x - shift), "h2")
        return build_initial_data(ScalarField(grid, 0.1 * np.cos(2 * (x - shift))),
                                  ScalarField(grid, 0.1 * np.sin(x - shift)), bathy, params, OPTS)

    d0, p0 = rhs(state(0.0), OPTS)
    d1, p1 = rhs(state(h), OPTS)
    np.testing.assert_allclose(np.roll(d0.values, 1), d1.values, atol=1e-12)
    np.testing.assert_allclose(np.roll(p0.array, 1, axis=1), p1.array, atol=1e-11)
