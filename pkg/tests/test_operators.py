from fractions import Fraction

import numpy as np
import pytest

from ikwave.core import Bathymetry, ModelParams, PeriodicGrid, PotentialVec, ScalarField
from ikwave.operators import (OperatorContext, apply_Lij, apply_P, apply_Q, apply_scrL,
                              coefficient_table, ratio)

from conftest import make_case, smooth_field

CASES = [("h1", 1), ("h1", 2), ("h2", 1), ("h2", 3)]


def dense(op, n, M):
    """Dense matrix of a linear map on (n, M) arrays."""
    cols = []
    for k in range(n * M):
        e = np.zeros(n * M)
        e[k] = 1.0
        cols.append(op(e.reshape(n, M)).ravel())
    return np.array(cols).T


def test_zero_over_zero_convention():
    assert ratio(0, 0) == 0
    assert ratio(0, 3) == 0
    t = coefficient_table((0, 1, 2))
    # s = 0 entries of left/right, s - 1 = 0 with p_i p_j = 0 in zero
    assert t.exact["left"][0][0] == 0 and t.exact["right"][0][0] == 0
    assert t.exact["zero"][0][1] == 0 and t.exact["zero"][1][0] == 0
    assert t.left[0, 0] == 0.0 and t.zero[0, 1] == 0.0
    # div_ex uses p_j/p_j = 0 for p_j = 0
    assert t.exact["div_ex"][0][0] == 0


def test_coefficient_values_h1():
    t = coefficient_table((0, 2))
    assert t.exact["grad"][1][1] == Fraction(1, 5)
    assert t.exact["zero"][1][1] == Fraction(4, 3)
    assert t.exact["lap_ex"][1][0] == Fraction(1, 3) - 1
    assert t.exact["left"][0][1] == 1


@pytest.mark.parametrize("family,N", CASES)
def test_constant_depth_symbol(family, N):
    # with eta = b = 0, L_ij cos(kx) = (k^2/(s+1) + p_i p_j/(s-1) delta^-2) cos(kx)
    grid = PeriodicGrid(2 * np.pi, 16)
    params = ModelParams(family, N, 0.3)
    ctx = OperatorContext(np.ones(16), Bathymetry.flat(grid), params)
    x = grid.points
    k = 3
    p = params.p
    for i in range(N + 1):
        for j in range(N + 1):
            s = p[i] + p[j]
            zero = 0.0 if p[i] * p[j] == 0 else p[i] * p[j] / (s - 1)
            expect = (k ** 2 / (s + 1) + zero / 0.09) * np.cos(k * x)
            got = apply_Lij(ctx, i, j, ScalarField(grid, np.cos(k * x))).values
            np.testing.assert_allclose(got, expect, atol=1e-11)


def _weak_form(ctx, phi, psi):
    """Depth integral of grad Phi . grad Psi + delta^-2 Phi_z Psi_z by Gauss-Legendre."""
    grid = ctx.grid
    p = ctx.p
    t, wq = np.polynomial.legendre.leggauss(2 * int(p[-1]) + 4)
    z = 0.5 * (t[:, None] + 1.0) * ctx.H[None, :]  # height above the bottom
    w = 0.5 * wq[:, None] * ctx.H[None, :]
    db = ctx.db

    def grads(f):
        df = grid.d1(f)
        Fx = sum(z ** pj * df[j] - pj * z ** max(pj - 1, 0) * db * f[j] for j, pj in enumerate(p))
        Fz = sum(pj * z ** max(pj - 1, 0) * f[j] for j, pj in enumerate(p))
        return Fx, Fz

    ax, az = grads(phi)
    bx, bz = grads(psi)
    return grid.integrate(np.sum(w * (ax * bx + ctx.inv_delta2 * az * bz), axis=0))


@pytest.mark.parametrize("family,N", CASES)
def test_L_matches_weak_form(family, N, rng):
    grid = PeriodicGrid(2 * np.pi, 32)
    params, eta, bathy = make_case(grid, family, N, 0.4, rng)
    ctx = OperatorContext(1 + eta.values - bathy.b.values, bathy, params)
    phi = np.array([smooth_field(grid, rng, 1.0) for _ in range(N + 1)])
    psi = np.array([smooth_field(grid, rng, 1.0) for _ in range(N + 1)])
    lhs = grid.inner(ctx.apply_L(phi), psi)
    assert lhs == pytest.approx(_weak_form(ctx, phi, psi), rel=1e-11)
    assert grid.inner(ctx.apply_L(phi), phi) == pytest.approx(ctx.kinetic(phi), rel=1e-11)


@pytest.mark.parametrize("family,N", CASES)
def test_L_symmetric_and_P_positive(family, N, rng):
    grid = PeriodicGrid(2 * np.pi, 16)
    params, eta, bathy = make_case(grid, family, N, 0.3, rng)
    ctx = OperatorContext(1 + eta.values - bathy.b.values, bathy, params)
    L = dense(ctx.apply_L, N + 1, 16)
    assert np.max(np.abs(L - L.T)) <= 1e-10 * np.max(np.abs(L))
    P = dense(ctx.apply_P, N, 16)
    np.testing.assert_allclose(P, P.T, atol=1e-10 * np.max(np.abs(P)))
    assert np.min(np.linalg.eigvalsh(0.5 * (P + P.T))) > 0


@pytest.mark.parametrize("family,N", CASES)
def test_explicit_compatibility_matches_assembled(family, N, rng):
    grid = PeriodicGrid(2 * np.pi, 64)
    params, eta, bathy = make_case(grid, family, N, 0.3, rng)
    ctx = OperatorContext(1 + eta.values - bathy.b.values, bathy, params)
    phi = np.array([smooth_field(grid, rng, 1.0) for _ in range(N + 1)])
    a = ctx.apply_scrL(phi)
    b = ctx.apply_scrL_assembled(phi)
    np.testing.assert_allclose(a, b, atol=1e-11 * np.max(np.abs(b)))
    vec = apply_scrL(ctx, N, PotentialVec.from_array(grid, phi))
    np.testing.assert_allclose(vec.array, a)


@pytest.mark.parametrize("family,N", CASES)
def test_dH_compatibility_by_finite_difference(family, N, rng):
    grid = PeriodicGrid(2 * np.pi, 32)
    params, eta, bathy = make_case(grid, family, N, 0.3, rng)
    H = 1 + eta.values - bathy.b.values
    phi = np.array([smooth_field(grid, rng, 1.0) for _ in range(N + 1)])
    h = 1e-6
    up = OperatorContext(H + h, bathy, params)._apply_explicit(phi, False)
    dn = OperatorContext(H - h, bathy, params)._apply_explicit(phi, False)
    fd = (up - dn) / (2 * h)
    exact = OperatorContext(H, bathy, params).apply_dH_scrL(phi)
    np.testing.assert_allclose(exact, fd, atol=1e-6 * np.max(np.abs(exact)))


def test_lift_restrict_adjoint(rng):
    grid = PeriodicGrid(2 * np.pi, 16)
    params, eta, bathy = make_case(grid, "h2", 2, 0.5, rng)
    ctx = OperatorContext(1 + eta.values - bathy.b.values, bathy, params)
    x = rng.normal(size=(2, 16))
    g = rng.normal(size=(3, 16))
    assert np.sum(ctx.lift(x) * g) == pytest.approx(np.sum(x * ctx.restrict(g)), rel=1e-12)
    assert np.allclose(ctx.surface_sum(ctx.lift(x)), 0.0, atol=1e-14)


def test_surface_velocities_flat(grid64):
    x = grid64.points
    H = np.full(64, 1.2)
    params = ModelParams("h1", 1, 0.5)
    ctx = OperatorContext(H, Bathymetry.flat(grid64), params)
    phi = np.vstack([np.sin(x), np.cos(x)])
    u, w = ctx.uw(phi)
    np.testing.assert_allclose(u, np.cos(x) - 1.44 * np.sin(x), atol=1e-12)
    np.testing.assert_allclose(w, 4.0 * 2 * 1.2 * np.cos(x), atol=1e-12)


def test_rayleigh_taylor_at_rest(grid64):
    params = ModelParams("h2", 2, 0.3)
    ctx = OperatorContext(np.ones(64), Bathymetry.flat(grid64), params)
    z = np.zeros((3, 64))
    np.testing.assert_array_equal(ctx.rayleigh_taylor(z, z, z[0], z[0]), 1.0)


def test_Q_operator(grid64):
    x = grid64.points
    bathy = Bathymetry.cosine(grid64, 0.1, 1, "h2")
    psi = ScalarField(grid64, np.sin(x))
    # b' = -0.1 sin x: (-0.1 sin^2 x)' - 0.1 sin x cos x = -0.3 sin x cos x
    expect = -0.3 * np.sin(x) * np.cos(x)
    np.testing.assert_allclose(apply_Q(bathy, psi).values, expect, atol=1e-12)


def test_index_errors(grid64):
    ctx = OperatorContext(np.ones(64), Bathymetry.flat(grid64), ModelParams("h1", 1, 0.5))
    with pytest.raises(IndexError):
        apply_Lij(ctx, 2, 0, ScalarField.zeros(grid64))
    with pytest.raises(ValueError):
        apply_P(ctx, [ScalarField.zeros(grid64)] * 2)
