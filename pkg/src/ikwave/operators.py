"""Differential operators of the Isobe-Kakinuma model on a periodic grid.

All operators act on stacked arrays of shape ``(n, M)`` internally; the
public functions accept and return :class:`ScalarField` /
:class:`PotentialVec` objects.  Products are collocated pointwise and the
first derivative drops the Nyquist mode, so the discrete ``L`` is exactly
symmetric in the trapezoid inner product.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import Bathymetry, ModelParams, PeriodicGrid, PotentialVec, ScalarField, State


def ratio(num: int, den: int) -> Fraction:
    """num/den with the convention 0/0 = 0."""
    if num == 0 and den == 0:
        return Fraction(0)
    return Fraction(num, den)


@dataclass(frozen=True)
class CoefficientTable:
    """Rational coefficients of L_ij and of the explicit compatibility form.

    Every array is ``(n, n)`` with ``s = p_i + p_j``:

    * ``grad``  : 1/(s+1)            (multiplies H^{s+1})
    * ``left``  : p_j/s              (multiplies H^s, inside the divergence)
    * ``right`` : p_i/s              (multiplies H^s, outside)
    * ``zero``  : p_i p_j/(s-1)      (multiplies H^{s-1})
    * ``lap_ex``: 1/(s+1) - 1/(p_j+1)
    * ``div_ex``: p_j/s - p_j/p_j
    """

    p: tuple[int, ...]
    grad: np.ndarray
    left: np.ndarray
    right: np.ndarray
    zero: np.ndarray
    lap_ex: np.ndarray
    div_ex: np.ndarray
    exact: dict

    @property
    def s(self) -> np.ndarray:
        p = np.array(self.p)
        return p[:, None] + p[None, :]


@lru_cache(maxsize=None)
def coefficient_table(p: tuple[int, ...]) -> CoefficientTable:
    n = len(p)
    exact = {name: [[Fraction(0)] * n for _ in range(n)]
             for name in ("grad", "left", "right", "zero", "lap_ex", "div_ex")}
    for i, pi in enumerate(p):
        for j, pj in enumerate(p):
            s = pi + pj
            exact["grad"][i][j] = Fraction(1, s + 1)
            exact["left"][i][j] = ratio(pj, s)
            exact["right"][i][j] = ratio(pi, s)
            exact["zero"][i][j] = ratio(pi * pj, s - 1)
            exact["lap_ex"][i][j] = Fraction(1, s + 1) - Fraction(1, pj + 1)
            exact["div_ex"][i][j] = ratio(pj, s) - ratio(pj, pj)
    arrays = {}
    for name, rows in exact.items():
        arr = np.array([[float(v) for v in row] for row in rows])
        arr.setflags(write=False)
        arrays[name] = arr
    return CoefficientTable(p=p, exact=exact, **arrays)


class OperatorContext:
    """Depth-dependent coefficient arrays for one (H, b, params) triple."""

    def __init__(self, H, bathy: Bathymetry, params: ModelParams):
        H = H.values if isinstance(H, ScalarField) else np.asarray(H, dtype=float)
        if np.min(H) <= 0.0:
            raise ValueError(f"total depth must be positive, min H = {np.min(H):.3e}")
        self.grid: PeriodicGrid = bathy.grid
        self.bathy = bathy
        self.params = params
        self.H = H
        self.p = np.array(params.p)
        self.table = coefficient_table(params.p)
        self.n = len(self.p)
        db = bathy.grad_b.values
        self.db = db
        self.flat = bathy.is_flat
        self.inv_delta2 = params.delta ** -2

        qmax = 2 * int(self.p[-1]) + 1
        # Hpow[q + 1] = H^q for q = -1 .. qmax
        hp = np.empty((qmax + 2, H.size))
        hp[0] = 1.0 / H
        hp[1] = 1.0
        for q in range(1, qmax + 1):
            hp[q + 1] = hp[q] * H
        self.Hpow = hp
        s = self.table.s
        t = self.table
        h_s1 = hp[s + 2]
        h_s = hp[s + 1]
        h_sm1 = hp[s]
        self.c_grad = t.grad[:, :, None] * h_s1
        self.c_zero = t.zero[:, :, None] * h_sm1 * (self.inv_delta2 + db * db)
        if self.flat:
            self.c_left = self.c_right = None
        else:
            self.c_left = t.left[:, :, None] * h_s * db
            self.c_right = t.right[:, :, None] * h_s * db

    @classmethod
    def from_state(cls, state: State) -> "OperatorContext":
        return cls(state.depth_values, state.bathy, state.params)

    def power(self, q) -> np.ndarray:
        return self.Hpow[np.asarray(q) + 1]

    # -- L -----------------------------------------------------------------
    def apply_L(self, phi: np.ndarray) -> np.ndarray:
        """Full block operator (L phi)_i = sum_j L_ij phi_j for phi of shape (n, M)."""
        d1 = self.grid.d1
        dphi = d1(phi)
        flux = np.einsum("ijm,jm->im", self.c_grad, dphi)
        out = np.einsum("ijm,jm->im", self.c_zero, phi)
        if not self.flat:
            flux -= np.einsum("ijm,jm->im", self.c_left, phi)
            out -= np.einsum("ijm,jm->im", self.c_right, dphi)
        return out - d1(flux)

    def apply_L0(self, phi: np.ndarray, dphi: np.ndarray | None = None) -> np.ndarray:
        """Row zero, sum_j L_0j phi_j; a pure divergence."""
        dphi = self.grid.d1(phi) if dphi is None else dphi
        flux = np.einsum("jm,jm->m", self.c_grad[0], dphi)
        if not self.flat:
            flux -= np.einsum("jm,jm->m", self.c_left[0], phi)
        return -self.grid.d1(flux)

    def apply_Lij(self, i: int, j: int, psi: np.ndarray) -> np.ndarray:
        d1 = self.grid.d1
        dpsi = d1(psi)
        flux = self.c_grad[i, j] * dpsi
        out = self.c_zero[i, j] * psi
        if not self.flat:
            flux = flux - self.c_left[i, j] * psi
            out = out - self.c_right[i, j] * dpsi
        return out - d1(flux)

    # -- compatibility operator -----------------------------------------------
    def surface_sum(self, phi: np.ndarray) -> np.ndarray:
        """sum_j H^{p_j} phi_j."""
        return np.einsum("jm,jm->m", self.Hpow[self.p + 1], phi)

    def apply_scrL_assembled(self, phi: np.ndarray) -> np.ndarray:
        g = self.apply_L(phi)
        out = np.empty_like(g)
        out[0] = self.surface_sum(phi)
        out[1:] = g[1:] - self.Hpow[self.p[1:] + 1] * g[0]
        return out

    def _explicit_terms(self, derivative: bool):
        """Rows i >= 1 of the coefficient arrays of the explicit (grad H free) form.

        With ``derivative`` each power H^q is replaced by q H^{q-1}.
        """
        t = self.table
        s = t.s[1:]
        hp = self.Hpow

        def pw(q, c):
            c = c[1:, :, None]
            if derivative:
                return c * q[:, :, None] * hp[q]
            return c * hp[q + 1]

        lap = -pw(s + 1, t.lap_ex)
        zero = pw(s - 1, t.zero) * (self.inv_delta2 + self.db * self.db)
        if self.flat:
            return lap, None, None, zero
        div = pw(s, t.div_ex)
        adv = -pw(s, t.right) * self.db
        return lap, div, adv, zero

    def _apply_explicit(self, phi: np.ndarray, derivative: bool, derivs=None) -> np.ndarray:
        lap, div, adv, zero = self._explicit_terms(derivative)
        dphi, lphi = self.grid.d1d2(phi) if derivs is None else derivs
        out = np.einsum("ijm,jm->im", lap, lphi) + np.einsum("ijm,jm->im", zero, phi)
        if not self.flat:
            out += np.einsum("ijm,jm->im", div, self.grid.d1(phi * self.db))
            out += np.einsum("ijm,jm->im", adv, dphi)
        return out

    def apply_scrL(self, phi: np.ndarray) -> np.ndarray:
        """Compatibility operator; rows i >= 1 through the explicit form."""
        out = np.empty_like(phi)
        out[0] = self.surface_sum(phi)
        out[1:] = self._apply_explicit(phi, derivative=False)
        return out

    def apply_dH_scrL(self, phi: np.ndarray, derivs=None) -> np.ndarray:
        """H-derivative of rows i >= 1 of the explicit compatibility form, shape (n-1, M).

        ``derivs`` optionally supplies precomputed (D phi, D D phi).
        """
        return self._apply_explicit(phi, derivative=True, derivs=derivs)

    # -- reduced operator P ---------------------------------------------------
    def lift(self, phi_prime: np.ndarray) -> np.ndarray:
        """phi' -> (-sum_{j>=1} H^{p_j} phi_j, phi')."""
        full = np.empty((self.n, phi_prime.shape[-1]))
        full[1:] = phi_prime
        full[0] = -np.einsum("jm,jm->m", self.Hpow[self.p[1:] + 1], phi_prime)
        return full

    def restrict(self, g: np.ndarray) -> np.ndarray:
        """Adjoint of lift: g -> g_i - H^{p_i} g_0, i >= 1."""
        return g[1:] - self.Hpow[self.p[1:] + 1] * g[0]

    def apply_P(self, phi_prime: np.ndarray) -> np.ndarray:
        return self.restrict(self.apply_L(self.lift(phi_prime)))

    # -- surface velocities --------------------------------------------------
    def uw(self, phi: np.ndarray, dphi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        hp = self.Hpow
        dphi = self.grid.d1(phi) if dphi is None else dphi
        u = np.einsum("jm,jm->m", hp[p + 1], dphi)
        if not self.flat:
            u -= self.db * np.einsum("j,jm,jm->m", p, hp[p], phi)
        w = self.inv_delta2 * np.einsum("j,jm,jm->m", p[1:], hp[p[1:]], phi[1:])
        return u, w

    def rayleigh_taylor(self, phi: np.ndarray, dtphi: np.ndarray,
                        u: np.ndarray, w: np.ndarray) -> np.ndarray:
        p = self.p[1:]
        hp = self.Hpow
        a = 1.0 + np.einsum("j,jm,jm->m", p, hp[p], dtphi[1:])
        if p.size == 0:
            return a
        ph = phi[1:]
        dph = self.grid.d1(ph)
        c2 = p * (p - 1)
        hor = np.einsum("j,jm,jm->m", p, hp[p], dph)
        vert = np.einsum("j,jm,jm->m", c2, hp[p - 1], ph)
        if not self.flat:
            hor -= self.db * vert
        return a + u * hor + w * vert

    # -- diagnostics ---------------------------------------------------------
    def kinetic(self, phi: np.ndarray) -> float:
        """(L phi, phi) evaluated as a depth integral by Gauss-Legendre quadrature."""
        p = self.p
        nodes = -(-(2 * int(p[-1]) + 3) // 2)
        t, wq = np.polynomial.legendre.leggauss(nodes)
        zeta = 0.5 * (t[:, None] + 1.0) * self.H[None, :]
        weights = 0.5 * wq[:, None] * self.H[None, :]
        dphi = self.grid.d1(phi)
        zp = zeta[None] ** p[:, None, None]
        pm1 = np.maximum(p - 1, 0)
        zpm1 = p[:, None, None] * zeta[None] ** pm1[:, None, None]
        horiz = np.einsum("jqm,jm->qm", zp, dphi)
        vert = np.einsum("jqm,jm->qm", zpm1, phi)
        if not self.flat:
            horiz -= vert * self.db
        dens = horiz ** 2 + self.inv_delta2 * vert ** 2
        return float(self.grid.integrate(np.sum(weights * dens, axis=0)))


def _ctx(ctx: OperatorContext, phi) -> np.ndarray:
    arr = phi.array if isinstance(phi, PotentialVec) else np.asarray(phi, dtype=float)
    if arr.shape[0] != ctx.n:
        raise ValueError(f"expected {ctx.n} components, got {arr.shape[0]}")
    return arr


def apply_Lij(ctx: OperatorContext, i: int, j: int, psi: ScalarField) -> ScalarField:
    if not (0 <= i < ctx.n and 0 <= j < ctx.n):
        raise IndexError(f"operator index ({i}, {j}) outside 0..{ctx.n - 1}")
    return ScalarField(ctx.grid, ctx.apply_Lij(i, j, psi.values))


def apply_scrL(ctx: OperatorContext, order: int, phi: PotentialVec) -> PotentialVec:
    if len(phi) != order + 1 or ctx.n != order + 1:
        raise ValueError(f"expected {order + 1} components and a matching context")
    return PotentialVec.from_array(ctx.grid, ctx.apply_scrL(_ctx(ctx, phi)))


def apply_P(ctx: OperatorContext, phi_prime) -> list[ScalarField]:
    if ctx.n < 2:
        raise ValueError("P is empty for N = 0")
    arr = np.stack([f.values for f in phi_prime])
    if arr.shape[0] != ctx.n - 1:
        raise ValueError(f"expected {ctx.n - 1} components, got {arr.shape[0]}")
    return [ScalarField(ctx.grid, row) for row in ctx.apply_P(arr)]


def compute_uw(ctx: OperatorContext, phi: PotentialVec) -> tuple[ScalarField, ScalarField]:
    u, w = ctx.uw(_ctx(ctx, phi))
    return ScalarField(ctx.grid, u), ScalarField(ctx.grid, w)


def compute_a(ctx: OperatorContext, phi: PotentialVec, dtphi: PotentialVec,
              u: ScalarField, w: ScalarField) -> ScalarField:
    a = ctx.rayleigh_taylor(_ctx(ctx, phi), _ctx(ctx, dtphi), u.values, w.values)
    return ScalarField(ctx.grid, a)


def apply_Q(bathy: Bathymetry, psi: ScalarField) -> ScalarField:
    """Q psi = (psi b')' + b' psi'."""
    grid = bathy.grid
    db = bathy.grad_b.values
    return ScalarField(grid, grid.d1(psi.values * db) + db * grid.d1(psi.values))


def mass(eta: ScalarField) -> float:
    return eta.integral()


def energy(ctx: OperatorContext, eta: ScalarField, phi: PotentialVec) -> float:
    return 0.5 * ctx.grid.inner(eta.values, eta.values) + 0.5 * ctx.kinetic(_ctx(ctx, phi))
