"""Periodic grids, spectral fields, model parameters, bathymetry and state."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

H_MIN_DEFAULT = 1e-6


class Family(enum.Enum):
    """Index family of the vertical expansion.

    ``H1`` uses even powers ``p_i = 2i`` and requires a flat bottom,
    ``H2`` uses ``p_i = i`` and allows any bathymetry.
    """

    H1 = "h1"
    H2 = "h2"

    @classmethod
    def parse(cls, value: "Family | str") -> "Family":
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown family {value!r}; expected 'h1' or 'h2'") from None

    def powers(self, order: int) -> tuple[int, ...]:
        step = 2 if self is Family.H1 else 1
        return tuple(step * i for i in range(order + 1))


@dataclass(frozen=True)
class ModelParams:
    family: Family
    N: int
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a nonnegative integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta!r}")

    @property
    def p(self) -> tuple[int, ...]:
        return self.family.powers(self.N)

    def with_order(self, order: int) -> "ModelParams":
        """Same family and delta, expansion order ``order``."""
        return ModelParams(self.family, order, self.delta)

    def with_delta(self, delta: float) -> "ModelParams":
        return ModelParams(self.family, self.N, delta)


@dataclass(frozen=True)
class PeriodicGrid:
    length: float
    modes: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"grid length must be positive, got {self.length!r}")
        if int(self.modes) != self.modes or self.modes % 2:
            raise ValueError(f"mode count must be an even integer, got {self.modes!r}")
        if self.modes < 8:
            raise ValueError(f"mode count must be at least 8, got {self.modes!r}")
        object.__setattr__(self, "modes", int(self.modes))
        object.__setattr__(self, "length", float(self.length))
        k = 2.0 * np.pi / self.length * np.arange(self.modes // 2 + 1)
        dk = 1j * k
        dk[-1] = 0.0  # odd derivatives drop the Nyquist mode
        k.setflags(write=False)
        dk.setflags(write=False)
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_dk", dk)

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.modes) * (self.length / self.modes)

    @property
    def spacing(self) -> float:
        return self.length / self.modes

    @property
    def wavenumbers(self) -> np.ndarray:
        """Wavenumbers 2πm/L for m = -M/2 .. M/2-1."""
        m = np.arange(-self.modes // 2, self.modes // 2)
        return 2.0 * np.pi * m / self.length

    @property
    def rfft_wavenumbers(self) -> np.ndarray:
        return self._k

    def diff(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Spectral derivative along the last axis of a real array."""
        if order < 1:
            raise ValueError("derivative order must be positive")
        symbol = (1j * self._k) ** order
        if order % 2:
            symbol[-1] = 0.0
        return np.fft.irfft(np.fft.rfft(values, axis=-1) * symbol, n=self.modes, axis=-1)

    def d1(self, values: np.ndarray) -> np.ndarray:
        """First derivative with the Nyquist mode removed (antisymmetric matrix)."""
        return np.fft.irfft(np.fft.rfft(values, axis=-1) * self._dk, n=self.modes, axis=-1)

    def d1d2(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First derivative and its square D(D f), from one transform pair."""
        spec = np.fft.rfft(values, axis=-1)
        both = np.stack([spec * self._dk, spec * (self._dk * self._dk)])
        out = np.fft.irfft(both, n=self.modes, axis=-1)
        return out[0], out[1]

    def dealias(self, values: np.ndarray) -> np.ndarray:
        """Zero the top third of the spectrum (2/3 rule)."""
        spec = np.fft.rfft(values, axis=-1)
        cut = self.modes // 3
        spec[..., cut + 1:] = 0.0
        return np.fft.irfft(spec, n=self.modes, axis=-1)

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        return self.spacing * np.sum(values, axis=-1)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.spacing * np.sum(f * g))

    def norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm (trapezoid rule)."""
        return float(np.sqrt(self.spacing * np.sum(np.asarray(values) ** 2)))

    def fourier_series(self, coefficients: Iterable[Sequence[float]]) -> np.ndarray:
        """Evaluate sum of a_m cos(k_m x) + b_m sin(k_m x) with k_m = 2πm/L."""
        x = self.points
        out = np.zeros(self.modes)
        for mode, ca, sa in coefficients:
            kx = 2.0 * np.pi * mode / self.length * x
            out += ca * np.cos(kx) + sa * np.sin(kx)
        return out


def make_grid(length: float, modes: int) -> PeriodicGrid:
    return PeriodicGrid(length, modes)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.modes,):
            raise ValueError(f"expected {self.grid.modes} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.modes))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> "ScalarField":
        return cls(grid, func(grid.points))

    def spectrum(self) -> np.ndarray:
        return np.fft.rfft(self.values)

    @classmethod
    def from_spectrum(cls, grid: PeriodicGrid, spec: np.ndarray) -> "ScalarField":
        return cls(grid, np.fft.irfft(spec, n=grid.modes))

    def norm(self) -> float:
        return self.grid.norm(self.values)

    def integral(self) -> float:
        return float(self.grid.integrate(self.values))

    def _wrap(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._wrap(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._wrap(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def spectral_derivative(f: ScalarField, order: int = 1) -> ScalarField:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("cannot differentiate a non-finite field")
    return ScalarField(f.grid, f.grid.diff(f.values, order))


@dataclass(frozen=True, eq=False)
class Bathymetry:
    b: ScalarField
    grad_b: ScalarField

    def __post_init__(self):
        if self.b.grid != self.grad_b.grid:
            raise ValueError("b and grad_b must share a grid")
        if np.max(np.abs(self.b.values)) >= 1.0:
            raise ValueError("bathymetry must satisfy sup|b| < 1")

    @property
    def grid(self) -> PeriodicGrid:
        return self.b.grid

    @property
    def is_flat(self) -> bool:
        return not np.any(self.b.values) and not np.any(self.grad_b.values)

    @classmethod
    def flat(cls, grid: PeriodicGrid) -> "Bathymetry":
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_values(cls, grid: PeriodicGrid, values, family: Family | str | None = None) -> "Bathymetry":
        values = np.asarray(values, dtype=float)
        if family is not None and Family.parse(family) is Family.H1 and np.any(values):
            raise ValueError("family H1 requires a flat bottom (b = 0)")
        return cls(ScalarField(grid, values), ScalarField(grid, grid.diff(values, 1)))

    @classmethod
    def cosine(cls, grid: PeriodicGrid, amplitude: float, wavenumber: float,
               family: Family | str | None = None) -> "Bathymetry":
        k = 2.0 * np.pi * wavenumber / grid.length
        return cls.from_values(grid, amplitude * np.cos(k * grid.points), family)


@dataclass(frozen=True, eq=False)
class PotentialVec:
    comps: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.comps)
        if not comps:
            raise ValueError("a potential vector needs at least one component")
        grid = comps[0].grid
        if any(c.grid != grid for c in comps):
            raise ValueError("all components must share one grid")
        object.__setattr__(self, "comps", comps)

    @classmethod
    def from_array(cls, grid: PeriodicGrid, array) -> "PotentialVec":
        array = np.atleast_2d(np.asarray(array, dtype=float))
        return cls(tuple(ScalarField(grid, row) for row in array))

    @classmethod
    def zeros(cls, grid: PeriodicGrid, length: int) -> "PotentialVec":
        return cls.from_array(grid, np.zeros((length, grid.modes)))

    @property
    def grid(self) -> PeriodicGrid:
        return self.comps[0].grid

    @property
    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.comps])

    def __len__(self) -> int:
        return len(self.comps)

    def __getitem__(self, i) -> ScalarField:
        return self.comps[i]

    def __iter__(self):
        return iter(self.comps)


@dataclass(frozen=True, eq=False)
class State:
    eta: ScalarField
    phi: PotentialVec
    params: ModelParams
    bathy: Bathymetry
    time: float = 0.0
    h_min: float = field(default=H_MIN_DEFAULT)

    def __post_init__(self):
        grid = self.eta.grid
        if self.phi.grid != grid or self.bathy.grid != grid:
            raise ValueError("state components live on different grids")
        if len(self.phi) != self.params.N + 1:
            raise ValueError(f"expected {self.params.N + 1} potential components, got {len(self.phi)}")
        if self.params.family is Family.H1 and not self.bathy.is_flat:
            raise ValueError("family H1 requires a flat bottom")
        if not np.all(np.isfinite(self.eta.values)) or not np.all(np.isfinite(self.phi.array)):
            raise FloatingPointError(f"non-finite state at t={self.time}")
        depth = self.depth_values
        k = int(np.argmin(depth))
        if depth[k] < self.h_min or depth[k] <= 0.0:
            raise ValueError(
                f"depth 1 + eta - b = {depth[k]:.3e} below h_min={self.h_min:g} "
                f"at x={grid.points[k]:.6g}, t={self.time}")

    @property
    def grid(self) -> PeriodicGrid:
        return self.eta.grid

    @property
    def depth_values(self) -> np.ndarray:
        return 1.0 + self.eta.values - self.bathy.b.values

    @property
    def depth(self) -> ScalarField:
        return ScalarField(self.grid, self.depth_values)

    def trace(self) -> ScalarField:
        """Surface value of the approximate potential, sum of H^{p_j} phi_j."""
        H = self.depth_values
        vals = sum(H ** p * c.values for p, c in zip(self.params.p, self.phi))
        return ScalarField(self.grid, vals)

    def replace(self, **changes) -> "State":
        kw = dict(eta=self.eta, phi=self.phi, params=self.params, bathy=self.bathy,
                  time=self.time, h_min=self.h_min)
        kw.update(changes)
        return State(**kw)


def _rescale_exponents(params: ModelParams, length: int) -> np.ndarray:
    p = np.array(params.family.powers(length - 1))
    return 2 * (p - p // 2)


def rescale_to_original(phi: PotentialVec, params: ModelParams) -> PotentialVec:
    """Undo the delta scaling: phi_i = delta^{-2(p_i - [p_i/2])} phi_i^delta."""
    e = _rescale_exponents(params, len(phi))
    factors = params.delta ** (-e.astype(float))
    return PotentialVec.from_array(phi.grid, phi.array * factors[:, None])


def rescale_from_original(phi: PotentialVec, params: ModelParams) -> PotentialVec:
    e = _rescale_exponents(params, len(phi))
    factors = params.delta ** e.astype(float)
    return PotentialVec.from_array(phi.grid, phi.array * factors[:, None])
