"""JSON run configuration: parsing, validation, serialization and object builders."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .core import Bathymetry, Family, ModelParams, PeriodicGrid, ScalarField, State
from .dtn import DtNConfig
from .elliptic import SolveOptions, build_initial_data
from .evolution import StepperConfig


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("ikwave").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


Series = tuple[tuple[int, float, float], ...]


def _series(items) -> Series:
    return tuple((int(m), float(c), float(s)) for m, c, s in items)


@dataclass(frozen=True)
class BathymetrySpec:
    type: str = "flat"
    amplitude: float = 0.0
    wavenumber: int = 0

    def to_dict(self) -> dict:
        if self.type == "flat":
            return {"type": "flat"}
        return {"type": self.type, "amplitude": self.amplitude, "wavenumber": self.wavenumber}

    @classmethod
    def from_dict(cls, d: dict) -> "BathymetrySpec":
        if d["type"] == "flat":
            return cls()
        return cls("cosine", float(d["amplitude"]), int(d["wavenumber"]))


@dataclass(frozen=True)
class RunConfig:
    domain_length: float
    modes: int
    family: str
    N: int
    delta: float
    bathymetry: BathymetrySpec
    eta: Series
    phi_trace: Series
    dt: float = 1e-3
    t_end: float = 1.0
    cg_tol: float = 1e-11
    cg_max_iter: int = 500
    projection: bool = False
    diag_stride: int = 1
    h_min: float = 1e-6
    dtn_nz: int = 32
    output: str | None = None

    def __post_init__(self):
        if Family.parse(self.family) is Family.H1 and self.bathymetry.type != "flat":
            raise ConfigError("bathymetry: family 'h1' requires a flat bottom")

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["bathymetry"] = self.bathymetry.to_dict()
        d["initial"] = {"eta": [list(t) for t in d.pop("eta")],
                        "phi_trace": [list(t) for t in d.pop("phi_trace")]}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        validate(data)
        d = dict(data)
        init = d.pop("initial")
        d["bathymetry"] = BathymetrySpec.from_dict(d["bathymetry"])
        return cls(eta=_series(init["eta"]), phi_trace=_series(init["phi_trace"]), **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def with_changes(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    # -- builders -------------------------------------------------------------
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.domain_length, self.modes)

    def params(self, delta: float | None = None, N: int | None = None) -> ModelParams:
        return ModelParams(self.family, self.N if N is None else N,
                           self.delta if delta is None else delta)

    def bathy(self, grid: PeriodicGrid | None = None) -> Bathymetry:
        grid = grid or self.grid()
        spec = self.bathymetry
        if spec.type == "flat":
            return Bathymetry.flat(grid)
        return Bathymetry.cosine(grid, spec.amplitude, spec.wavenumber, self.family)

    def initial_fields(self, grid: PeriodicGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
        grid = grid or self.grid()
        return grid.fourier_series(self.eta), grid.fourier_series(self.phi_trace)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(tol=self.cg_tol, max_iter=self.cg_max_iter)

    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, t_end=self.t_end, projection=self.projection,
                             solve=self.solve_options(), diag_stride=self.diag_stride)

    def dtn(self) -> DtNConfig:
        return DtNConfig(nz=self.dtn_nz)

    def initial_state(self, delta: float | None = None, N: int | None = None) -> State:
        grid = self.grid()
        eta0, trace0 = self.initial_fields(grid)
        return build_initial_data(ScalarField(grid, eta0), ScalarField(grid, trace0),
                                  self.bathy(grid), self.params(delta, N), self.solve_options(),
                                  h_min=self.h_min)


def _field_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required" and isinstance(error.instance, dict):
        missing = [k for k in error.validator_value if k not in error.instance]
        parts += missing[:1]
    return ".".join(parts) or "<root>"


def validate(data: Any) -> None:
    """Raise :class:`ConfigError` naming the first offending field."""
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        raise ConfigError(f"config field '{_field_path(err)}': {err.message}")
