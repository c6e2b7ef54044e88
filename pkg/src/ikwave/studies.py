"""Delta-sweep studies and their CSV / fit-summary output."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig
from .consistency import OrderStudy, consistency_order_study
from .elliptic import SolverError
from .evolution import GuardTrip, simulate
from .fitting import expected_exponent, loglog_slope

FLOAT_FORMAT = "%.16e"


class StudyAborted(RuntimeError):
    """A run inside a study failed; ``delta`` names the offending sweep value."""

    def __init__(self, message: str, delta: float):
        super().__init__(message)
        self.delta = delta


@dataclass(frozen=True)
class ConvergenceReport:
    deltas: tuple[float, ...]
    sup_eta_diff: tuple[float, ...]
    sup_phi_diff: tuple[float, ...]
    eta_slope: float
    phi_slope: float
    expected: int
    N: int
    ref_N: int

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.deltas, self.sup_eta_diff, self.sup_phi_diff))


def _check_geometric(deltas: Sequence[float], rtol: float = 0.05) -> None:
    d = np.asarray(deltas, dtype=float)
    if d.size < 2 or np.any(d <= 0):
        raise ValueError("deltas must be at least two positive values")
    ratios = d[1:] / d[:-1]
    if np.any(np.abs(ratios / ratios[0] - 1.0) > rtol):
        raise ValueError(f"deltas are not geometric: ratios {ratios}")


def _pair_difference(cfg: RunConfig, delta: float, ref_N: int) -> tuple[float, float]:
    runs = []
    stepper = cfg.stepper()
    for n in (cfg.N, ref_N):
        try:
            initial = cfg.initial_state(delta=delta, N=n)
            runs.append(simulate(initial, stepper))
        except (GuardTrip, SolverError, ValueError, FloatingPointError) as exc:
            raise StudyAborted(f"run N={n} at delta={delta} failed: {exc}", delta) from exc
    grid = cfg.grid()
    low, ref = runs
    de = max(grid.norm(a - b) for a, b in zip(low.eta, ref.eta))
    dp = max(grid.norm(a - b) for a, b in zip(low.trace, ref.trace))
    return de, dp


def self_convergence_study(cfg: RunConfig, deltas: Sequence[float], ref_N: int,
                           workers: int = 1) -> ConvergenceReport:
    """Compare model N against model ``ref_N`` of the same family over a delta sweep.

    Both models start from the same (eta0, trace) prepared per delta and run with
    the same dt and t_end.  The sup is taken over the recorded snapshots, which
    are every ``diag_stride`` steps plus the final time.
    """
    if ref_N < cfg.N + 1:
        raise ValueError(f"ref_N must be at least N+1 = {cfg.N + 1}, got {ref_N}")
    deltas = tuple(float(d) for d in deltas)
    _check_geometric(deltas)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {d: pool.submit(_pair_difference, cfg, d, ref_N) for d in deltas}
            results = {d: f.result() for d, f in futures.items()}
    else:
        results = {d: _pair_difference(cfg, d, ref_N) for d in deltas}
    de = tuple(results[d][0] for d in deltas)
    dp = tuple(results[d][1] for d in deltas)
    return ConvergenceReport(deltas, de, dp, loglog_slope(deltas, de), loglog_slope(deltas, dp),
                             expected_exponent(cfg.family, cfg.N), cfg.N, ref_N)


def consistency_study(cfg: RunConfig, deltas: Sequence[float]) -> OrderStudy:
    grid = cfg.grid()
    eta0, trace0 = cfg.initial_fields(grid)
    return consistency_order_study(grid, eta0, trace0, cfg.bathy(grid), cfg.params(), deltas,
                                   cfg.dtn(), cfg.solve_options())


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT_FORMAT % v for v in row])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


def fit_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".fit.json")


def write_fit(csv_path: str | Path, summary: dict) -> Path:
    out = fit_path(csv_path)
    out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out
