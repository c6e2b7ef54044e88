"""Command-line entry point: ``ikwave <subcommand> ...``; every output is CSV."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig
from .consistency import UnderResolvedError
from .core import Family, ModelParams
from .dispersion import dispersion_curve
from .dtn import DtNError
from .elliptic import SolverError
from .evolution import GuardTrip, simulate
from .studies import (StudyAborted, consistency_study, self_convergence_study, write_csv,
                      write_fit)

HEADERS = {
    "simulate": ("t", "mass", "energy", "compat_resid", "min_H", "min_a"),
    "dispersion": ("mu", "cik2", "cww2", "abs_err"),
    "consistency": ("delta", "r1_l2", "r2_l2"),
    "convergence": ("delta", "sup_eta_diff", "sup_phi_diff"),
}


def _deltas(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from exc
    if not values or any(v <= 0 or v > 1 for v in values):
        raise argparse.ArgumentTypeError("deltas must lie in (0, 1]")
    return values


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config)
    traj = simulate(cfg.initial_state(), cfg.stepper())
    write_csv(args.out, HEADERS["simulate"], traj.rows())
    return 0


def cmd_dispersion(args) -> int:
    params = ModelParams(args.family, args.N, 1.0)
    rows = dispersion_curve(params, args.mu_min, args.mu_max, args.samples)
    write_csv(args.out, HEADERS["dispersion"], rows)
    return 0


def cmd_init_data(args) -> int:
    cfg = RunConfig.load(args.config)
    state = cfg.initial_state()
    n = len(state.phi)
    header = ["x", "eta", "trace"] + [f"phi{j}" for j in range(n)]
    cols = [state.grid.points, state.eta.values, state.trace().values, *state.phi.array]
    write_csv(args.out, header, np.column_stack(cols))
    return 0


def cmd_consistency(args) -> int:
    cfg = RunConfig.load(args.config)
    study = consistency_study(cfg, args.deltas)
    write_csv(args.out, HEADERS["consistency"], study.rows())
    write_fit(args.out, {"r1_slope": study.r1_slope, "r2_slope": study.r2_slope,
                         "expected": study.expected, "family": cfg.family, "N": cfg.N})
    print(f"r1 slope {study.r1_slope:.4f}, r2 slope {study.r2_slope:.4f}, "
          f"expected {study.expected}")
    return 0


def cmd_convergence(args) -> int:
    cfg = RunConfig.load(args.config)
    rep = self_convergence_study(cfg, args.deltas, args.ref_N, workers=args.workers)
    write_csv(args.out, HEADERS["convergence"], rep.rows())
    write_fit(args.out, {"eta_slope": rep.eta_slope, "phi_slope": rep.phi_slope,
                         "expected": rep.expected, "family": cfg.family, "N": rep.N,
                         "ref_N": rep.ref_N})
    print(f"eta slope {rep.eta_slope:.4f}, trace slope {rep.phi_slope:.4f}, "
          f"expected {rep.expected}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ikwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="time-integrate a config, write diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dispersion", help="linear phase speed against the exact one")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--mu-min", type=float, default=0.01)
    p.add_argument("--mu-max", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("init-data", help="compatible initial potential for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_data)

    p = sub.add_parser("consistency", help="water-wave residual norms over a delta sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--deltas", type=_deltas, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("convergence", help="self-convergence against a higher-order model")
    p.add_argument("--config", required=True)
    p.add_argument("--deltas", type=_deltas, required=True)
    p.add_argument("--ref-N", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GuardTrip, SolverError, DtNError, StudyAborted,
            UnderResolvedError) as exc:
        print(f"ikwave {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ikwave {args.command}: I/O error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FloatingPointError) as exc:
        print(f"ikwave {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
