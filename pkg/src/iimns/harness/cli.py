"""Command-line driver for runs and studies.

Exit codes: 0 on success, 1 on invalid input, 2 when the solver diverges.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import Diverged, IIMError
from ..interface import node_points
from ..solver import run
from . import config as config_mod
from .cases import CASES, get_case
from .studies import (
    consistency_study,
    convergence_study,
    operator_norm_study,
    pressure_error,
)

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2

log = logging.getLogger("iimns")


def _int_list(text: str, least: int) -> list[int]:
    try:
        out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or any(n < least for n in out):
        raise argparse.ArgumentTypeError(f"expected integers >= {least}, got {text!r}")
    return sorted(out)


def _grids(text: str) -> list[int]:
    return _int_list(text, 2)


def _powers(text: str) -> list[int]:
    return _int_list(text, 1)


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iimns",
        description="Immersed-interface Navier-Stokes solver on a periodic grid: runs and studies.",
        epilog="cases: " + ", ".join(sorted(CASES)) + "\n\nconfig keys for `run --config`:\n"
        + config_mod.__doc__.split("::", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single solve with optional snapshots",
                       description="Single solve. Command-line options override the config file.")
    p.add_argument("--config", help="YAML config file (keys listed in `iimns --help`)")
    p.add_argument("--case", help="manufactured case name")
    p.add_argument("--N", type=int, help="grid parameter N (2N nodes per axis)")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--lambda", dest="lam", type=float, help="tau / h")
    p.add_argument("--out", help="output directory for the step log and snapshots")

    p = sub.add_parser("converge", help="convergence study of a manufactured case")
    p.add_argument("--case", required=True)
    p.add_argument("--grids", type=_grids, default=[32, 64])
    p.add_argument("--T", type=float, default=0.25)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--no-c7", action="store_true", help="disable the time-crossing corrections C7")
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = sub.add_parser("consistency", help="corrected-stencil truncation errors on the exact solution")
    p.add_argument("--case", required=True)
    p.add_argument("--grids", type=_grids, default=[32, 64, 128])
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = sub.add_parser("opnorms", help="exact maximum norms of the tracked grid operators")
    p.add_argument("--grids", type=_grids, default=[16, 32, 64])
    p.add_argument("--n-list", type=_powers, default=[1, 2, 4, 8, 16, 32, 64, 128, 256],
                   help="Crank-Nicolson powers n")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--no-bound", action="store_true", help="skip the lattice-sum bound for A")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    return parser


def _cmd_run(args) -> int:
    cfg = config_mod.load_config(args.config) if args.config else {}
    if args.case:
        cfg["case"] = args.case
    if args.T is not None:
        cfg["T"] = args.T
    if args.lam is not None:
        cfg["lambda"] = args.lam
    out = args.out or cfg.get("output")
    sc = config_mod.solver_config(cfg, args.N, snapshot_dir=str(Path(out) / "snapshots") if out else None)
    case = sc.case
    pts = node_points(sc.spec)
    rows = []

    def monitor(state, solver):
        d = state.diagnostics
        row = {"step": state.n, "t": state.t_n, "max_speed": float(np.max(np.abs(state.u_n.values))),
               "m": d.get("m", ""), "rhs_mean": d.get("rhs_mean", ""), "divergence": d.get("divergence", "")}
        if case is not None:
            exact = np.moveaxis(case.velocity(pts, state.t_n), -1, 0)
            row["velocity_error"] = float(np.max(np.abs(state.u_n.values - exact)))
            if state.n == sc.n_steps:
                p = solver.pressure_at(state.u_n.values, state.t_n)
                row["pressure_error"] = pressure_error(p.values, case.pressure(pts, state.t_n))[0]
        rows.append(row)

    run(sc, monitor)
    cols = list(dict.fromkeys(k for r in rows for k in r))
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        fh = open(Path(out) / "steps.csv", "w", newline="")
    else:
        fh = sys.stdout
    w = csv.DictWriter(fh, cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if out:
        fh.close()
        log.info("wrote %s", Path(out) / "steps.csv")
    return EXIT_OK


def _cmd_converge(args) -> int:
    case = get_case(args.case)
    rep = convergence_study(case, args.grids, args.lam, args.T, enable_C7=not args.no_c7)
    _emit(rep.to_csv(), args.out)
    return EXIT_OK


def _cmd_consistency(args) -> int:
    rep = consistency_study(get_case(args.case), args.grids, args.t)
    _emit(rep.to_csv(), args.out)
    return EXIT_OK


def _cmd_opnorms(args) -> int:
    rep = operator_norm_study(args.grids, args.n_list, args.lam, include_bound=not args.no_bound)
    _emit(rep.to_csv(), args.out)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "converge": _cmd_converge, "consistency": _cmd_consistency, "opnorms": _cmd_opnorms}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for divergence here
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Diverged as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INVALID
    except (IIMError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
