"""Command-line driver for the refinement benchmark series.

Runs the solver over a hierarchy of uniformly refined meshes for one or
more power-law exponents p and reports pressure-error convergence tables.
One level below the smallest requested level is solved as well (when
possible) so that the first requested level has an order-of-convergence
entry, mirroring the usual convention that EOC_i compares levels i-1, i.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from .dgops import DGOperators
from .errors import (EOCReport, f_error, format_table, pressure_error,
                     write_csv, write_json)
from .femspace import prolong_broken, prolong_continuous
from .manufactured import make_case
from .mesh import mesh_at_level
from .solver import NewtonConfig, NonconvergenceError, newton_solve
from .system import DiscreteSystem

logger = logging.getLogger("ldgflow.cli")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Configuration of one benchmark invocation."""

    p_values: tuple = (2.25,)
    case: int = 1
    mode: str = "navier-stokes"
    levels: tuple = (1, 2, 3, 4)
    alpha: float = 2.5
    delta: float = 1e-4
    degree: int = 1
    out: str | None = None
    fmt: str = "csv"
    case2_exponent_base: str = "alpha"
    warm_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be strictly ascending")
        if self.case not in (1, 2):
            raise ValueError("case must be 1 or 2")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_levels(text: str) -> tuple:
    """Parse level specs like '1-4', '2', or '1,2,3'."""
    if "-" in text:
        lo, hi = text.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def run_level(config: RunConfig, p: float, level: int, warm=None):
    """Solve one refinement level; returns (result dict, solution data)."""
    case = make_case(config.case, p, delta=config.delta,
                     convective=(config.mode == "navier-stokes"),
                     coef=config.alpha,
                     exponent_base=config.case2_exponent_base)
    mesh = mesh_at_level(level)
    ops = DGOperators(mesh, degree=config.degree)
    system = DiscreteSystem(ops, case.params, alpha=config.alpha,
                            mode=config.mode, body_force=case.body_force,
                            boundary_velocity=case.boundary_velocity)
    initial = None
    if warm is not None:
        prev_ops, (v_prev, q_prev, lam_prev) = warm
        initial = system.pack(prolong_broken(prev_ops.V, ops.V, v_prev),
                              prolong_continuous(prev_ops.Q, ops.Q, q_prev),
                              lam_prev)
    start = time.perf_counter()
    try:
        result = newton_solve(system, initial, NewtonConfig(), level=level)
    except NonconvergenceError as exc:
        if exc.reason != "stalled":
            raise
        # From a (near-)zero state with strongly shear-thickening
        # exponents the tangent viscosity is ~delta^{p-2}, so the first
        # Newton step overshoots by orders of magnitude and no residual-
        # decreasing fraction of it exists.  Full steps contract the
        # overshoot geometrically, so retry without the line search.
        logger.info("level=%d line search stalled; retrying with full "
                    "Newton steps", level)
        result = newton_solve(system, initial, NewtonConfig(damping=False),
                              level=level)
    elapsed = time.perf_counter() - start
    v, q, lam = system.split(result.state)
    record = {
        "level": level,
        "h": mesh.h_max,
        "e_q": pressure_error(ops.Q, q, case),
        "e_f": f_error(ops, v, case, system.datum),
        "newton_iters": result.iterations,
        "seconds": elapsed,
    }
    return record, (ops, (v, q, lam))


def run_series(config: RunConfig):
    """Run all requested exponents; returns a list of EOCReport."""
    reports = []
    for p in config.p_values:
        report = EOCReport(p=p, case=config.case, mode=config.mode,
                           config=config.as_dict())
        lo, hi = min(config.levels), max(config.levels)
        solve_levels = list(range(max(lo - 1, 0), hi + 1))
        warm = None
        for level in solve_levels:
            try:
                record, solution = run_level(config, p, level, warm=warm)
            except NonconvergenceError as exc:
                logger.error("p=%g level=%d did not converge: %s",
                             p, level, exc)
                report.converged = False
                break
            report.levels.append(record["level"])
            report.h.append(record["h"])
            report.e_q.append(record["e_q"])
            report.e_f.append(record["e_f"])
            report.newton_iters.append(record["newton_iters"])
            report.seconds.append(record["seconds"])
            if config.warm_start:
                warm = solution
        reports.append(report)
    return reports


def output_path(config: RunConfig, p: float) -> Path:
    path = Path(config.out)
    if len(config.p_values) == 1:
        return path
    return path.with_name(f"{path.stem}_p{p:g}{path.suffix}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldgflow",
        description="Pressure-error convergence benchmark for the LDG "
                    "power-law flow solver.")
    parser.add_argument("--p", type=float, nargs="+", default=[2.25],
                        help="power-law exponents (one run per value)")
    parser.add_argument("--case", type=int, choices=(1, 2), default=1,
                        help="pressure-regularity case")
    parser.add_argument("--mode", choices=("navier-stokes", "stokes"),
                        default="navier-stokes")
    parser.add_argument("--levels", type=parse_levels, default=(1, 2, 3, 4),
                        help="refinement levels, e.g. '1-4' or '1,2,3'")
    parser.add_argument("--alpha", type=float, default=2.5,
                        help="stabilization parameter")
    parser.add_argument("--delta", type=float, default=1e-4,
                        help="constitutive regularisation")
    parser.add_argument("--degree", type=int, default=1,
                        help="polynomial degree k")
    parser.add_argument("--out", default=None, help="report output path")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"),
                        default="csv")
    parser.add_argument("--case2-exponent-base", choices=("alpha", "beta"),
                        default="alpha",
                        help="coefficient used in the case-2 pressure "
                             "exponent")
    parser.add_argument("--warm-start", action="store_true",
                        help="initialise each level from the previous one")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed echoed into the report config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stdout)
    config = RunConfig(p_values=tuple(args.p), case=args.case,
                       mode=args.mode, levels=tuple(args.levels),
                       alpha=args.alpha, delta=args.delta,
                       degree=args.degree, out=args.out, fmt=args.fmt,
                       case2_exponent_base=args.case2_exponent_base,
                       warm_start=args.warm_start, seed=args.seed)
    reports = run_series(config)
    status = 0
    for report in reports:
        print(format_table(report))
        if not report.converged:
            status = 1
        if config.out is not None:
            path = output_path(config, report.p)
            if config.fmt == "csv":
                write_csv(report, path)
            else:
                write_json(report, path)
            print(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
