"""Command-line entry point for markov-bounds.

Subcommands:
    bound     assemble, solve and report the certified lower bound of a spec
    sweep     solve a family of partitions and degrees into a resumable CSV
    export    write the conic problem of a spec in SDPA sparse format
    simulate  Monte Carlo upper bound for a stored policy or constant control

Run with: python app.py bound data/lotka_volterra.spec --simulate
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import pandas as pd

from src.config import (
    ACCEPTED_STATUSES,
    DEFAULT_DT,
    DEFAULT_PATHS,
    DEFAULT_SEED,
    LOG_DATE_FORMAT,
    LOG_FORMAT,
    MEAN_PATH_POINTS,
    VERSION,
)
from src.conic import export_sdpa, structure_report
from src.pipeline import build_program, run_bound, simulate_upper_bound, uncontrolled
from src.simulate import BoundReport, Policy, format_gap
from src.spec_loader import load_policy, load_problem_spec, load_sweep_spec, save_policy
from src.sweep import default_workers, run_sweep
from src.utils import format_value, report_json, summarize_sweep

logger = logging.getLogger("markov_bounds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markov-bounds",
        description="Certified lower bounds for stochastic optimal control via discretized SOS programs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    bound = commands.add_parser("bound", help="Compute the lower bound of a problem spec")
    bound.add_argument("spec", type=Path, help="Problem spec file")
    bound.add_argument("--backend", help="Conic backend (overrides the spec file)")
    bound.add_argument("--tol", type=float, help="Solver tolerance (overrides the spec file)")
    bound.add_argument("--degree", type=int, help="Polynomial degree d (overrides the spec file)")
    bound.add_argument("--time-limit", type=float, help="Solver time limit in seconds")
    bound.add_argument("--simulate", action="store_true", help="Also estimate the upper bound of the extracted policy")
    bound.add_argument("--paths", type=int, default=DEFAULT_PATHS, help="Sample paths for --simulate")
    bound.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Random seed for --simulate")
    bound.add_argument("--dt", type=float, default=DEFAULT_DT, help="Euler-Maruyama step for --simulate")
    bound.add_argument("--horizon", type=float, help="Simulation horizon for discounted problems")
    bound.add_argument("--out", type=Path, help="Write the JSON report here")
    bound.add_argument("--json", action="store_true", help="Print the JSON report instead of text")
    bound.add_argument("--policy-out", type=Path, help="Store the recovered pieces for later simulation")

    sweep = commands.add_parser("sweep", help="Run a partition/degree sweep")
    sweep.add_argument("sweep", type=Path, help="Sweep spec file")
    sweep.add_argument("--out", type=Path, required=True, help="Results CSV (appended, resumable)")
    sweep.add_argument("--workers", type=int, default=default_workers(), help="Parallel worker processes")
    sweep.add_argument("--backend", help="Conic backend (overrides the spec file)")
    sweep.add_argument("--tol", type=float, help="Solver tolerance (overrides the spec file)")
    sweep.add_argument("--summary", type=Path, help="Write best bound per partition and degree here")

    export = commands.add_parser("export", help="Export the conic problem in SDPA format")
    export.add_argument("spec", type=Path, help="Problem spec file")
    export.add_argument("out", type=Path, help="Output .dat-s file")
    export.add_argument("--degree", type=int, help="Polynomial degree d (overrides the spec file)")
    export.add_argument("--report", action="store_true", help="Print block structure counts")

    simulate = commands.add_parser("simulate", help="Estimate the cost of a policy by simulation")
    simulate.add_argument("spec", type=Path, help="Problem spec file")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--policy", type=Path, help="Policy JSON written by 'bound --policy-out'")
    source.add_argument("--uncontrolled", action="store_true", help="Hold the control constant")
    simulate.add_argument(
        "--control", type=float, nargs="+", help="Constant control for --uncontrolled (default: lower corner of U)"
    )
    simulate.add_argument("--paths", type=int, default=DEFAULT_PATHS, help="Number of sample paths")
    simulate.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Random seed")
    simulate.add_argument("--dt", type=float, default=DEFAULT_DT, help="Euler-Maruyama step")
    simulate.add_argument("--horizon", type=float, help="Simulation horizon for discounted problems")
    simulate.add_argument("--out", type=Path, help="Per-path cost CSV")
    simulate.add_argument("--summary", type=Path, help="One-row summary CSV")
    simulate.add_argument("--mean-path", type=Path, help="Ensemble mean state over time CSV")
    return parser


def cmd_bound(args: argparse.Namespace) -> int:
    spec = load_problem_spec(args.spec)
    if args.degree is not None:
        spec = spec.with_solve(degree=args.degree)
    run = run_bound(spec, backend=args.backend, tolerance=args.tol, time_limit=args.time_limit)
    if run.bound.lower_bound is None:
        print(f"error: solve failed with status {run.bound.status}: {run.bound.message}", file=sys.stderr)
        return 1
    upper = None
    if args.simulate:
        started = time.perf_counter()
        upper = simulate_upper_bound(spec, run.policy(), args.paths, args.seed, args.dt, horizon=args.horizon)
        run.timings["simulation_time"] = time.perf_counter() - started
    report = run.report(upper)
    if args.policy_out:
        save_policy(args.policy_out, spec, run.bound.lower_bound, {p.index: p.to_polynomial() for p in run.bound.pieces})
    payload = report_json(report.to_dict())
    if args.out:
        args.out.write_text(payload)
        logger.info("Wrote report to %s", args.out)
    if args.json:
        print(payload)
    else:
        print("\n".join(report.lines()))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    sweep = load_sweep_spec(args.sweep)
    results = run_sweep(sweep, args.out, workers=args.workers, backend=args.backend, tolerance=args.tol)
    failed = results[~results["status"].isin(ACCEPTED_STATUSES)]
    print(f"{len(results)} instances in {args.out}, {len(failed)} without a bound")
    if args.summary:
        summarize_sweep(results).to_csv(args.summary, index=False)
        logger.info("Wrote sweep summary to %s", args.summary)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    spec = load_problem_spec(args.spec)
    if args.degree is not None:
        spec = spec.with_solve(degree=args.degree)
    _, _, problem, _ = build_program(spec)
    export_sdpa(problem, args.out)
    print(f"Wrote {args.out}")
    if args.report:
        for key, value in structure_report(problem).items():
            print(f"{key}: {value}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_problem_spec(args.spec)
    stored_lb: Optional[float] = None
    if args.uncontrolled:
        controller = uncontrolled(spec, args.control)
    else:
        stored = load_policy(args.policy, spec)
        stored_lb = stored.lower_bound
        controller = Policy(spec.model, spec.cost.stage, spec.build_partition(), stored.pieces)
    points = MEAN_PATH_POINTS if args.mean_path else 0
    estimate = simulate_upper_bound(
        spec, controller, args.paths, args.seed, args.dt, record_points=points, horizon=args.horizon
    )
    ensemble = estimate.ensemble
    if args.out:
        ensemble.to_frame().to_csv(args.out, index=False)
    if args.summary:
        ensemble.summary_frame().to_csv(args.summary, index=False)
    if args.mean_path:
        frame = pd.DataFrame(ensemble.mean_path, columns=[v.name for v in spec.model.states])
        frame.insert(0, spec.model.time.name, ensemble.mean_times)
        frame.to_csv(args.mean_path, index=False)
    print(f"UB: {format_value(estimate.upper_bound)} ± {format_value(estimate.stderr, 3)}")
    print(f"paths: {int((~ensemble.diverged).sum())} of {ensemble.paths} used")
    if stored_lb is not None:
        report = BoundReport(spec.name, stored_lb, "stored", estimate.upper_bound, estimate.stderr)
        print(f"LB: {format_value(stored_lb)}")
        print(f"gap: {format_gap(report.gap)}")
    return 0


COMMANDS = {
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "export": cmd_export,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
