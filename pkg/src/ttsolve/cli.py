"""Command-line experiment runner.

Example:
    ttsolve-bench --problem laplacian --dim 3 --mode-size 8 \
        --method nongreedy --kick-rank 3 --trunc-tol 1e-8 \
        --trace run.jsonl --summary run.json
"""

from __future__ import annotations

import argparse
import sys

from .dense import InputError
from .problems import ProblemSpec, run_experiment
from .solvers import SolverConfig

#: CLI method names to internal method identifiers
METHOD_ALIASES = {
    "als": "als",
    "dmrg": "dmrg",
    "greedy": "greedy_sd",
    "nongreedy": "nongreedy_sd",
    "sd2": "sd2",
    "amen": "amen",
    "dense-sd": "dense_sd",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ttsolve-bench",
        description="Run a TT solver on a generated SPD problem and record a convergence trace.",
    )
    p.add_argument("--problem", choices=["laplacian", "random_spd_tt"], default="laplacian")
    p.add_argument("--dim", type=int, default=3, help="number of tensor modes d")
    p.add_argument("--mode-size", type=int, default=8, help="grid points per mode n")
    p.add_argument("--unscaled", action="store_true",
                   help="raw (-1,2,-1) stencil without the 1/h^2 grid factor")
    p.add_argument("--rhs", choices=["ones", "random"], default="ones")
    p.add_argument("--method", choices=sorted(METHOD_ALIASES), default="nongreedy")
    p.add_argument("--kick-rank", type=int, default=5,
                   help="rank of the rounded-residual enrichment")
    p.add_argument("--trunc-tol", type=float, default=1e-4,
                   help="solution truncation tolerance eps_x")
    p.add_argument("--res-tol", type=float, default=None,
                   help="residual rounding tolerance (default: trunc-tol)")
    p.add_argument("--max-sweeps", type=int, default=20)
    p.add_argument("--rank-cap", type=int, default=None)
    p.add_argument("--stop-tol", type=float, default=1e-8,
                   help="relative residual at which the run counts as converged")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", choices=["auto", "on", "off"], default="auto",
                   help="dense reference solve: auto enables it below the size cap")
    p.add_argument("--trace", metavar="PATH.jsonl", default=None,
                   help="write the per-microstep convergence trace here")
    p.add_argument("--summary", metavar="PATH.json", default=None,
                   help="write the run summary here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ProblemSpec(
            kind=args.problem,
            d=args.dim,
            n=args.mode_size,
            scaled=not args.unscaled,
            rhs=args.rhs,
            seed=args.seed,
        )
        config = SolverConfig(
            method=METHOD_ALIASES[args.method],
            kick_rank=args.kick_rank,
            truncation_tol=args.trunc_tol,
            residual_tol=args.res_tol,
            max_sweeps=args.max_sweeps,
            rank_cap=args.rank_cap,
            stop_tol=args.stop_tol,
            seed=args.seed,
        )
        result = run_experiment(
            spec, config,
            trace_path=args.trace,
            summary_path=args.summary,
            oracle=args.oracle,
        )
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    sweeps = len(result.trace.sweep_end_events())
    status = "converged" if result.converged else "stagnated"
    line = (
        f"{args.method} on {args.problem} d={args.dim} n={args.mode_size}: "
        f"{status} after {sweeps} sweeps, rel residual {result.rel_residual:.3e}, "
        f"ranks {list(result.final_ranks)}"
    )
    if result.oracle_rel_error is not None:
        line += f", rel A-norm error {result.oracle_rel_error:.3e}"
    print(line)
    return 0 if result.converged else 1


if __name__ == "__main__":
    sys.exit(main())
