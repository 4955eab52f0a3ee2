#!/usr/bin/env python3
"""Measure per-sweep wall time of the enriched-descent solver across a grid
of dimensions and mode sizes (the linear-complexity check).

Example:
    python scripts/sweep_timing.py --dims 4 8 16 --mode-sizes 16 32
"""

import argparse
import statistics

from ttsolve.problems import laplacian_tt, ones_tt
from ttsolve.solvers import SolverConfig, solve


def per_sweep_median(d, n, kick, rank_cap, sweeps):
    A = laplacian_tt(d, n)
    y = ones_tt(d, n)
    cfg = SolverConfig(method="nongreedy_sd", kick_rank=kick, truncation_tol=1e-6,
                       stop_tol=1e-16, max_sweeps=sweeps, rank_cap=rank_cap)
    _, trace = solve(A, y, cfg)
    ends = trace.sweep_end_events()
    deltas = [ends[i].t_wall_s - (ends[i - 1].t_wall_s if i else 0.0)
              for i in range(len(ends))]
    return statistics.median(deltas[1:]) if len(deltas) > 1 else deltas[0]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dims", type=int, nargs="+", default=[4, 8, 16])
    p.add_argument("--mode-sizes", type=int, nargs="+", default=[16, 32])
    p.add_argument("--kick-rank", type=int, default=3)
    p.add_argument("--rank-cap", type=int, default=8)
    p.add_argument("--max-sweeps", type=int, default=8)
    args = p.parse_args()

    print(f"{'d':>4s} {'n':>4s} {'per-sweep (ms)':>15s}")
    for d in args.dims:
        for n in args.mode_sizes:
            t = per_sweep_median(d, n, args.kick_rank, args.rank_cap, args.max_sweeps)
            print(f"{d:4d} {n:4d} {t * 1e3:15.2f}")


if __name__ == "__main__":
    main()
