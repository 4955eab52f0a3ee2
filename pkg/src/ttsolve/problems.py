"""Problem generators, the dense brute-force oracle, and the experiment runner.

The flagship instance is the d-dimensional finite-difference Dirichlet
Laplacian on a uniform interior grid, which has an exact rank-2 TT operator,
solved against the all-ones right-hand side.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import io as ttio
from .dense import InputError, solve_spd
from .solvers import SolverConfig, residual_norm, solve
from .tt import (
    TtMatrix,
    TtVector,
    mat_to_dense,
    to_dense,
    tt_mat_add,
    tt_matmat,
    tt_ones,
    tt_random,
    tt_random_matrix,
    tt_transpose,
    identity_matrix,
)

#: environment variable overriding the largest system the dense oracle will touch
ORACLE_CAP_ENV = "TTSOLVE_ORACLE_CAP"
ORACLE_CAP_DEFAULT = 2**16

PROBLEM_KINDS = ("laplacian", "random_spd_tt", "file")
RHS_KINDS = ("ones", "random", "file")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "laplacian"
    d: int = 3
    n: int = 8
    scaled: bool = True
    rhs: str = "ones"
    rhs_rank: int = 2
    seed: int = 0
    operator_path: str | None = None
    rhs_path: str | None = None

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise InputError(f"unknown problem kind {self.kind!r}")
        if self.rhs not in RHS_KINDS:
            raise InputError(f"unknown rhs kind {self.rhs!r}")
        if self.d < 1:
            raise InputError("d must be >= 1")
        if self.n < 2:
            raise InputError("n must be >= 2")


@dataclass
class ExperimentResult:
    problem: ProblemSpec
    config: SolverConfig
    trace: object
    x: TtVector
    final_ranks: tuple[int, ...]
    final_residual: float
    rel_residual: float
    converged: bool
    oracle_error: float | None = None
    oracle_rel_error: float | None = None


# ---------------------------------------------------------------------------
# generators


def laplacian_1d(n: int, scaled: bool = True) -> np.ndarray:
    """Dense 1D Dirichlet stencil matrix tridiag(-1, 2, -1), times 1/h^2 when scaled."""
    if n < 2:
        raise InputError("n must be >= 2")
    D = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    if scaled:
        h = 1.0 / (n + 1)
        D /= h * h
    return D


def laplacian_tt(d: int, n: int, scaled: bool = True) -> TtMatrix:
    """TT operator for the Kronecker sum sum_k I x .. x D x .. x I with D the
    1D Dirichlet stencil; interior TT ranks are exactly 2."""
    if d < 1:
        raise InputError("d must be >= 1")
    D = laplacian_1d(n, scaled)
    I = np.eye(n)
    if d == 1:
        return TtMatrix(cores=(D[None, :, :, None],))
    first = np.stack([D, I], axis=-1)[None, :, :, :]  # (1, n, n, 2)
    mid = np.zeros((2, n, n, 2))
    mid[0, :, :, 0] = I
    mid[1, :, :, 0] = D
    mid[1, :, :, 1] = I
    last = np.stack([I, D], axis=0)[:, :, :, None]  # (2, n, n, 1)
    return TtMatrix(cores=(first,) + (mid,) * (d - 2) + (last,))


def ones_tt(d: int, n: int) -> TtVector:
    if d < 1 or n < 1:
        raise InputError("invalid sizes")
    return tt_ones([n] * d)


def random_rhs_tt(d: int, n: int, rank: int = 2, seed: int = 0) -> TtVector:
    if d < 1 or n < 1 or rank < 1:
        raise InputError("invalid sizes")
    return tt_random([n] * d, rank, seed)


def random_spd_tt(d: int, n: int, rank: int = 2, seed: int = 0, shift: float = 1.0) -> TtMatrix:
    """Random SPD TT operator M^T M + shift * I (ranks rank^2 + 1)."""
    M = tt_random_matrix([n] * d, rank, seed)
    A = tt_matmat(tt_transpose(M), M)
    eye = identity_matrix([n] * d)
    eye = TtMatrix(cores=(eye.cores[0] * shift,) + eye.cores[1:])
    return tt_mat_add(A, eye)


# ---------------------------------------------------------------------------
# oracle


def oracle_cap() -> int:
    raw = os.environ.get(ORACLE_CAP_ENV)
    if raw is None:
        return ORACLE_CAP_DEFAULT
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{ORACLE_CAP_ENV} must be an integer, got {raw!r}")


def dense_oracle_solve(A: TtMatrix, y: TtVector, cap: int | None = None) -> np.ndarray:
    """Densify and solve directly; the reference for all error measurements."""
    cap = oracle_cap() if cap is None else cap
    if A.size > cap:
        raise InputError(f"oracle size {A.size} exceeds cap {cap}")
    M = mat_to_dense(A, cap=cap * cap)
    b = to_dense(y, cap=cap)
    return solve_spd(0.5 * (M + M.T), b)


# ---------------------------------------------------------------------------
# experiment runner


def build_problem(spec: ProblemSpec):
    if spec.kind == "laplacian":
        A = laplacian_tt(spec.d, spec.n, spec.scaled)
    elif spec.kind == "random_spd_tt":
        A = random_spd_tt(spec.d, spec.n, seed=spec.seed)
    else:
        if spec.operator_path is None:
            raise InputError("file problem needs operator_path")
        A = ttio.load(spec.operator_path)
        if not isinstance(A, TtMatrix):
            raise InputError("operator file does not contain a TT operator")
    if spec.rhs == "ones":
        y = ones_tt(spec.d, spec.n)
    elif spec.rhs == "random":
        y = random_rhs_tt(spec.d, spec.n, spec.rhs_rank, spec.seed)
    else:
        if spec.rhs_path is None:
            raise InputError("file rhs needs rhs_path")
        y = ttio.load(spec.rhs_path)
        if not isinstance(y, TtVector):
            raise InputError("rhs file does not contain a TT vector")
    return A, y


def run_experiment(
    spec: ProblemSpec,
    config: SolverConfig,
    trace_path=None,
    summary_path=None,
    oracle: str = "auto",
) -> ExperimentResult:
    """Build the problem, run the solver, optionally verify against the dense
    oracle, and write the JSON-lines trace plus a JSON summary."""
    if oracle not in ("auto", "on", "off"):
        raise InputError(f"oracle mode must be auto/on/off, got {oracle!r}")
    A, y = build_problem(spec)
    cap = oracle_cap()
    x_star = None
    if oracle == "on" or (oracle == "auto" and A.size <= cap):
        x_star = dense_oracle_solve(A, y, cap=cap if oracle == "auto" else None)

    x, trace = solve(A, y, config, x_exact=x_star)

    res = residual_norm(A, y, x)
    from .tt import tt_norm

    ny = tt_norm(y)
    rel = res / ny if ny > 0 else 0.0
    converged = rel <= config.stop_tol
    err = rel_err = None
    if x_star is not None:
        A_dense = mat_to_dense(A)
        e = to_dense(x) - x_star
        err = math.sqrt(max(float(e @ (A_dense @ e)), 0.0))
        denom = math.sqrt(max(float(x_star @ (A_dense @ x_star)), 0.0))
        rel_err = err / denom if denom > 0 else 0.0

    result = ExperimentResult(
        problem=spec,
        config=config,
        trace=trace,
        x=x,
        final_ranks=x.ranks,
        final_residual=res,
        rel_residual=rel,
        converged=converged,
        oracle_error=err,
        oracle_rel_error=rel_err,
    )
    if trace_path is not None:
        trace.write_jsonl(trace_path)
    if summary_path is not None:
        with open(summary_path, "w") as f:
            json.dump(summary_dict(result), f, indent=2)
            f.write("\n")
    return result


def summary_dict(result: ExperimentResult) -> dict:
    sweeps = result.trace.sweep_end_events()
    return {
        "problem": {
            "kind": result.problem.kind,
            "d": result.problem.d,
            "n": result.problem.n,
            "scaled": result.problem.scaled,
            "rhs": result.problem.rhs,
        },
        "config": {
            "method": result.config.method,
            "kick_rank": result.config.kick_rank,
            "truncation_tol": result.config.truncation_tol,
            "residual_tol": result.config.residual_tol,
            "max_sweeps": result.config.max_sweeps,
            "rank_cap": result.config.rank_cap,
            "stop_tol": result.config.stop_tol,
            "seed": result.config.seed,
        },
        "sweeps": len(sweeps),
        "final_ranks": list(result.final_ranks),
        "final_residual": result.final_residual,
        "rel_residual": result.rel_residual,
        "converged": result.converged,
        "oracle_error": result.oracle_error,
        "oracle_rel_error": result.oracle_rel_error,
        "final_J": sweeps[-1].J if sweeps else None,
        "t_wall_s": sweeps[-1].t_wall_s if sweeps else None,
    }
