"""Solver family for SPD systems in TT format.

Implements the reference dense steepest descent, one-core ALS sweeps,
two-core DMRG sweeps with rank adaptation, the enriched descent steps
(greedy and non-greedy), the subspace descent step over the leading-frame
basis, and the interleaved enrichment sweep, plus a driver that composes
them with residual approximation and rank truncation between iterations.

All sweeps keep the energy (x, Ax) - 2 (x, y) non-increasing per microstep
before any truncation; truncations may raise it within their budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dense import InputError, extreme_eigenvalues, solve_spd
from .frames import EnvironmentCache, LocalSystem, local_system, local_system_two_block
from .tt import (
    TtMatrix,
    TtVector,
    _left_orth_step,
    _right_orth_step,
    orthogonalize,
    mat_to_dense,
    to_dense,
    tt_add,
    tt_dot,
    tt_from_dense,
    tt_matvec,
    tt_norm,
    tt_random,
    tt_round,
    tt_scale,
    tt_zero,
)
from .trace import ConvergenceTrace, TraceEvent

METHODS = ("als", "dmrg", "greedy_sd", "nongreedy_sd", "sd2", "amen", "dense_sd")

#: local systems at or below this size are assembled and eliminated directly;
#: larger ones use warm-started conjugate gradients
DENSE_SOLVE_LIMIT = 800

CG_MAX_ITER = 200


@dataclass(frozen=True)
class SolverConfig:
    method: str = "nongreedy_sd"
    kick_rank: int = 5
    truncation_tol: float = 1e-4
    residual_tol: float | None = None
    max_sweeps: int = 20
    rank_cap: int | None = None
    stop_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.kick_rank < 0:
            raise InputError("kick_rank must be >= 0")
        if not (0 < self.truncation_tol <= 1):
            raise InputError("truncation_tol must be in (0, 1]")
        if self.residual_tol is not None and not (0 < self.residual_tol <= 1):
            raise InputError("residual_tol must be in (0, 1]")
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be >= 1")
        if not (0 < self.stop_tol <= 1):
            raise InputError("stop_tol must be in (0, 1]")

    @property
    def effective_residual_tol(self) -> float:
        return self.residual_tol if self.residual_tol is not None else self.truncation_tol


@dataclass
class StepReport:
    """Diagnostics of a single descent step."""

    alpha: float
    eps: float = 0.0
    bound: float | None = None
    omega: float | None = None
    converged: bool = False


# ---------------------------------------------------------------------------
# energies and residuals


def energy(A: TtMatrix, y: TtVector, x: TtVector) -> float:
    """Energy (x, Ax) - 2 (x, y), i.e. the A-norm error squared up to a constant."""
    return tt_dot(x, tt_matvec(A, x)) - 2.0 * tt_dot(x, y)


def exact_residual(A: TtMatrix, y: TtVector, x: TtVector) -> TtVector:
    """Exact TT residual y - A x (ranks r_y + R r_x)."""
    return tt_add(y, tt_scale(tt_matvec(A, x), -1.0))


def residual_norm(A: TtMatrix, y: TtVector, x: TtVector) -> float:
    ax = tt_matvec(A, x)
    val = tt_dot(y, y) - 2.0 * tt_dot(ax, y) + tt_dot(ax, ax)
    return math.sqrt(max(val, 0.0))


def approximate_residual(
    A: TtMatrix, y: TtVector, t: TtVector, kick_rank: int, res_tol: float
):
    """Rounded residual z~ of y - A t, truncated to rank `kick_rank` or
    tolerance `res_tol`, whichever binds first.

    Returns (z~, eps) with eps = ||z - z~|| / ||z~||; the TT-SVD construction
    makes the discarded part l2-orthogonal to z~.
    """
    z = exact_residual(A, y, t)
    z2 = tt_dot(z, z)
    zt = tt_round(z, res_tol, max_rank=max(kick_rank, 1))
    zt2 = tt_dot(zt, zt)
    if zt2 == 0.0:
        return zt, 0.0
    eps = math.sqrt(max(z2 - zt2, 0.0) / zt2)
    return zt, eps


# ---------------------------------------------------------------------------
# dense reference steepest descent


def dense_sd_step(A: np.ndarray, y: np.ndarray, t: np.ndarray, x_exact=None):
    """One exact steepest-descent step x = t + z (z,z)/(z,Az) on a dense SPD system."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    t = np.asarray(t, dtype=float).reshape(-1)
    z = y - A @ t
    spec = extreme_eigenvalues(A)
    bound = (spec.lambda_max - spec.lambda_min) / (spec.lambda_max + spec.lambda_min)
    zn = z @ z
    if zn == 0.0:
        return t.copy(), StepReport(alpha=0.0, bound=bound, converged=True)
    alpha = zn / (z @ (A @ z))
    x = t + alpha * z
    omega = None
    if x_exact is not None:
        x_exact = np.asarray(x_exact, dtype=float).reshape(-1)
        before = (x_exact - t) @ (A @ (x_exact - t))
        after = (x_exact - x) @ (A @ (x_exact - x))
        if before > 0:
            omega = math.sqrt(max(after, 0.0) / before)
    return x, StepReport(alpha=float(alpha), bound=bound, omega=omega)


# ---------------------------------------------------------------------------
# local solves


def _cg(apply, b, x0, rel_tol, max_iter):
    """Conjugate gradients on an SPD operator, warm-started at x0.

    CG is monotone in the energy norm, so the local energy never increases
    relative to the warm start.
    """
    x = np.array(x0, dtype=float)
    r = b - apply(x)
    p = r.copy()
    rs = float(r @ r)
    bnorm = max(float(np.linalg.norm(b)), 1e-300)
    for _ in range(max_iter):
        if math.sqrt(rs) <= rel_tol * bnorm:
            break
        Ap = apply(p)
        pAp = float(p @ Ap)
        if not math.isfinite(pAp) or pAp <= 0.0:
            break
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def _solve_local(system: LocalSystem, rhs, warm, cg_tol, dense_limit=None):
    dense_limit = DENSE_SOLVE_LIMIT if dense_limit is None else dense_limit
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if system.size <= dense_limit:
        B = system.matrix()
        return solve_spd(0.5 * (B + B.T), rhs)
    return _cg(system.apply, rhs, np.asarray(warm, dtype=float).reshape(-1), cg_tol, CG_MAX_ITER)


def _guarded_update(system: LocalSystem, u_old, u_new):
    """Return the better of old and new core in local energy, with its energy."""
    q_old = system.quad(u_old)
    q_new = system.quad(u_new)
    if q_new <= q_old:
        return u_new, q_new
    return u_old, q_old


def _event(sweep, micro, k, J, cores, t0, phase):
    ranks = [1] + [c.shape[2] for c in cores]
    return TraceEvent(
        sweep=sweep,
        microstep=micro,
        k=k,
        J=J,
        res_l2=None,
        ranks=ranks,
        t_wall_s=time.monotonic() - t0,
        phase=phase,
    )


# ---------------------------------------------------------------------------
# sweeps


def als_sweep(A, y, x, direction="forward", cg_tol=1e-10, sweep_index=0, energy_offset=0.0):
    """One ALS cycle over the cores at fixed ranks.

    The energy is non-increasing across microsteps.  `energy_offset` shifts
    the recorded J values (used when the swept vector is a correction on top
    of a frozen term).
    """
    d = x.ndim
    t0 = time.monotonic()
    order = range(d) if direction == "forward" else range(d - 1, -1, -1)
    pivot = 0 if direction == "forward" else d - 1
    x = orthogonalize(x, pivot)
    cores = list(x.cores)
    env = EnvironmentCache(A, y, cores)
    events = []
    for micro, k in enumerate(order):
        sys = local_system(env, k)
        u0 = cores[k].reshape(-1)
        u = _solve_local(sys, sys.rhs, u0, cg_tol)
        u, q = _guarded_update(sys, u0, u)
        cores[k] = u.reshape(sys.dims)
        env.set_core(k, cores[k])
        events.append(_event(sweep_index, micro, k, energy_offset + q, cores, t0, "solve"))
        if direction == "forward" and k < d - 1:
            _left_orth_step(cores, k)
            env.set_core(k, cores[k])
            env.set_core(k + 1, cores[k + 1])
        elif direction == "backward" and k > 0:
            _right_orth_step(cores, k)
            env.set_core(k, cores[k])
            env.set_core(k - 1, cores[k - 1])
    return TtVector(cores=tuple(cores)), events


def dmrg_sweep(
    A, y, x, trunc_tol, rank_cap=None, direction="forward", cg_tol=1e-10, sweep_index=0
):
    """One DMRG cycle: optimize each superblock and split it by SVD, adapting
    the bond rank to the local tolerance."""
    from .dense import truncated_svd

    d = x.ndim
    t0 = time.monotonic()
    if d == 1:
        return als_sweep(A, y, x, direction, cg_tol, sweep_index)
    pairs = range(d - 1) if direction == "forward" else range(d - 2, -1, -1)
    pivot = 0 if direction == "forward" else d - 1
    x = orthogonalize(x, pivot)
    cores = list(x.cores)
    env = EnvironmentCache(A, y, cores)
    events = []
    micro = 0
    for k in pairs:
        sys = local_system_two_block(env, k)
        w0 = np.einsum("aib,bjc->aijc", cores[k], cores[k + 1], optimize=True)
        w = _solve_local(sys, sys.rhs, w0.reshape(-1), cg_tol)
        w, q = _guarded_update(sys, w0.reshape(-1), w)
        events.append(_event(sweep_index, micro, k, q, cores, t0, "solve"))
        micro += 1
        rl, n1, n2, rr = sys.dims
        M = w.reshape(rl * n1, n2 * rr)
        abs_tol = trunc_tol * np.linalg.norm(M)
        U, s, V, rank = truncated_svd(M, abs_tol=abs_tol, max_rank=rank_cap)
        if direction == "forward":
            cores[k] = U.reshape(rl, n1, rank)
            cores[k + 1] = (s[:, None] * V.T).reshape(rank, n2, rr)
        else:
            cores[k] = (U * s).reshape(rl, n1, rank)
            cores[k + 1] = V.T.reshape(rank, n2, rr)
        w_trunc = np.einsum("aib,bjc->aijc", cores[k], cores[k + 1], optimize=True)
        q_trunc = sys.quad(w_trunc.reshape(-1))
        env.set_core(k, cores[k])
        env.set_core(k + 1, cores[k + 1])
        events.append(_event(sweep_index, micro, k, q_trunc, cores, t0, "truncate"))
        micro += 1
    return TtVector(cores=tuple(cores)), events


def greedy_step(A, y, t, z, cg_tol=1e-10, sweep_index=0):
    """Enriched descent, greedy form: optimize the correction v (initialized
    at the rounded residual) by a backward ALS cycle and return t + v.

    Each local problem minimizes J(t + frame * v_k), i.e. solves
    (frame^T A frame) v_k = frame^T (y - A t).
    """
    z_exact = exact_residual(A, y, t)
    J_t = energy(A, y, t)
    v, events = als_sweep(
        A,
        z_exact,
        z,
        direction="backward",
        cg_tol=cg_tol,
        sweep_index=sweep_index,
        energy_offset=J_t,
    )
    return tt_add(t, v), events


def nongreedy_step(A, y, t, z, cg_tol=1e-10, sweep_index=0):
    """Enriched descent, non-greedy form: set x = t + z in block form, then
    run a backward ALS cycle over the full cores."""
    x0 = tt_add(t, z)
    return als_sweep(A, y, x0, direction="backward", cg_tol=cg_tol, sweep_index=sweep_index)


def sd2_step(A, y, t, z, cg_tol=1e-10, sweep_index=0):
    """Subspace descent over the leading frame of the rounded residual.

    With Z the orthogonalized frame Z^{<=d-1} (x) I built from z, solves the
    reduced system (Z^T A Z) v = Z^T z for the last-mode block and returns
    t + Z v.
    """
    d = z.ndim
    t0 = time.monotonic()
    zo = orthogonalize(z, d - 1)
    env = EnvironmentCache(A, y, list(zo.cores))
    sys = local_system(env, d - 1)
    # reduced right-hand side Z^T z~: the last core of the orthogonalized z~
    rhs = zo.cores[d - 1].reshape(-1)
    v = _solve_local(sys, rhs, rhs, cg_tol)
    step_cores = list(zo.cores)
    step_cores[d - 1] = v.reshape(sys.dims)
    x = tt_add(t, TtVector(cores=tuple(step_cores)))
    J = energy(A, y, x)
    cores = list(x.cores)
    events = [_event(sweep_index, 0, d - 1, J, cores, t0, "solve")]
    return x, events


def amen_sweep(
    A,
    y,
    x,
    z,
    trunc_tol,
    kick_rank,
    rank_cap=None,
    direction="forward",
    cg_tol=1e-10,
    sweep_index=0,
):
    """ALS cycle interleaved with residual-based basis enrichment.

    Per core (forward): solve the local system, truncate the outgoing bond to
    the local budget, append the frame-projected cores of the rounded
    residual z as extra basis columns (zero-padding the next core so the
    represented vector is unchanged), re-orthogonalize, and move on.  With
    kick_rank = 0 this degenerates to a plain ALS sweep.
    """
    from .dense import truncated_svd

    if kick_rank == 0:
        return als_sweep(A, y, x, direction, cg_tol, sweep_index)
    d = x.ndim
    t0 = time.monotonic()
    pivot = 0 if direction == "forward" else d - 1
    x = orthogonalize(x, pivot)
    cores = list(x.cores)
    env = EnvironmentCache(A, y, cores)
    events = []
    micro = 0

    if direction == "forward":
        mix = np.ones((1, 1))  # projection of z's left interface onto x's
        for k in range(d):
            sys = local_system(env, k)
            u0 = cores[k].reshape(-1)
            u = _solve_local(sys, sys.rhs, u0, cg_tol)
            u, q = _guarded_update(sys, u0, u)
            cores[k] = u.reshape(sys.dims)
            events.append(_event(sweep_index, micro, k, q, cores, t0, "solve"))
            micro += 1
            if k == d - 1:
                env.set_core(k, cores[k])
                break
            rl, n, rr = cores[k].shape
            # truncate the outgoing bond within the local budget
            M = cores[k].reshape(rl * n, rr)
            abs_tol = trunc_tol * np.linalg.norm(M) / math.sqrt(max(d - 1, 1))
            U, s, V, rank = truncated_svd(M, abs_tol=abs_tol, max_rank=rank_cap)
            # energy after truncation, through the still-valid frame at k
            q_trunc = sys.quad(((U * s) @ V.T).reshape(-1))
            cores[k] = U.reshape(rl, n, rank)
            carry = (s[:, None] * V.T)
            cores[k + 1] = np.tensordot(carry, cores[k + 1], axes=(1, 0))
            env.set_core(k, cores[k])
            env.set_core(k + 1, cores[k + 1])
            events.append(_event(sweep_index, micro, k, q_trunc, cores, t0, "truncate"))
            micro += 1
            # enrichment: residual core in the current left frame
            S = np.einsum("ac,cib->aib", mix, z.cores[k], optimize=True)
            cores[k] = np.concatenate([cores[k], S], axis=2)
            pad = np.zeros((S.shape[2], cores[k + 1].shape[1], cores[k + 1].shape[2]))
            cores[k + 1] = np.concatenate([cores[k + 1], pad], axis=0)
            _left_orth_step(cores, k)
            env.set_core(k, cores[k])
            env.set_core(k + 1, cores[k + 1])
            events.append(_event(sweep_index, micro, k, q_trunc, cores, t0, "enrich"))
            micro += 1
            mix = np.einsum("aib,ac,cid->bd", cores[k], mix, z.cores[k], optimize=True)
    else:
        mix = np.ones((1, 1))  # projection of z's right interface onto x's
        for k in range(d - 1, -1, -1):
            sys = local_system(env, k)
            u0 = cores[k].reshape(-1)
            u = _solve_local(sys, sys.rhs, u0, cg_tol)
            u, q = _guarded_update(sys, u0, u)
            cores[k] = u.reshape(sys.dims)
            events.append(_event(sweep_index, micro, k, q, cores, t0, "solve"))
            micro += 1
            if k == 0:
                env.set_core(k, cores[k])
                break
            rl, n, rr = cores[k].shape
            M = cores[k].reshape(rl, n * rr)
            abs_tol = trunc_tol * np.linalg.norm(M) / math.sqrt(max(d - 1, 1))
            U, s, V, rank = truncated_svd(M, abs_tol=abs_tol, max_rank=rank_cap)
            q_trunc = sys.quad(((U * s) @ V.T).reshape(-1))
            cores[k] = V.T.reshape(rank, n, rr)
            carry = U * s
            cores[k - 1] = np.tensordot(cores[k - 1], carry, axes=(2, 0))
            env.set_core(k, cores[k])
            env.set_core(k - 1, cores[k - 1])
            events.append(_event(sweep_index, micro, k, q_trunc, cores, t0, "truncate"))
            micro += 1
            S = np.einsum("cid,ad->cia", z.cores[k], mix, optimize=True)
            cores[k] = np.concatenate([cores[k], S], axis=0)
            pad = np.zeros((cores[k - 1].shape[0], cores[k - 1].shape[1], S.shape[0]))
            cores[k - 1] = np.concatenate([cores[k - 1], pad], axis=2)
            _right_orth_step(cores, k)
            env.set_core(k, cores[k])
            env.set_core(k - 1, cores[k - 1])
            events.append(_event(sweep_index, micro, k, q_trunc, cores, t0, "enrich"))
            micro += 1
            mix = np.einsum("bia,cid,ad->bc", cores[k], z.cores[k], mix, optimize=True)
    return TtVector(cores=tuple(cores)), events


# ---------------------------------------------------------------------------
# driver


def _fill_residuals(events, last_res):
    for e in events:
        if e.res_l2 is None:
            e.res_l2 = last_res


def solve(A: TtMatrix, y: TtVector, config: SolverConfig, x_exact=None):
    """Iterate the configured method until the relative residual reaches
    stop_tol, the energy stagnates at the truncation level, or max_sweeps.

    `x_exact`, when given, is the dense exact solution (desk scale only);
    it enables A-norm errors and per-sweep rates in the trace.
    Non-convergence is a normal outcome reported in the trace.
    """
    cfg = config
    oracle = None
    if x_exact is not None:
        oracle = (mat_to_dense(A), np.asarray(x_exact, dtype=float).reshape(-1))
    d = A.ndim
    modes = A.col_mode_sizes
    trace = ConvergenceTrace()
    t0 = time.monotonic()
    norm_y = tt_norm(y)
    if norm_y == 0.0:
        x = tt_zero(modes)
        trace.append(
            TraceEvent(
                sweep=1, microstep=0, k=0, J=0.0, res_l2=0.0,
                ranks=list(x.ranks), t_wall_s=time.monotonic() - t0, phase="sweep_end",
            )
        )
        return x, trace

    if cfg.method == "dense_sd":
        return _solve_dense_sd(A, y, cfg, oracle, trace, t0)

    rng = np.random.default_rng(cfg.seed)
    r0 = max(1, cfg.kick_rank)
    x = orthogonalize(tt_random(modes, min(r0, max(modes)), rng), 0)
    cg_tol = max(1e-2 * cfg.truncation_tol, 1e-13)
    A_dense = x_star = err_prev = None
    if oracle is not None:
        A_dense, x_star = oracle

    J_prev = math.inf
    stagnant = 0
    last_res = residual_norm(A, y, x)
    for sweep in range(1, cfg.max_sweeps + 1):
        direction = "backward" if sweep % 2 == 1 else "forward"
        cap = cfg.rank_cap
        if cap is None:
            cap_sweep = max(x.ranks) + 4 * max(cfg.kick_rank, 1)
        else:
            cap_sweep = cap
        if cfg.method == "als":
            x, events = als_sweep(A, y, x, direction, cg_tol, sweep)
        elif cfg.method == "dmrg":
            x, events = dmrg_sweep(A, y, x, cfg.truncation_tol, cap_sweep, direction, cg_tol, sweep)
        elif cfg.method in ("greedy_sd", "nongreedy_sd", "sd2", "amen"):
            z, _eps = approximate_residual(
                A, y, x, cfg.kick_rank, cfg.effective_residual_tol
            )
            if cfg.method == "greedy_sd":
                x, events = greedy_step(A, y, x, z, cg_tol, sweep)
            elif cfg.method == "nongreedy_sd":
                x, events = nongreedy_step(A, y, x, z, cg_tol, sweep)
            elif cfg.method == "sd2":
                x, events = sd2_step(A, y, x, z, cg_tol, sweep)
            else:
                x, events = amen_sweep(
                    A, y, x, z, cfg.truncation_tol, cfg.kick_rank,
                    cap_sweep, "forward", cg_tol, sweep,
                )
            if cfg.method != "amen":
                # amen truncates inside the sweep; rounding here would strip
                # the small-amplitude enrichment directions it just added
                x = tt_round(x, cfg.truncation_tol, max_rank=cap_sweep)
        else:  # pragma: no cover
            raise InputError(f"unhandled method {cfg.method}")
        _fill_residuals(events, last_res)
        trace.extend(events)

        last_res = residual_norm(A, y, x)
        J = energy(A, y, x)
        err_A = omega = None
        if oracle is not None:
            e = to_dense(x) - x_star
            err_A = math.sqrt(max(float(e @ (A_dense @ e)), 0.0))
            if err_prev is not None and err_prev > 0:
                omega = err_A / err_prev
            err_prev = err_A
        trace.append(
            TraceEvent(
                sweep=sweep, microstep=len(events), k=-1, J=J, res_l2=last_res,
                ranks=list(x.ranks), t_wall_s=time.monotonic() - t0,
                phase="sweep_end", err_A=err_A, omega=omega,
            )
        )
        if last_res <= cfg.stop_tol * norm_y:
            break
        if abs(J_prev - J) <= cfg.truncation_tol**2 * max(abs(J), 1e-300):
            stagnant += 1
            if stagnant >= 2:
                break
        else:
            stagnant = 0
        J_prev = J
    return x, trace


def _solve_dense_sd(A, y, cfg, oracle, trace, t0):
    """Vectorized steepest descent at desk scale, wrapped back into TT."""
    A_dense = mat_to_dense(A) if oracle is None else oracle[0]
    y_dense = to_dense(y)
    x = np.zeros_like(y_dense)
    norm_y = np.linalg.norm(y_dense)
    err_prev = None
    for sweep in range(1, cfg.max_sweeps + 1):
        x, report = dense_sd_step(A_dense, y_dense, x)
        res = float(np.linalg.norm(y_dense - A_dense @ x))
        J = float(x @ (A_dense @ x) - 2.0 * x @ y_dense)
        err_A = omega = None
        if oracle is not None:
            e = x - oracle[1]
            err_A = math.sqrt(max(float(e @ (A_dense @ e)), 0.0))
            if err_prev is not None and err_prev > 0:
                omega = err_A / err_prev
            err_prev = err_A
        trace.append(
            TraceEvent(
                sweep=sweep, microstep=0, k=-1, J=J, res_l2=res,
                ranks=[1] * (y.ndim + 1), t_wall_s=time.monotonic() - t0,
                phase="sweep_end", err_A=err_A, omega=omega,
            )
        )
        if report.converged or res <= cfg.stop_tol * norm_y:
            break
    x_tt = tt_from_dense(x, y.mode_sizes, rel_tol=cfg.truncation_tol)
    return x_tt, trace
