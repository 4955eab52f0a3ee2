"""Tensor-train vectors and operators.

A TT vector stores d cores of shape (r_left, n_k, r_right) with boundary
ranks r_0 = r_d = 1.  All arrays are row-major; a dense tensor is flattened
in C order, so the multi-index (i_1 .. i_d) has i_1 slowest.  vec(core)
likewise enumerates (r_left, n, r_right) with r_left slowest, which keeps
every reshape in the sweep algorithms a zero-copy view.

Vectors and operators are immutable after construction: every operation
returns a new value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dense import InputError, qr_factor, truncated_svd

#: largest tensor that to_dense / interfaces will materialize by default
DENSE_CAP = 2**20


@dataclass(frozen=True)
class OrthoState:
    """Per-core orthogonality tags ('left' | 'right' | 'none') with optional pivot."""

    tags: tuple[str, ...]
    pivot: int | None = None

    @staticmethod
    def none(d: int) -> "OrthoState":
        return OrthoState(tags=("none",) * d, pivot=None)

    @staticmethod
    def at_pivot(d: int, k: int) -> "OrthoState":
        tags = tuple(
            "left" if j < k else ("right" if j > k else "none") for j in range(d)
        )
        return OrthoState(tags=tags, pivot=k)


def _check_core_chain(cores, name, core_ndim):
    if len(cores) == 0:
        raise InputError(f"{name} needs at least one core")
    for k, c in enumerate(cores):
        if c.ndim != core_ndim:
            raise InputError(f"{name} core {k} has ndim {c.ndim}, expected {core_ndim}")
        if not np.all(np.isfinite(c)):
            raise InputError(f"{name} core {k} has non-finite entries")
    if cores[0].shape[0] != 1 or cores[-1].shape[-1] != 1:
        raise InputError(f"{name} boundary ranks must be 1")
    for k in range(len(cores) - 1):
        if cores[k].shape[-1] != cores[k + 1].shape[0]:
            raise InputError(
                f"{name} rank mismatch between cores {k} and {k + 1}: "
                f"{cores[k].shape[-1]} vs {cores[k + 1].shape[0]}"
            )


@dataclass(frozen=True)
class TtVector:
    """A d-dimensional tensor in TT format: cores of shape (r_{k-1}, n_k, r_k)."""

    cores: tuple[np.ndarray, ...]
    ortho: OrthoState = field(default=None)

    def __post_init__(self):
        cores = tuple(np.ascontiguousarray(c, dtype=float) for c in self.cores)
        _check_core_chain(cores, "TtVector", 3)
        object.__setattr__(self, "cores", cores)
        if self.ortho is None:
            object.__setattr__(self, "ortho", OrthoState.none(len(cores)))

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def size(self) -> int:
        return int(np.prod(self.mode_sizes, dtype=object))


@dataclass(frozen=True)
class TtMatrix:
    """A TT-format operator: cores of shape (R_{k-1}, n_k, n_k, R_k).

    Symmetry is not structural; use :func:`assert_symmetric` for desk-scale
    validation.
    """

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(np.ascontiguousarray(c, dtype=float) for c in self.cores)
        _check_core_chain(cores, "TtMatrix", 4)
        object.__setattr__(self, "cores", cores)

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def row_mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def col_mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[3] for c in self.cores)

    @property
    def size(self) -> int:
        return int(np.prod(self.row_mode_sizes, dtype=object))


# ---------------------------------------------------------------------------
# evaluation and densification


def evaluate(x: TtVector, index) -> float:
    """Entry x(i_1, .., i_d) by left-to-right contraction of core slices."""
    if len(index) != x.ndim:
        raise InputError(f"index has length {len(index)}, expected {x.ndim}")
    v = np.ones((1,))
    for k, (i, c) in enumerate(zip(index, x.cores)):
        if not (0 <= i < c.shape[1]):
            raise InputError(f"index {i} out of range for mode {k} (size {c.shape[1]})")
        v = v @ c[:, i, :]
    return float(v[0])


def _check_cap(total: int, cap: int | None):
    cap = DENSE_CAP if cap is None else cap
    if total > cap:
        raise InputError(f"dense size {total} exceeds cap {cap}")


def to_dense(x: TtVector, cap: int | None = None) -> np.ndarray:
    """Full vector of length n_1 * .. * n_d (C order, i_1 slowest)."""
    _check_cap(x.size, cap)
    res = x.cores[0].reshape(x.cores[0].shape[1], -1)
    for c in x.cores[1:]:
        res = res @ c.reshape(c.shape[0], -1)
        res = res.reshape(-1, c.shape[2])
    return res.reshape(-1)


def mat_to_dense(A: TtMatrix, cap: int | None = None) -> np.ndarray:
    """Full (N x N) matrix with row and column multi-indices in C order."""
    _check_cap(A.size * A.size, cap)
    res = A.cores[0][0]  # (n, n, R)
    nrow, ncol = res.shape[0], res.shape[1]
    for c in A.cores[1:]:
        res = np.einsum("IJa,aijb->IiJjb", res, c, optimize=True)
        nrow *= c.shape[1]
        ncol *= c.shape[2]
        res = res.reshape(nrow, ncol, c.shape[3])
    return res[:, :, 0]


def assert_symmetric(A: TtMatrix, tol: float = 1e-10, cap: int | None = None):
    """Desk-scale symmetry check by densification."""
    M = mat_to_dense(A, cap=cap)
    dev = np.linalg.norm(M - M.T)
    if dev > tol * max(np.linalg.norm(M), 1.0):
        raise InputError(f"operator is not symmetric: deviation {dev:.3e}")


def interfaces(x: TtVector, k: int, cap: int | None = None):
    """Interface matrices (X^{<=k}, X^{>k}) after k cores, k in 0..d.

    X^{<=k} has shape (n_1..n_k, r_k) and X^{>k} has shape (r_k, n_{k+1}..n_d);
    their product is the k-th unfolding of the dense tensor.
    """
    if not (0 <= k <= x.ndim):
        raise InputError(f"interface position {k} out of range 0..{x.ndim}")
    left_n = int(np.prod(x.mode_sizes[:k], dtype=object))
    right_n = int(np.prod(x.mode_sizes[k:], dtype=object))
    rk = x.ranks[k]
    _check_cap(max(left_n * rk, rk * right_n), cap)
    left = np.ones((1, 1))
    for c in x.cores[:k]:
        left = (left @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
    right = np.ones((1, 1))
    for c in reversed(x.cores[k:]):
        right = (c.reshape(-1, c.shape[2]) @ right).reshape(c.shape[0], -1)
    return left, right


# ---------------------------------------------------------------------------
# algebra


def tt_add(x: TtVector, y: TtVector) -> TtVector:
    """TT sum with block-structured cores; ranks add on interior bonds."""
    if x.mode_sizes != y.mode_sizes:
        raise InputError(f"mode mismatch: {x.mode_sizes} vs {y.mode_sizes}")
    d = x.ndim
    if d == 1:
        return TtVector(cores=(x.cores[0] + y.cores[0],))
    cores = []
    cores.append(np.concatenate([x.cores[0], y.cores[0]], axis=2))
    for k in range(1, d - 1):
        xc, yc = x.cores[k], y.cores[k]
        rl = xc.shape[0] + yc.shape[0]
        rr = xc.shape[2] + yc.shape[2]
        c = np.zeros((rl, xc.shape[1], rr))
        c[: xc.shape[0], :, : xc.shape[2]] = xc
        c[xc.shape[0] :, :, xc.shape[2] :] = yc
        cores.append(c)
    cores.append(np.concatenate([x.cores[-1], y.cores[-1]], axis=0))
    return TtVector(cores=tuple(cores))


def tt_scale(x: TtVector, a: float) -> TtVector:
    """Multiply by a scalar (applied to the first core)."""
    cores = (x.cores[0] * float(a),) + x.cores[1:]
    return TtVector(cores=cores)


def tt_matvec(A: TtMatrix, x: TtVector) -> TtVector:
    """Matrix-vector product in TT format; result ranks are R_k * r_k."""
    if A.col_mode_sizes != x.mode_sizes:
        raise InputError(
            f"mode mismatch: A columns {A.col_mode_sizes} vs x {x.mode_sizes}"
        )
    cores = []
    for Ac, xc in zip(A.cores, x.cores):
        c = np.einsum("aijb,cjd->acibd", Ac, xc, optimize=True)
        cores.append(
            c.reshape(Ac.shape[0] * xc.shape[0], Ac.shape[1], Ac.shape[3] * xc.shape[2])
        )
    return TtVector(cores=tuple(cores))


def tt_matmat(A: TtMatrix, B: TtMatrix) -> TtMatrix:
    """Operator product A @ B in TT format; ranks multiply."""
    if A.col_mode_sizes != B.row_mode_sizes:
        raise InputError("mode mismatch in operator product")
    cores = []
    for Ac, Bc in zip(A.cores, B.cores):
        c = np.einsum("aijb,cjkd->acikbd", Ac, Bc, optimize=True)
        cores.append(
            c.reshape(
                Ac.shape[0] * Bc.shape[0],
                Ac.shape[1],
                Bc.shape[2],
                Ac.shape[3] * Bc.shape[3],
            )
        )
    return TtMatrix(cores=tuple(cores))


def tt_mat_add(A: TtMatrix, B: TtMatrix) -> TtMatrix:
    """Operator sum with block-structured cores."""
    if A.row_mode_sizes != B.row_mode_sizes or A.col_mode_sizes != B.col_mode_sizes:
        raise InputError("mode mismatch in operator sum")
    d = A.ndim
    if d == 1:
        return TtMatrix(cores=(A.cores[0] + B.cores[0],))
    cores = [np.concatenate([A.cores[0], B.cores[0]], axis=3)]
    for k in range(1, d - 1):
        ac, bc = A.cores[k], B.cores[k]
        c = np.zeros(
            (ac.shape[0] + bc.shape[0], ac.shape[1], ac.shape[2], ac.shape[3] + bc.shape[3])
        )
        c[: ac.shape[0], :, :, : ac.shape[3]] = ac
        c[ac.shape[0] :, :, :, ac.shape[3] :] = bc
        cores.append(c)
    cores.append(np.concatenate([A.cores[-1], B.cores[-1]], axis=0))
    return TtMatrix(cores=tuple(cores))


def tt_transpose(A: TtMatrix) -> TtMatrix:
    return TtMatrix(cores=tuple(np.swapaxes(c, 1, 2) for c in A.cores))


def tt_dot(x: TtVector, y: TtVector) -> float:
    """l2 scalar product by left-to-right contraction (no densification)."""
    if x.mode_sizes != y.mode_sizes:
        raise InputError(f"mode mismatch: {x.mode_sizes} vs {y.mode_sizes}")
    env = np.ones((1, 1))
    for xc, yc in zip(x.cores, y.cores):
        t = np.tensordot(env, xc, axes=(0, 0))  # (ry, n, rx2)
        env = np.tensordot(t, yc, axes=([0, 1], [0, 1]))  # (rx2, ry2)
    return float(env[0, 0])


def tt_norm(x: TtVector) -> float:
    return math.sqrt(max(tt_dot(x, x), 0.0))


# ---------------------------------------------------------------------------
# orthogonalization and rounding


def _left_orth_step(cores, k):
    """QR of core k; push the triangular factor into core k+1."""
    c = cores[k]
    rl, n, rr = c.shape
    Q, R = qr_factor(c.reshape(rl * n, rr))
    cores[k] = Q.reshape(rl, n, -1)
    cores[k + 1] = np.tensordot(R, cores[k + 1], axes=(1, 0))


def _right_orth_step(cores, k):
    """LQ of core k; push the triangular factor into core k-1."""
    c = cores[k]
    rl, n, rr = c.shape
    Q, R = qr_factor(c.reshape(rl, n * rr).T)
    cores[k] = Q.T.reshape(-1, n, rr)
    cores[k - 1] = np.tensordot(cores[k - 1], R.T, axes=(2, 0))


def orthogonalize(x: TtVector, pivot: int) -> TtVector:
    """Gauge-transform so cores left of `pivot` are left-orthogonal and cores
    right of it are right-orthogonal; the dense value is unchanged.

    `pivot` is a 0-based core index.  After the call the l2 norm of the whole
    tensor equals the Frobenius norm of the pivot core.
    """
    d = x.ndim
    if not (0 <= pivot < d):
        raise InputError(f"pivot {pivot} out of range 0..{d - 1}")
    cores = [c.copy() for c in x.cores]
    for k in range(pivot):
        _left_orth_step(cores, k)
    for k in range(d - 1, pivot, -1):
        _right_orth_step(cores, k)
    return TtVector(cores=tuple(cores), ortho=OrthoState.at_pivot(d, pivot))


def tt_round(x: TtVector, rel_tol: float, max_rank: int | None = None) -> TtVector:
    """SVD rank truncation with ||x - x~|| <= rel_tol * ||x|| (l2).

    Left-orthogonalizes to the last core, then sweeps right-to-left
    truncating each unfolding at the budget rel_tol * ||x|| / sqrt(d-1); the
    per-step discarded part is l2-orthogonal to the kept part.
    """
    if rel_tol < 0:
        raise InputError("rel_tol must be >= 0")
    d = x.ndim
    if d == 1:
        return TtVector(cores=tuple(c.copy() for c in x.cores))
    x = orthogonalize(x, d - 1)
    cores = list(x.cores)
    norm = np.linalg.norm(cores[-1])
    if norm == 0.0:
        return tt_zero(x.mode_sizes)
    budget = rel_tol * norm / math.sqrt(d - 1)
    for k in range(d - 1, 0, -1):
        c = cores[k]
        rl, n, rr = c.shape
        U, s, V, rank = truncated_svd(c.reshape(rl, n * rr), abs_tol=budget, max_rank=max_rank)
        cores[k] = V.T.reshape(rank, n, rr)
        cores[k - 1] = np.tensordot(cores[k - 1], U * s, axes=(2, 0))
    return TtVector(cores=tuple(cores), ortho=OrthoState.at_pivot(d, 0))


def tt_from_dense(
    v: np.ndarray,
    mode_sizes,
    rel_tol: float = 0.0,
    max_rank: int | None = None,
) -> TtVector:
    """TT-SVD decomposition of a dense vector (C-order multi-index)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    mode_sizes = tuple(int(n) for n in mode_sizes)
    if v.size != int(np.prod(mode_sizes, dtype=object)):
        raise InputError("dense length does not match mode sizes")
    d = len(mode_sizes)
    norm = np.linalg.norm(v)
    budget = 0.0 if d == 1 else rel_tol * norm / math.sqrt(d - 1)
    cores = []
    rest = v.reshape(1, -1)
    for k, n in enumerate(mode_sizes[:-1]):
        rl = rest.shape[0]
        M = rest.reshape(rl * n, -1)
        U, s, V, rank = truncated_svd(M, abs_tol=budget, max_rank=max_rank)
        cores.append(U.reshape(rl, n, rank))
        rest = (s[:, None] * V.T)
    cores.append(rest.reshape(rest.shape[0], mode_sizes[-1], 1))
    return TtVector(cores=tuple(cores), ortho=OrthoState.at_pivot(d, d - 1))


# ---------------------------------------------------------------------------
# constructors


def tt_zero(mode_sizes) -> TtVector:
    """All-zero tensor, represented with all ranks 1."""
    return TtVector(cores=tuple(np.zeros((1, int(n), 1)) for n in mode_sizes))


def tt_ones(mode_sizes) -> TtVector:
    return TtVector(cores=tuple(np.ones((1, int(n), 1)) for n in mode_sizes))


def tt_random(mode_sizes, ranks, seed=0) -> TtVector:
    """Random TT with i.i.d. standard normal core entries from a seeded RNG.

    `ranks` is either a single interior rank or a full (d+1)-chain with unit
    boundary ranks.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mode_sizes = tuple(int(n) for n in mode_sizes)
    d = len(mode_sizes)
    if np.isscalar(ranks):
        chain = [1] + [int(ranks)] * (d - 1) + [1]
    else:
        chain = [int(r) for r in ranks]
    if len(chain) != d + 1 or chain[0] != 1 or chain[-1] != 1 or min(chain) < 1:
        raise InputError(f"invalid rank chain {chain} for {d} modes")
    cores = tuple(
        rng.standard_normal((chain[k], mode_sizes[k], chain[k + 1])) for k in range(d)
    )
    return TtVector(cores=cores)


def tt_random_matrix(mode_sizes, ranks, seed=0) -> TtMatrix:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mode_sizes = tuple(int(n) for n in mode_sizes)
    d = len(mode_sizes)
    if np.isscalar(ranks):
        chain = [1] + [int(ranks)] * (d - 1) + [1]
    else:
        chain = [int(r) for r in ranks]
    cores = tuple(
        rng.standard_normal((chain[k], mode_sizes[k], mode_sizes[k], chain[k + 1]))
        for k in range(d)
    )
    return TtMatrix(cores=cores)


def identity_matrix(mode_sizes) -> TtMatrix:
    return TtMatrix(
        cores=tuple(np.eye(int(n))[None, :, :, None] for n in mode_sizes)
    )
