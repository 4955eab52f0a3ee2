"""Reduced-basis frames and partial-contraction environments.

The frame at core k is the linear map from vec(core k) to the dense tensor;
local systems are the original SPD system projected onto that frame.  The
EnvironmentCache keeps the left/right partial contractions of
(frame)^T A (frame) and (frame)^T y so a local system costs
O(n r_A r^3 + n^2 r_A^2 r^2) to apply instead of a fresh full contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dense import InputError, NumericalError, kron, solve_spd
from .tt import (
    OrthoState,
    TtMatrix,
    TtVector,
    interfaces,
    orthogonalize,
    tt_zero,
)


class StaleCacheError(RuntimeError):
    """A LocalSystem was used after its environments were invalidated."""


def frame_dense(x: TtVector, k: int, cap: int | None = None) -> np.ndarray:
    """Dense frame X^{<k} (x) I_{n_k} (x) (X^{>k})^T of shape (N, r_{k-1} n_k r_k).

    Multiplying it by vec(core k) reproduces the dense tensor.
    """
    if not (0 <= k < x.ndim):
        raise InputError(f"core index {k} out of range")
    left, _ = interfaces(x, k, cap=cap)
    _, right = interfaces(x, k + 1, cap=cap)
    n = x.mode_sizes[k]
    return kron(kron(left, np.eye(n)), right.T)


def frame_two_block_dense(x: TtVector, k: int, cap: int | None = None) -> np.ndarray:
    """Dense two-mode frame X^{<k} (x) I_{n_k} (x) I_{n_{k+1}} (x) (X^{>k+1})^T."""
    if not (0 <= k < x.ndim - 1):
        raise InputError(f"pair index {k} out of range")
    left, _ = interfaces(x, k, cap=cap)
    _, right = interfaces(x, k + 2, cap=cap)
    n1, n2 = x.mode_sizes[k], x.mode_sizes[k + 1]
    return kron(kron(left, np.eye(n1 * n2)), right.T)


# ---------------------------------------------------------------------------
# environments


class EnvironmentCache:
    """Left/right partial contractions for the ALS/DMRG local systems.

    Holds a private copy of the solution cores.  Cores are replaced through
    :meth:`set_core`, which invalidates exactly the environments that depend
    on them; environments are then rebuilt incrementally on demand, which is
    what makes a full sweep linear in d.  A version counter lets LocalSystem
    objects detect stale use.
    """

    def __init__(self, A: TtMatrix, y: TtVector | None, cores):
        self.A = A
        self.y = y
        self._cores = [np.ascontiguousarray(c, dtype=float) for c in cores]
        d = len(self._cores)
        if A.ndim != d or (y is not None and y.ndim != d):
            raise InputError("dimension mismatch between operator, rhs and cores")
        if A.col_mode_sizes != tuple(c.shape[1] for c in self._cores):
            raise InputError("mode-size mismatch between operator and cores")
        self.version = 0
        self._left = {0: np.ones((1, 1, 1))}
        self._right = {d: np.ones((1, 1, 1))}
        self._left_rhs = {0: np.ones((1, 1))}
        self._right_rhs = {d: np.ones((1, 1))}

    @property
    def ndim(self) -> int:
        return len(self._cores)

    def core(self, k: int) -> np.ndarray:
        return self._cores[k]

    def cores(self):
        return tuple(self._cores)

    def vector(self) -> TtVector:
        return TtVector(cores=self.cores())

    def set_core(self, k: int, core: np.ndarray):
        core = np.ascontiguousarray(core, dtype=float)
        self._cores[k] = core
        self.version += 1
        for j in [j for j in self._left if j >= k + 1]:
            del self._left[j]
        for j in [j for j in self._right if j <= k]:
            del self._right[j]
        for j in [j for j in self._left_rhs if j >= k + 1]:
            del self._left_rhs[j]
        for j in [j for j in self._right_rhs if j <= k]:
            del self._right_rhs[j]

    # environment recurrences ------------------------------------------------

    def left(self, k: int) -> np.ndarray:
        """Contraction of cores 0..k-1 of (x, A, x): shape (r_k, R_k, r_k)."""
        j = max(i for i in self._left if i <= k)
        while j < k:
            L, xc, Ac = self._left[j], self._cores[j], self.A.cores[j]
            t1 = np.tensordot(L, xc, axes=(2, 0))  # (a, B, j, c2)
            t2 = np.tensordot(t1, Ac, axes=([1, 2], [0, 2]))  # (a, c2, i, B2)
            t3 = np.tensordot(t2, xc, axes=([0, 2], [0, 1]))  # (c2, B2, a2)
            self._left[j + 1] = np.ascontiguousarray(t3.transpose(2, 1, 0))
            j += 1
        return self._left[k]

    def right(self, k: int) -> np.ndarray:
        """Contraction of cores k..d-1 of (x, A, x): shape (r_k, R_k, r_k)."""
        j = min(i for i in self._right if i >= k)
        while j > k:
            R, xc, Ac = self._right[j], self._cores[j - 1], self.A.cores[j - 1]
            t1 = np.tensordot(xc, R, axes=(2, 2))  # (c, j, a', B')
            t2 = np.tensordot(Ac, t1, axes=([2, 3], [1, 3]))  # (B, i, c, a')
            t3 = np.tensordot(xc, t2, axes=([1, 2], [1, 3]))  # (a, B, c)
            self._right[j - 1] = np.ascontiguousarray(t3)
            j -= 1
        return self._right[k]

    def left_rhs(self, k: int) -> np.ndarray:
        """Contraction of cores 0..k-1 of (x, y): shape (r_k, r_{y,k})."""
        if self.y is None:
            raise InputError("environment cache was built without a right-hand side")
        j = max(i for i in self._left_rhs if i <= k)
        while j < k:
            L, xc, yc = self._left_rhs[j], self._cores[j], self.y.cores[j]
            t = np.tensordot(L, yc, axes=(1, 0))  # (a, i, b2)
            self._left_rhs[j + 1] = np.tensordot(xc, t, axes=([0, 1], [0, 1]))
            j += 1
        return self._left_rhs[k]

    def right_rhs(self, k: int) -> np.ndarray:
        if self.y is None:
            raise InputError("environment cache was built without a right-hand side")
        j = min(i for i in self._right_rhs if i >= k)
        while j > k:
            R, xc, yc = self._right_rhs[j], self._cores[j - 1], self.y.cores[j - 1]
            t = np.tensordot(yc, R, axes=(2, 1))  # (b1, i, a)
            self._right_rhs[j - 1] = np.tensordot(xc, t, axes=([1, 2], [1, 2]))
            j -= 1
        return self._right_rhs[k]


# ---------------------------------------------------------------------------
# local systems


@dataclass
class LocalSystem:
    """SPD local problem B u = g on a core (or superblock) sized vector.

    `apply` and `matrix` raise StaleCacheError if the environments they were
    built from have been invalidated by a later set_core.
    """

    dims: tuple[int, ...]
    rhs: np.ndarray
    _apply: Callable[[np.ndarray], np.ndarray]
    _assemble: Callable[[], np.ndarray]
    _env: EnvironmentCache
    _version: int

    def _check_current(self):
        if self._env.version != self._version:
            raise StaleCacheError(
                "local system used after its environment cache changed"
            )

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def apply(self, v: np.ndarray) -> np.ndarray:
        self._check_current()
        return self._apply(np.asarray(v, dtype=float).reshape(-1))

    def matrix(self) -> np.ndarray:
        self._check_current()
        return self._assemble()

    def quad(self, v: np.ndarray) -> float:
        """Energy value (v, B v) - 2 (v, g) of the represented tensor."""
        v = np.asarray(v, dtype=float).reshape(-1)
        return float(v @ self.apply(v) - 2.0 * v @ self.rhs)


def local_system(env: EnvironmentCache, k: int) -> LocalSystem:
    """One-core reduced system (frame^T A frame) u = frame^T y at core k."""
    L, R = env.left(k), env.right(k + 1)
    Ac = env.A.cores[k]
    dims = (L.shape[0], Ac.shape[1], R.shape[0])

    def apply(v):
        t1 = np.tensordot(L, v.reshape(dims), axes=(2, 0))  # (a, B, j, b')
        t2 = np.tensordot(t1, Ac, axes=([1, 2], [0, 2]))  # (a, b', i, B2)
        out = np.tensordot(t2, R, axes=([1, 3], [2, 1]))  # (a, i, b)
        return out.reshape(-1)

    def assemble():
        B = np.einsum("aBc,BijC,bCd->aibcjd", L, Ac, R, optimize=True)
        m = int(np.prod(dims))
        return B.reshape(m, m)

    Ly, Ry = env.left_rhs(k), env.right_rhs(k + 1)
    yc = env.y.cores[k]
    g = np.tensordot(np.tensordot(Ly, yc, axes=(1, 0)), Ry, axes=(2, 1))
    return LocalSystem(
        dims=dims,
        rhs=g.reshape(-1),
        _apply=apply,
        _assemble=assemble,
        _env=env,
        _version=env.version,
    )


def local_system_two_block(env: EnvironmentCache, k: int) -> LocalSystem:
    """Two-core (superblock) reduced system over modes k and k+1."""
    d = env.ndim
    if not (0 <= k < d - 1):
        raise InputError(f"pair index {k} out of range")
    L, R = env.left(k), env.right(k + 2)
    A1, A2 = env.A.cores[k], env.A.cores[k + 1]
    n1, n2 = A1.shape[1], A2.shape[1]
    dims = (L.shape[0], n1, n2, R.shape[0])

    def apply(v):
        t1 = np.tensordot(L, v.reshape(dims), axes=(2, 0))  # (a, B, j1, j2, b')
        t2 = np.tensordot(t1, A1, axes=([1, 2], [0, 2]))  # (a, j2, b', i1, B2)
        t3 = np.tensordot(t2, A2, axes=([4, 1], [0, 2]))  # (a, b', i1, i2, B3)
        out = np.tensordot(t3, R, axes=([1, 4], [2, 1]))  # (a, i1, i2, b)
        return out.reshape(-1)

    def assemble():
        B = np.einsum(
            "aBc,BijC,CpqD,bDd->aipbcjqd", L, A1, A2, R, optimize=True
        )
        m = int(np.prod(dims))
        return B.reshape(m, m)

    Ly, Ry = env.left_rhs(k), env.right_rhs(k + 2)
    y1, y2 = env.y.cores[k], env.y.cores[k + 1]
    t = np.tensordot(Ly, y1, axes=(1, 0))  # (a, i1, b2)
    t = np.tensordot(t, y2, axes=(2, 0))  # (a, i1, i2, b3)
    g = np.tensordot(t, Ry, axes=(3, 1))  # (a, i1, i2, b)
    return LocalSystem(
        dims=dims,
        rhs=g.reshape(-1),
        _apply=apply,
        _assemble=assemble,
        _env=env,
        _version=env.version,
    )


def galerkin_correction(env: EnvironmentCache, k: int, split: int) -> np.ndarray:
    """Block Gauss-Seidel correction of the superblock at (k, k+1).

    Core k must carry the [T S] column structure with `split` T-columns and
    core k+1 the zero-padded [T; 0] rows.  Solves the S-restricted Galerkin
    system (S^T B S) v = S^T (g - B T t) over the superblock problem and
    returns V of shape (r_k - split, n_{k+1}, r_{k+1}); writing V into the
    zero block updates the superblock by the low-rank correction S V.
    """
    core_k = env.core(k)
    core_k1 = env.core(k + 1)
    rk = core_k.shape[2]
    if not (0 <= split <= rk):
        raise InputError(f"split {split} out of range 0..{rk}")
    rho = rk - split
    n2, rr = core_k1.shape[1], core_k1.shape[2]
    if rho == 0:
        return np.zeros((0, n2, rr))
    S = core_k[:, :, split:]  # (a, i, s)
    sys2 = local_system_two_block(env, k)
    # residual of the current (zero-padded) superblock, restricted to S
    w = np.einsum("aib,bjc->aijc", core_k, core_k1, optimize=True)
    resid = sys2.rhs - sys2.apply(w)
    resid = resid.reshape(sys2.dims)
    rhs = np.einsum("ais,aijc->sjc", S, resid, optimize=True)
    # S-restricted reduced operator, assembled through the environments
    L = env.left(k)
    A1, A2 = env.A.cores[k], env.A.cores[k + 1]
    R = env.right(k + 2)
    M1 = np.einsum("ais,aBc,BijC,cjt->sCt", S, L, A1, S, optimize=True)
    Bred = np.einsum("sCt,CjpD,bDe->sjbtpe", M1, A2, R, optimize=True)
    m = rho * n2 * rr
    Bred = Bred.reshape(m, m)
    try:
        v = solve_spd(0.5 * (Bred + Bred.T), rhs.reshape(-1))
    except NumericalError as exc:
        raise NumericalError(f"singular reduced enrichment operator: {exc}") from exc
    return v.reshape(rho, n2, rr)


# ---------------------------------------------------------------------------
# A-norm-aware rounding

#: dense local operators above this size skip the eigenvalue check and fall
#: back to Frobenius truncation
_ANORM_DENSE_LIMIT = 2048


def tt_round_anorm(
    x: TtVector, A: TtMatrix, rel_tol: float, max_rank: int | None = None
) -> TtVector:
    """Rank truncation with the per-unfolding error measured in the A-weighted
    local metric frame^T A frame instead of the Frobenius norm.

    Singular values are dropped one by one while the local A-weighted error
    stays below the per-unfolding share of rel_tol times the local A-norm of
    the core.  Falls back to the Frobenius criterion when the reduced metric
    is numerically singular (or too large to check).
    """
    if rel_tol < 0:
        raise InputError("rel_tol must be >= 0")
    d = x.ndim
    if d == 1:
        return TtVector(cores=tuple(c.copy() for c in x.cores))
    x = orthogonalize(x, d - 1)
    cores = list(x.cores)
    if np.linalg.norm(cores[-1]) == 0.0:
        return tt_zero(x.mode_sizes)
    env = EnvironmentCache(A, None, cores)
    local_tol = rel_tol / math.sqrt(d - 1)
    for k in range(d - 1, 0, -1):
        c = cores[k]
        rl, n, rr = c.shape
        M = c.reshape(rl, n * rr)
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        L, R = env.left(k), env.right(k + 1)
        dims = (rl, n, rr)

        def b_norm(v):
            t1 = np.tensordot(L, v.reshape(dims), axes=(2, 0))
            t2 = np.tensordot(t1, A.cores[k], axes=([1, 2], [0, 2]))
            out = np.tensordot(t2, R, axes=([1, 3], [2, 1]))
            return float(v.reshape(-1) @ out.reshape(-1))

        use_anorm = True
        m = rl * n * rr
        if m <= _ANORM_DENSE_LIMIT:
            Bmat = np.einsum("aBc,BijC,bCd->aibcjd", L, A.cores[k], R, optimize=True)
            w = np.linalg.eigvalsh(0.5 * (Bmat.reshape(m, m) + Bmat.reshape(m, m).T))
            if w[-1] <= 0 or w[0] < 1e-12 * w[-1]:
                use_anorm = False
            elif w[0] <= 0:
                raise NumericalError("reduced operator is not positive definite")
        else:
            use_anorm = False

        if use_anorm:
            core_nrm = math.sqrt(max(b_norm(M), 0.0))
            rank = len(s)
            while rank > 1:
                delta = (U[:, rank - 1 :] * s[rank - 1 :]) @ Vt[rank - 1 :]
                err = math.sqrt(max(b_norm(delta), 0.0))
                if err > local_tol * core_nrm:
                    break
                rank -= 1
            if max_rank is not None:
                rank = min(rank, max_rank)
        else:
            tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
            budget = local_tol * np.linalg.norm(s)
            rank = len(s)
            for r in range(len(s) + 1):
                tail = tails[r] if r < len(s) else 0.0
                if tail <= budget:
                    rank = max(r, 1)
                    break
            if max_rank is not None:
                rank = min(rank, max_rank)

        new_core = Vt[:rank].reshape(rank, n, rr)
        carry = U[:, :rank] * s[:rank]
        env.set_core(k, new_core)
        env.set_core(k - 1, np.tensordot(cores[k - 1], carry, axes=(2, 0)))
        cores[k] = env.core(k)
        cores[k - 1] = env.core(k - 1)
    return TtVector(cores=tuple(cores), ortho=OrthoState.at_pivot(d, 0))
