"""Dense linear-algebra kernels.

All TT operations and the desk-scale verification oracles are built on the
primitives here.  Matrices are plain numpy arrays in row-major (C) order,
real dtype only.  Factorizations use a deterministic sign convention (first
nonzero entry of each computed orthogonal column is positive) so results
are reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class InputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class NumericalError(RuntimeError):
    """Raised when a factorization or solve breaks down numerically."""


@dataclass(frozen=True)
class SpectrumBounds:
    """Extreme eigenvalues of an SPD matrix."""

    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max):
            raise InputError(
                f"invalid spectrum bounds: ({self.lambda_min}, {self.lambda_max})"
            )

    @property
    def cond(self) -> float:
        return self.lambda_max / self.lambda_min


def _as_finite_array(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} contains non-finite entries")
    return M


def _fix_column_signs(Q: np.ndarray, *companions: np.ndarray):
    """Flip column signs of Q so its first nonzero entry per column is positive.

    Each companion has its rows flipped consistently (so products are
    unchanged).  Returns (Q, *companions) as new arrays.
    """
    Q = Q.copy()
    companions = [c.copy() for c in companions]
    for j in range(Q.shape[1]):
        col = Q[:, j]
        nz = np.flatnonzero(np.abs(col) > 0.0)
        if nz.size and col[nz[0]] < 0.0:
            Q[:, j] = -col
            for c in companions:
                c[j, :] = -c[j, :]
    return (Q, *companions)


def qr_factor(M) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization M = Q R with orthonormal Q columns."""
    M = _as_finite_array(M, "M")
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InputError(f"expected a nonempty matrix, got shape {M.shape}")
    Q, R = np.linalg.qr(M)
    Q, R = _fix_column_signs(Q, R)
    return Q, R


def truncated_svd(M, abs_tol: float = 0.0, max_rank: int | None = None):
    """SVD truncation with a sum-of-squares tail criterion.

    Returns (U, s, V, rank) with M ~= U[:, :rank] @ diag(s) @ V[:, :rank].T.
    The rank is the smallest r such that sqrt(sum of squared discarded
    singular values) <= abs_tol, then capped at max_rank.  The discarded
    Frobenius error equals that tail exactly.
    """
    M = _as_finite_array(M, "M")
    if abs_tol < 0:
        raise InputError("abs_tol must be >= 0")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tails[r] = ||sigma[r:]||
    rank = len(s)
    for r in range(len(s) + 1):
        tail = tails[r] if r < len(s) else 0.0
        if tail <= abs_tol:
            rank = r
            break
    rank = max(rank, 1) if min(M.shape) >= 1 else rank
    if max_rank is not None:
        rank = min(rank, max_rank)
    U, Vt = _fix_column_signs(U[:, :rank], Vt[:rank])
    return U, s[:rank].copy(), Vt.T, rank


def solve_spd(B, g) -> np.ndarray:
    """Solve B v = g for symmetric positive definite B by Cholesky."""
    B = _as_finite_array(B, "B")
    g = _as_finite_array(g, "g")
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise InputError(f"B must be square, got shape {B.shape}")
    if g.shape[0] != B.shape[0]:
        raise InputError("dimension mismatch between B and g")
    nrm = np.linalg.norm(B)
    if nrm > 0 and np.linalg.norm(B - B.T) > 1e-10 * nrm:
        raise InputError("B is not symmetric to 1e-10 relative")
    try:
        c, low = scipy.linalg.cho_factor(B, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"Cholesky breakdown for a {B.shape[0]}x{B.shape[0]} system: {exc}"
        ) from exc
    return scipy.linalg.cho_solve((c, low), g, check_finite=False)


def a_projector_apply(U, A, v) -> np.ndarray:
    """Apply the A-orthogonal projector onto span(U): U (U^T A U)^{-1} U^T A v."""
    U = _as_finite_array(U, "U")
    A = _as_finite_array(A, "A")
    v = _as_finite_array(v, "v")
    if U.ndim == 1:
        U = U[:, None]
    G = U.T @ A @ U
    rhs = U.T @ (A @ v)
    try:
        w = solve_spd(0.5 * (G + G.T), rhs)
    except NumericalError as exc:
        raise NumericalError(f"rank-deficient basis in A-projector: {exc}") from exc
    return U @ w


def extreme_eigenvalues(A) -> SpectrumBounds:
    """Minimum and maximum eigenvalues of a symmetric matrix."""
    A = _as_finite_array(A, "A")
    nrm = np.linalg.norm(A)
    if nrm > 0 and np.linalg.norm(A - A.T) > 1e-8 * nrm:
        raise InputError("A is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return SpectrumBounds(lambda_min=float(w[0]), lambda_max=float(w[-1]))


def kron(A, B) -> np.ndarray:
    """Kronecker product with row-major index grouping: C(ip, jq) = A(i,j) B(p,q)."""
    A = _as_finite_array(A, "A")
    B = _as_finite_array(B, "B")
    return np.kron(A, B)
