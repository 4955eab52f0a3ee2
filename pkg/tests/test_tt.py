import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import ttsolve.io as ttio
from ttsolve.dense import InputError
from ttsolve.tt import (
    TtMatrix,
    TtVector,
    evaluate,
    identity_matrix,
    interfaces,
    mat_to_dense,
    orthogonalize,
    to_dense,
    tt_add,
    tt_dot,
    tt_from_dense,
    tt_matmat,
    tt_matvec,
    tt_norm,
    tt_ones,
    tt_random,
    tt_random_matrix,
    tt_round,
    tt_scale,
    tt_transpose,
    tt_zero,
)


def rel(a, b):
    na = np.linalg.norm(np.asarray(a) - np.asarray(b))
    nb = max(np.linalg.norm(np.asarray(b)), 1e-300)
    return na / nb


# ---------------------------------------------------------------------------
# structure and validation


def test_core_chain_validation():
    with pytest.raises(InputError):
        TtVector(cores=(np.zeros((2, 3, 1)),))  # bad boundary rank
    with pytest.raises(InputError):
        TtVector(cores=(np.zeros((1, 3, 2)), np.zeros((3, 3, 1))))  # bond mismatch
    with pytest.raises(InputError):
        TtVector(cores=(np.full((1, 2, 1), np.nan),))


def test_shapes_and_ranks():
    x = tt_random([3, 4, 2], [1, 2, 3, 1], seed=0)
    assert x.ndim == 3
    assert x.mode_sizes == (3, 4, 2)
    assert x.ranks == (1, 2, 3, 1)
    assert x.size == 24


def test_evaluate_matches_dense():
    rng = np.random.default_rng(1)
    x = tt_random([2, 3, 4], 3, rng)
    xd = to_dense(x).reshape(2, 3, 4)
    for idx in [(0, 0, 0), (1, 2, 3), (0, 1, 2)]:
        assert evaluate(x, idx) == pytest.approx(xd[idx], rel=1e-13, abs=1e-13)
    with pytest.raises(InputError):
        evaluate(x, (0, 0, 9))


def test_dense_cap_enforced():
    x = tt_ones([4] * 4)
    with pytest.raises(InputError):
        to_dense(x, cap=100)


def test_interfaces_reconstruct_unfolding():
    rng = np.random.default_rng(2)
    x = tt_random([3, 2, 4], 3, rng)
    xd = to_dense(x)
    for k in range(4):
        left, right = interfaces(x, k)
        assert rel(left @ right, xd.reshape(left.shape[0], -1)) < 1e-12


# ---------------------------------------------------------------------------
# algebra against dense oracles


def test_add_scale_dot_norm_matvec_dense():
    rng = np.random.default_rng(3)
    modes = [3, 4, 2]
    x = tt_random(modes, 2, rng)
    y = tt_random(modes, 3, rng)
    A = tt_random_matrix(modes, 2, rng)
    xd, yd, Ad = to_dense(x), to_dense(y), mat_to_dense(A)
    assert rel(to_dense(tt_add(x, y)), xd + yd) < 1e-13
    assert rel(to_dense(tt_scale(x, -2.5)), -2.5 * xd) < 1e-13
    assert tt_dot(x, y) == pytest.approx(xd @ yd, rel=1e-12)
    assert tt_norm(x) == pytest.approx(np.linalg.norm(xd), rel=1e-12)
    assert rel(to_dense(tt_matvec(A, x)), Ad @ xd) < 1e-12


def test_add_rank_bookkeeping():
    x = tt_random([3, 3, 3], 2, seed=0)
    y = tt_random([3, 3, 3], 3, seed=1)
    s = tt_add(x, y)
    assert s.ranks == (1, 5, 5, 1)


def test_matmat_transpose_identity():
    rng = np.random.default_rng(4)
    modes = [2, 3, 2]
    A = tt_random_matrix(modes, 2, rng)
    B = tt_random_matrix(modes, 2, rng)
    Ad, Bd = mat_to_dense(A), mat_to_dense(B)
    assert rel(mat_to_dense(tt_matmat(A, B)), Ad @ Bd) < 1e-12
    assert rel(mat_to_dense(tt_transpose(A)), Ad.T) < 1e-13
    eye = identity_matrix(modes)
    assert rel(mat_to_dense(eye), np.eye(12)) < 1e-15
    v = tt_random(modes, 2, rng)
    assert rel(to_dense(tt_matvec(eye, v)), to_dense(v)) < 1e-13


def test_zero_and_ones():
    z = tt_zero([2, 3])
    assert np.all(to_dense(z) == 0.0)
    e = tt_ones([3, 4])
    assert np.all(to_dense(e) == 1.0)
    assert tt_dot(tt_ones([4, 4, 4]), tt_ones([4, 4, 4])) == pytest.approx(64.0)


# ---------------------------------------------------------------------------
# orthogonalization and rounding


def test_orthogonalize_gauge_invariance_and_structure():
    rng = np.random.default_rng(5)
    x = tt_random([3, 4, 2, 3], 3, rng)
    xd = to_dense(x)
    for pivot in range(4):
        xo = orthogonalize(x, pivot)
        assert rel(to_dense(xo), xd) < 1e-12
        # left-orthogonal cores before the pivot, right-orthogonal after
        for k in range(pivot):
            c = xo.cores[k].reshape(-1, xo.cores[k].shape[2])
            assert rel(c.T @ c, np.eye(c.shape[1])) < 1e-12
        for k in range(pivot + 1, 4):
            c = xo.cores[k].reshape(xo.cores[k].shape[0], -1)
            assert rel(c @ c.T, np.eye(c.shape[0])) < 1e-12
        # whole-tensor norm concentrates in the pivot core
        assert np.linalg.norm(xo.cores[pivot]) == pytest.approx(
            np.linalg.norm(xd), rel=1e-12
        )


def test_round_error_bound_and_orthogonality():
    rng = np.random.default_rng(6)
    x = tt_random([4, 4, 4, 4], 5, rng)
    xd = to_dense(x)
    nrm = np.linalg.norm(xd)
    for tol in [1e-1, 1e-4, 1e-8]:
        xr = tt_round(x, tol)
        err = np.linalg.norm(to_dense(xr) - xd)
        assert err <= tol * nrm + 1e-12
        # discarded part is orthogonal to the kept part
        assert abs(to_dense(xr) @ (xd - to_dense(xr))) <= 1e-10 * nrm**2


def test_round_recovers_exact_low_rank():
    rng = np.random.default_rng(7)
    x = tt_random([3, 3, 3], 2, rng)
    # inflate ranks by adding the zero tensor, then round back
    fat = tt_add(x, tt_scale(x, 0.0))
    assert fat.ranks == (1, 4, 4, 1)
    slim = tt_round(fat, 1e-12)
    assert slim.ranks == (1, 2, 2, 1)
    assert rel(to_dense(slim), to_dense(x)) < 1e-11


def test_round_zero_vector():
    z = tt_round(tt_scale(tt_random([3, 3, 3], 2, seed=0), 0.0), 1e-8)
    assert np.all(to_dense(z) == 0.0)
    assert z.ranks == (1, 1, 1, 1)


def test_round_max_rank_cap():
    rng = np.random.default_rng(8)
    x = tt_random([4, 4, 4], 4, rng)
    xr = tt_round(x, 0.0, max_rank=2)
    assert max(xr.ranks) <= 2


def test_from_dense_roundtrip():
    rng = np.random.default_rng(9)
    v = rng.standard_normal(3 * 4 * 5)
    x = tt_from_dense(v, [3, 4, 5])
    assert rel(to_dense(x), v) < 1e-12
    with pytest.raises(InputError):
        tt_from_dense(v, [3, 4, 4])


def test_from_dense_finds_low_rank():
    # rank-1 tensor: outer product of three vectors
    a, b, c = np.arange(1.0, 4), np.arange(1.0, 5), np.arange(1.0, 3)
    v = np.einsum("i,j,k->ijk", a, b, c).reshape(-1)
    x = tt_from_dense(v, [3, 4, 2], rel_tol=1e-12)
    assert x.ranks == (1, 1, 1, 1)
    assert rel(to_dense(x), v) < 1e-12


# ---------------------------------------------------------------------------
# randomized property checks


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(2, 4),
    n=st.integers(2, 4),
    r=st.integers(1, 3),
    seed=st.integers(0, 10_000),
)
def test_property_round_trip_add_matvec(d, n, r, seed):
    rng = np.random.default_rng(seed)
    x = tt_random([n] * d, r, rng)
    y = tt_random([n] * d, r, rng)
    A = tt_random_matrix([n] * d, r, rng)
    xd, yd = to_dense(x), to_dense(y)
    scale = max(np.linalg.norm(xd), np.linalg.norm(yd), 1.0)
    assert np.linalg.norm(to_dense(tt_add(x, y)) - (xd + yd)) < 1e-11 * scale
    Ax = to_dense(tt_matvec(A, x))
    assert np.linalg.norm(Ax - mat_to_dense(A) @ xd) < 1e-10 * max(np.linalg.norm(Ax), 1.0)
    assert abs(tt_dot(x, y) - xd @ yd) < 1e-10 * scale**2
    assert np.linalg.norm(to_dense(tt_round(x, 0.0)) - xd) < 1e-11 * scale


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), pivot=st.integers(0, 2))
def test_property_orthogonalize_preserves_value(seed, pivot):
    x = tt_random([3, 3, 3], 3, seed)
    assert rel(to_dense(orthogonalize(x, pivot)), to_dense(x)) < 1e-12


# ---------------------------------------------------------------------------
# serialization


def test_vector_serialization_bit_exact(tmp_path):
    rng = np.random.default_rng(10)
    x = tt_random([3, 5, 2], 3, rng)
    path = tmp_path / "x.json"
    ttio.save(x, path)
    x2 = ttio.load(path)
    assert isinstance(x2, TtVector)
    assert x2.mode_sizes == x.mode_sizes and x2.ranks == x.ranks
    for c1, c2 in zip(x.cores, x2.cores):
        assert np.array_equal(c1, c2)  # bit-exact round trip


def test_matrix_serialization_bit_exact(tmp_path):
    rng = np.random.default_rng(11)
    A = tt_random_matrix([2, 3, 4], 2, rng)
    path = tmp_path / "A.json"
    ttio.save(A, path)
    A2 = ttio.load(path)
    assert isinstance(A2, TtMatrix)
    for c1, c2 in zip(A.cores, A2.cores):
        assert np.array_equal(c1, c2)


def test_load_rejects_wrong_container(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(InputError):
        ttio.load(path)
