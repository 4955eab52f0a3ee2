import json
import math

import numpy as np
import pytest

from ttsolve.cli import main as cli_main
from ttsolve.dense import InputError, extreme_eigenvalues, kron
from ttsolve.problems import (
    ORACLE_CAP_ENV,
    ProblemSpec,
    build_problem,
    dense_oracle_solve,
    laplacian_1d,
    laplacian_tt,
    ones_tt,
    oracle_cap,
    random_rhs_tt,
    run_experiment,
)
from ttsolve.solvers import SolverConfig
from ttsolve.trace import ConvergenceTrace
from ttsolve.tt import evaluate, mat_to_dense, to_dense, tt_dot


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(
        np.linalg.norm(np.asarray(b)), 1e-300
    )


def kron_sum_laplacian(d, n, scaled=True):
    """Independent dense assembly: sum_k I x .. x D x .. x I."""
    D = laplacian_1d(n, scaled)
    A = np.zeros((n**d, n**d))
    for k in range(d):
        term = np.eye(1)
        for j in range(d):
            term = kron(term, D if j == k else np.eye(n))
        A += term
    return A


# ---------------------------------------------------------------------------
# generators


def test_laplacian_1d_stencil():
    assert np.array_equal(laplacian_1d(2, scaled=False), [[2, -1], [-1, 2]])


def test_laplacian_tt_matches_kron_sum():
    for d in (1, 2, 3):
        for n in (2, 3, 5, 8):
            for scaled in (False, True):
                Ad = mat_to_dense(laplacian_tt(d, n, scaled))
                ref = kron_sum_laplacian(d, n, scaled)
                assert rel(Ad, ref) < 1e-13


def test_laplacian_tt_ranks_are_two():
    A = laplacian_tt(4, 3)
    assert A.ranks == (1, 2, 2, 2, 1)
    # unfoldings of the dense operator tensor have numerical rank <= 2
    d, n = 3, 4
    Ad = mat_to_dense(laplacian_tt(d, n, scaled=False))
    T = Ad.reshape([n] * (2 * d)).transpose(0, 3, 1, 4, 2, 5)  # pair (i_k, j_k)
    for k in (1, 2):
        M = T.reshape(n ** (2 * k), n ** (2 * (d - k)))
        s = np.linalg.svd(M, compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) <= 2


def test_laplacian_spectrum_closed_form():
    # eigenvalues of the 1D stencil are 2 - 2 cos(k pi / (n+1)); the
    # Kronecker sum's spectrum is all sums of 1D eigenvalues
    for d in (1, 2, 3):
        for n in (2, 4, 8):
            Ad = kron_sum_laplacian(d, n, scaled=True)
            sp = extreme_eigenvalues(Ad)
            h2 = (n + 1.0) ** 2
            lam1 = (2 - 2 * math.cos(math.pi / (n + 1))) * h2
            lamn = (2 - 2 * math.cos(n * math.pi / (n + 1))) * h2
            assert sp.lambda_min == pytest.approx(d * lam1, abs=1e-10 * d * lamn)
            assert sp.lambda_max == pytest.approx(d * lamn, abs=1e-10 * d * lamn)


def test_ones_and_random_rhs():
    e = ones_tt(3, 4)
    assert tt_dot(e, e) == pytest.approx(64.0)
    assert evaluate(e, (0, 3, 2)) == pytest.approx(1.0)
    r1 = random_rhs_tt(3, 4, rank=2, seed=9)
    r2 = random_rhs_tt(3, 4, rank=2, seed=9)
    for c1, c2 in zip(r1.cores, r2.cores):
        assert np.array_equal(c1, c2)
    with pytest.raises(InputError):
        laplacian_tt(0, 4)
    with pytest.raises(InputError):
        ProblemSpec(n=1)


# ---------------------------------------------------------------------------
# oracle


def test_dense_oracle_identity():
    from ttsolve.tt import identity_matrix, tt_random

    eye = identity_matrix([3, 3])
    y = tt_random([3, 3], 2, 0)
    assert rel(dense_oracle_solve(eye, y), to_dense(y)) < 1e-12


def test_dense_oracle_residual():
    A = laplacian_tt(3, 8)
    y = ones_tt(3, 8)
    x = dense_oracle_solve(A, y)
    Ad, yd = mat_to_dense(A), to_dense(y)
    assert np.linalg.norm(Ad @ x - yd) <= 1e-10 * np.linalg.norm(yd)


def test_oracle_cap_env_override(monkeypatch):
    monkeypatch.setenv(ORACLE_CAP_ENV, "100")
    assert oracle_cap() == 100
    with pytest.raises(InputError):
        dense_oracle_solve(laplacian_tt(3, 8), ones_tt(3, 8))
    monkeypatch.setenv(ORACLE_CAP_ENV, "not-a-number")
    with pytest.raises(InputError):
        oracle_cap()


# ---------------------------------------------------------------------------
# experiment runner


def test_run_experiment_writes_artifacts(tmp_path):
    spec = ProblemSpec(kind="laplacian", d=3, n=8)
    cfg = SolverConfig(method="nongreedy_sd", kick_rank=3, truncation_tol=1e-8,
                       stop_tol=1e-8, max_sweeps=20)
    trace_path = tmp_path / "run.jsonl"
    summary_path = tmp_path / "run.json"
    result = run_experiment(spec, cfg, trace_path, summary_path)
    assert result.oracle_rel_error is not None
    assert result.oracle_rel_error <= 1e-6
    # trace re-parses losslessly and is append-ordered
    back = ConvergenceTrace.read_jsonl(trace_path)
    assert [e.to_json() for e in back.events] == [
        e.to_json() for e in result.trace.events
    ]
    order = [(e.sweep, e.microstep) for e in back.events]
    assert order == sorted(order)
    summary = json.loads(summary_path.read_text())
    assert summary["converged"] is True
    assert summary["problem"]["d"] == 3


def test_run_experiment_oracle_off():
    spec = ProblemSpec(kind="laplacian", d=3, n=6)
    cfg = SolverConfig(method="als", kick_rank=2, truncation_tol=1e-6, max_sweeps=3)
    result = run_experiment(spec, cfg, oracle="off")
    assert result.oracle_error is None


def test_als_stagnates_at_rank_constrained_minimum():
    spec = ProblemSpec(kind="laplacian", d=3, n=6)
    cfg = SolverConfig(method="als", kick_rank=2, truncation_tol=1e-10,
                       stop_tol=1e-14, max_sweeps=15, seed=2)
    result = run_experiment(spec, cfg, oracle="on")
    ends = result.trace.sweep_end_events()
    # energy settles (stagnation at the rank-2 minimum) and J is monotone
    Js = [e.J for e in ends]
    assert all(Js[i + 1] <= Js[i] + 1e-10 * abs(Js[i]) for i in range(len(Js) - 1))
    assert abs(Js[-1] - Js[-2]) <= 1e-8 * abs(Js[-1])


def test_build_problem_random_kind():
    spec = ProblemSpec(kind="random_spd_tt", d=3, n=4, seed=1)
    A, y = build_problem(spec)
    Ad = mat_to_dense(A)
    w = np.linalg.eigvalsh(0.5 * (Ad + Ad.T))
    assert w[0] > 0  # SPD by construction


# ---------------------------------------------------------------------------
# CLI


def run_cli(tmp_path, tag, extra=()):
    trace = tmp_path / f"{tag}.jsonl"
    summary = tmp_path / f"{tag}.json"
    code = cli_main([
        "--problem", "laplacian", "--dim", "3", "--mode-size", "8",
        "--method", "nongreedy", "--kick-rank", "3", "--trunc-tol", "1e-8",
        "--stop-tol", "1e-8", "--seed", "7",
        "--trace", str(trace), "--summary", str(summary), *extra,
    ])
    return code, trace, summary


def test_cli_end_to_end_and_determinism(tmp_path):
    code1, trace1, summary1 = run_cli(tmp_path, "a")
    code2, trace2, summary2 = run_cli(tmp_path, "b")
    assert code1 == 0 and code2 == 0
    s1 = json.loads(summary1.read_text())
    s2 = json.loads(summary2.read_text())
    s1.pop("t_wall_s"), s2.pop("t_wall_s")
    assert s1 == s2
    # traces identical modulo wall-time fields
    e1 = [json.loads(line) for line in trace1.read_text().splitlines()]
    e2 = [json.loads(line) for line in trace2.read_text().splitlines()]
    for a, b in zip(e1, e2):
        a.pop("t_wall_s"), b.pop("t_wall_s")
        assert a == b


def test_cli_trace_schema(tmp_path):
    code, trace, _ = run_cli(tmp_path, "c")
    assert code == 0
    required = {"schema", "sweep", "microstep", "k", "J", "res_l2", "ranks",
                "t_wall_s", "phase", "err_A", "omega"}
    for line in trace.read_text().splitlines():
        doc = json.loads(line)
        assert set(doc) == required
        assert doc["schema"] == 1
        assert doc["phase"] in ("solve", "truncate", "enrich", "sweep_end")


def test_cli_unscaled_flag(tmp_path):
    code, _, summary = run_cli(tmp_path, "d", extra=["--unscaled"])
    assert code == 0
    assert json.loads(summary.read_text())["problem"]["scaled"] is False


def test_cli_rejects_bad_input(capsys):
    assert cli_main(["--dim", "0"]) == 2
    assert "error" in capsys.readouterr().err
