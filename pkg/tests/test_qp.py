import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from npvine.qp import QpStatus, solve_qp


def objective(Q, c, x):
    return 0.5 * x @ Q @ x + c @ x


def random_problem(seed, n=None, p=None, m=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(1, 6))
    p = min(p if p is not None else int(rng.integers(0, 3)), n - 1)
    m = m if m is not None else int(rng.integers(1, 8))
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.1 * np.eye(n)
    c = rng.normal(size=n) * 3
    xf = rng.normal(size=n)
    A = rng.normal(size=(p, n))
    b = A @ xf
    G = rng.normal(size=(m, n))
    h = G @ xf - rng.uniform(0.0, 1.0, size=m)
    return Q, c, A, b, G, h, xf


def enumerate_active_sets(Q, c, A, b, G, h):
    """Global minimizer by solving the equality problem for every active set."""
    n = Q.shape[0]
    best, bestx = np.inf, None
    for r in range(G.shape[0] + 1):
        for S in itertools.combinations(range(G.shape[0]), r):
            C = np.vstack([A, G[list(S)]])
            d = np.concatenate([b, h[list(S)]])
            if C.shape[0] and np.linalg.matrix_rank(C) < C.shape[0]:
                continue
            if C.shape[0] > n:
                continue
            K = np.block([[Q, C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
            sol = np.linalg.solve(K, np.concatenate([-c, d]))
            x = sol[:n]
            if np.all(G @ x >= h - 1e-9):
                f = objective(Q, c, x)
                if f < best:
                    best, bestx = f, x
    return bestx


def kkt_residuals(Q, c, A, b, G, h, res):
    x = res.x
    stat = Q @ x + c - A.T @ res.eq_multipliers - G.T @ res.ineq_multipliers
    slack = G @ x - h
    return (np.max(np.abs(stat)), np.max(np.abs(A @ x - b), initial=0.0),
            -np.min(slack, initial=0.0), np.max(np.abs(res.ineq_multipliers * slack), initial=0.0),
            -np.min(res.ineq_multipliers, initial=0.0))


def test_textbook_examples():
    assert_allclose(solve_qp([[2.0]], [-2.0]).x, [1.0])
    res = solve_qp(2 * np.eye(2), [0, 0], A=[[1, 1]], b=[1])
    assert res.status is QpStatus.OPTIMAL
    assert_allclose(res.x, [0.5, 0.5], atol=1e-12)
    res = solve_qp([[2.0]], [4.0], G=[[1.0]], h=[0.0])
    assert_allclose(res.x, [0.0], atol=1e-12)
    assert_allclose(res.ineq_multipliers, [4.0], atol=1e-10)


def test_infeasible():
    res = solve_qp(np.eye(2), [0, 0], A=[[1, 1]], b=[-1], G=np.eye(2), h=[0, 0])
    assert res.status is QpStatus.INFEASIBLE


def test_rank_deficient_equalities():
    A = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 0.0, 0.0]])
    res = solve_qp(np.eye(3), np.zeros(3), A=A, b=[1, 1, 0.5], G=np.eye(3), h=np.zeros(3))
    assert res.ok
    assert_allclose(res.x, [0.5, 0.25, 0.25], atol=1e-10)


@given(st.integers(0, 2 ** 31 - 1))
def test_matches_active_set_enumeration(seed):
    Q, c, A, b, G, h, _ = random_problem(seed)
    res = solve_qp(Q, c, A, b, G, h)
    assert res.ok
    oracle = enumerate_active_sets(Q, c, A, b, G, h)
    assert_allclose(res.x, oracle, atol=1e-7)
    assert max(kkt_residuals(Q, c, A, b, G, h, res)) <= 1e-8


@given(st.integers(0, 2 ** 31 - 1))
def test_beats_random_feasible_points(seed):
    Q, c, A, b, G, h, xf = random_problem(seed, p=0)
    res = solve_qp(Q, c, A, b, G, h)
    rng = np.random.default_rng(seed + 1)
    f = objective(Q, c, res.x)
    for _ in range(100):
        # points on segments from the strictly feasible xf remain feasible
        y = xf + rng.uniform() * (res.x - xf) + 0.0
        assert f <= objective(Q, c, y) + 1e-9


@given(st.integers(0, 2 ** 31 - 1))
def test_row_permutation_invariance(seed):
    Q, c, A, b, G, h, _ = random_problem(seed)
    rng = np.random.default_rng(seed)
    pa = rng.permutation(A.shape[0])
    pg = rng.permutation(G.shape[0])
    x1 = solve_qp(Q, c, A, b, G, h).x
    x2 = solve_qp(Q, c, A[pa], b[pa], G[pg], h[pg]).x
    assert_allclose(x1, x2, atol=1e-8)


def test_simplex_projection_twelve_bounds():
    # nonnegativity-plus-simplex problem like the Bernstein margin correction
    rng = np.random.default_rng(3)
    target = rng.normal(size=12) * 0.2
    A = np.ones((1, 12))
    res = solve_qp(np.eye(12), -target, A, [1.0], np.eye(12), np.zeros(12))
    oracle = enumerate_active_sets(np.eye(12), -target, A, np.array([1.0]), np.eye(12),
                                   np.zeros(12))
    assert_allclose(res.x, oracle, atol=1e-10)


def test_q_must_be_symmetric():
    with pytest.raises(ValueError):
        solve_qp([[1.0, 1.0], [0.0, 1.0]], [0, 0])
