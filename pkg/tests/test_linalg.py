import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from oracles import oracle_diag, oracle_unit_diag
from holq.linalg import (
    NotPositiveDefiniteError,
    RankDeficiencyError,
    cholesky,
    diag_minimizer,
    lq,
    normalized_lq,
    normalized_polar,
    polar,
    rq,
    svd,
    unit_diag_minimizer,
)

seeds = st.integers(0, 2**32 - 1)


def wide(seed, p=3, n=5):
    return np.random.default_rng(seed).standard_normal((p, n))


def crit(M, X):
    return np.linalg.norm(np.linalg.solve(M, X))


# -- numerical-optimizer oracles ---------------------------------------------


def _unit_det_lower(theta, p):
    L = np.zeros((p, p))
    logd = np.append(theta[: p - 1], -np.sum(theta[: p - 1]))
    L[np.diag_indices(p)] = np.exp(logd)
    L[np.tril_indices(p, -1)] = theta[p - 1:]
    return L


def oracle_unit_det_lower(X):
    p = X.shape[0]
    f = lambda t: crit(_unit_det_lower(t, p), X) ** 2
    n_par = p - 1 + p * (p - 1) // 2
    res = minimize(f, np.zeros(n_par), method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
    return _unit_det_lower(res.x, p)


def _unit_trace_spd(theta, p):
    C = np.zeros((p, p))
    C[np.tril_indices(p)] = theta
    C[np.diag_indices(p)] = np.exp(np.diagonal(C))
    P = C @ C.T
    return P / np.trace(P)


def oracle_unit_trace_spd(X):
    p = X.shape[0]
    S = X @ X.T
    f = lambda t: np.trace(np.linalg.solve(_unit_trace_spd(t, p), S))
    res = minimize(f, np.zeros(p * (p + 1) // 2), method="BFGS",
                   options={"gtol": 1e-12, "maxiter": 10000})
    return _unit_trace_spd(res.x, p)


# -- lq / rq ------------------------------------------------------------------


def test_lq_examples():
    L, Q = lq(np.eye(3))
    assert np.allclose(L, np.eye(3)) and np.allclose(Q, np.eye(3))
    L, Q = lq(np.diag([3.0, 2.0]))
    assert np.allclose(L, np.diag([3.0, 2.0])) and np.allclose(Q, np.eye(2))


@given(seeds)
def test_lq_properties(seed):
    X = wide(seed)
    L, Q = lq(X)
    assert np.allclose(L, np.tril(L)) and np.all(np.diagonal(L) > 0)
    assert np.linalg.norm(L @ Q - X) <= 1e-12 * np.linalg.norm(X)
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-12)


def test_rq_examples():
    R, Z = rq(np.eye(2))
    assert np.allclose(R, np.eye(2)) and np.allclose(Z, np.eye(2))
    R, Z = rq(np.diag([3.0, 2.0]))
    assert np.allclose(R, np.diag([3.0, 2.0])) and np.allclose(Z, np.eye(2))


@given(seeds)
def test_rq_properties(seed):
    X = wide(seed)
    R, Z = rq(X)
    assert np.allclose(R, np.triu(R)) and np.all(np.diagonal(R) > 0)
    assert np.linalg.norm(R @ Z - X) <= 1e-12 * np.linalg.norm(X)
    assert np.allclose(Z @ Z.T, np.eye(3), atol=1e-12)


def test_rank_deficiency_is_reported():
    X = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    for f in (lq, rq, polar, normalized_lq, normalized_polar, unit_diag_minimizer):
        with pytest.raises(RankDeficiencyError):
            f(X)
    with pytest.raises(RankDeficiencyError):
        lq(np.ones((3, 2)))
    with pytest.raises(RankDeficiencyError):
        diag_minimizer(np.array([[1.0, 2.0], [0.0, 0.0]]))


# -- cholesky / svd / polar ----------------------------------------------------


def test_cholesky_examples(rng):
    assert np.allclose(cholesky(np.eye(3)), np.eye(3))
    assert np.allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    A = rng.standard_normal((4, 4))
    S = A @ A.T + np.eye(4)
    L = cholesky(S)
    assert np.allclose(L, np.tril(L)) and np.linalg.norm(L @ L.T - S) <= 1e-12 * np.linalg.norm(S)
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_svd_examples(rng):
    U, d, V = svd(np.diag([2.0, 1.0]))
    assert np.allclose(U, np.eye(2)) and np.allclose(d, [2, 1]) and np.allclose(V, np.eye(2))
    _, d, _ = svd(np.zeros((2, 3)))
    assert np.all(d == 0)
    X = rng.standard_normal((3, 3))
    U, d, V = svd(X)
    assert np.linalg.norm((U * d) @ V.T - X) <= 1e-12 * np.linalg.norm(X)
    assert np.all(np.diff(d) <= 0)
    assert np.allclose(np.sort(d**2), np.linalg.eigvalsh(X @ X.T), rtol=1e-12)
    # sign rule: the largest entry of each U column is positive
    assert np.all(U[np.argmax(np.abs(U), axis=0), range(3)] > 0)


def test_polar_examples(rng):
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    P, W = polar(R)
    assert np.allclose(P, np.eye(2)) and np.allclose(W, R)
    P, W = polar(np.diag([2.0, 3.0]))
    assert np.allclose(P, np.diag([2.0, 3.0])) and np.allclose(W, np.eye(2))
    X = rng.standard_normal((2, 4))
    P, W = polar(X)
    assert np.linalg.norm(P @ W - X) <= 1e-12 * np.linalg.norm(X)
    assert np.allclose(P, P.T) and np.all(np.linalg.eigvalsh(P) > 0)
    assert np.allclose(W @ W.T, np.eye(2), atol=1e-12)


# -- normalized LQ ---------------------------------------------------------------


def test_normalized_lq_examples():
    r = normalized_lq(np.eye(2))
    assert np.isclose(r.ell, np.sqrt(2)) and np.allclose(r.L, np.eye(2))
    assert np.allclose(r.rows, np.eye(2))
    r = normalized_lq(np.diag([2.0, 0.5]))
    assert np.isclose(r.ell, np.sqrt(2)) and np.allclose(r.L, np.diag([2.0, 0.5]))
    assert np.allclose(r.rows, np.eye(2))


@given(seeds)
def test_normalized_lq_invariants(seed):
    X = wide(seed, 3, 6)
    r = normalized_lq(X)
    p = 3
    assert abs(np.linalg.det(r.L) - 1) <= 1e-10
    assert np.allclose(r.L, np.tril(r.L))
    assert np.linalg.norm(r.ell * r.L @ r.Q - X) <= 1e-11 * np.linalg.norm(X)
    assert np.isclose(np.linalg.norm(r.Q), 1.0, atol=1e-13)
    assert np.linalg.norm(r.rows @ r.rows.T - np.eye(p)) <= 1e-10
    assert np.isclose(r.ell, crit(r.L, X), rtol=1e-12)
    S = X @ X.T
    lhs = r.L @ r.L.T * np.linalg.det(S) ** (1 / p)
    assert np.linalg.norm(lhs - S) <= 1e-9 * np.linalg.norm(S)


def test_normalized_lq_matches_optimizer():
    for seed in range(5):
        X = wide(100 + seed, 3, 6)
        r = normalized_lq(X)
        L = oracle_unit_det_lower(X)
        assert crit(r.L, X) <= crit(L, X) * (1 + 1e-10)
        assert np.allclose(r.L, L, atol=1e-5)


# -- normalized polar -------------------------------------------------------------


def test_normalized_polar_examples():
    r = normalized_polar(np.eye(2))
    assert np.allclose(r.P, np.eye(2) / 2) and np.isclose(r.ell, 2 * np.sqrt(2))
    assert np.allclose(r.W, np.eye(2) / np.sqrt(2))
    r = normalized_polar(np.diag([2.0, 0.5]))
    assert np.allclose(r.P, np.diag([0.8, 0.2])) and np.isclose(r.ell, 2.5 * np.sqrt(2))
    assert np.allclose(r.W, np.eye(2) / np.sqrt(2))
    assert np.allclose(r.rows @ r.rows.T, np.eye(2))


@given(seeds)
def test_normalized_polar_invariants(seed):
    X = wide(seed, 3, 6)
    r = normalized_polar(X)
    assert abs(np.trace(r.P) - 1) <= 1e-10
    assert np.allclose(r.P, r.P.T, atol=1e-15)
    assert np.linalg.norm(r.ell * r.P @ r.W - X) <= 1e-11 * np.linalg.norm(X)
    S = X @ X.T
    w, V = np.linalg.eigh(S)
    t = np.sum(np.sqrt(w))
    assert np.linalg.norm((r.P * t) @ (r.P * t) - S) <= 1e-9 * np.linalg.norm(S)


def test_normalized_polar_matches_optimizer():
    for seed in range(5):
        X = wide(200 + seed, 3, 6)
        r = normalized_polar(X)
        P = oracle_unit_trace_spd(X)
        S = X @ X.T
        f = lambda M: np.trace(np.linalg.solve(M, S))
        assert f(r.P) <= f(P) * (1 + 1e-10)
        assert np.allclose(r.P, P, atol=1e-5)


# -- diagonal and unit-diagonal minimizers ------------------------------------------


def test_diag_minimizer_examples():
    assert np.allclose(diag_minimizer(np.eye(3)), np.eye(3))
    assert np.allclose(diag_minimizer(np.diag([2.0, 0.5])), np.diag([2.0, 0.5]))


def test_diag_minimizer_beats_grid():
    X = wide(7, 3, 7)
    D = diag_minimizer(X)
    best = crit(D, X)
    g = np.linspace(-2, 2, 201)
    for a in g:
        for b in g[::4]:
            cand = np.diag(np.exp([a, b, -a - b]))
            assert best <= crit(cand, X) * (1 + 1e-12)


def test_minimizers_dominate_random_candidates(rng):
    X = rng.standard_normal((3, 7))
    D = diag_minimizer(X)
    L, _ = unit_diag_minimizer(X)
    cD, cL = crit(D, X), crit(L, X)
    for _ in range(1000):
        t = rng.normal(0, 1, 2)
        assert cD <= crit(np.diag(np.exp([t[0], t[1], -t.sum()])), X) * (1 + 1e-12)
        M = np.eye(3)
        M[np.tril_indices(3, -1)] = rng.normal(0, 1, 3)
        assert cL <= crit(M, X) * (1 + 1e-12)


def test_unit_diag_minimizer_examples():
    L, R = unit_diag_minimizer(np.eye(3))
    assert np.allclose(L, np.eye(3)) and np.allclose(R, np.eye(3))
    X = np.array([[1.0, 0.0], [0.5, 1.0]])
    L, R = unit_diag_minimizer(X)
    C = np.linalg.cholesky(X @ X.T)
    ldu_lower = C / np.diagonal(C)
    assert np.allclose(L, ldu_lower, atol=1e-14)
    assert np.allclose(L, X, atol=1e-14)


@given(seeds)
def test_unit_diag_minimizer_structure(seed):
    X = wide(seed, 3, 6)
    L, R = unit_diag_minimizer(X)
    assert np.allclose(np.diagonal(L), 1.0) and np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ R - X) <= 1e-11 * np.linalg.norm(X)
    G = R @ R.T
    assert np.linalg.norm(G - np.diag(np.diagonal(G))) <= 1e-11 * np.linalg.norm(G)


def test_closed_forms_match_optimizers():
    for seed in range(5):
        X = wide(300 + seed, 3, 6)
        assert np.allclose(diag_minimizer(X), oracle_diag(X), atol=1e-6)
        L, _ = unit_diag_minimizer(X)
        Lo = oracle_unit_diag(X)
        assert abs(crit(L, X) - crit(Lo, X)) <= 1e-6 * crit(Lo, X)
