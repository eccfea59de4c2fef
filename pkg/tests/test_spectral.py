import numpy as np
import pytest

from holq import holq, hooi, hosvd_truncate, isvd, truncated_isvd, tucker_mult, unfold


def gram(core, k):
    Qk = unfold(core, k)
    return Qk @ Qk.T


def assert_isvd_structure(s, shape):
    for k, p in enumerate(shape[:-1]):
        Uk, dk = s.U[k], s.D[k]
        assert np.allclose(Uk @ Uk.T, np.eye(p), atol=1e-10)
        assert np.all(dk > 0) and np.all(np.diff(dk) <= 0)
        assert abs(np.prod(dk) - 1) <= 1e-8
        assert np.linalg.norm(gram(s.core, k) - np.eye(p) / p) < 1e-6
    assert s.U[-1] is None and s.D[-1] is None
    assert np.linalg.norm(s.core) == pytest.approx(1.0, abs=1e-12)


def test_isvd_is_core_rotation(rng):
    T = rng.standard_normal((3, 4, 20))
    s = isvd(T)
    d = holq(T)
    assert s.ell == pytest.approx(d.ell, rel=1e-12)
    assert np.linalg.norm(s.reconstruct() - d.reconstruct()) <= 1e-8 * np.linalg.norm(T)
    assert np.linalg.norm(s.reconstruct() - T) <= 1e-8 * np.linalg.norm(T)
    assert_isvd_structure(s, T.shape)


def test_isvd_matrix_singular_values():
    B = np.diag([2.0, 0.5])
    X = np.hstack([B, B])
    X /= np.linalg.norm(X)
    s = isvd(X)
    sv = np.linalg.svd(X, compute_uv=False)
    p = 2
    assert np.allclose(sv, s.ell * s.D[0] / np.sqrt(p), rtol=1e-10)


def test_isvd_of_scaled_all_orthonormal_input(rng):
    Q0 = holq(rng.standard_normal((3, 4, 20))).core
    s = isvd(Q0)
    assert s.ell == pytest.approx(1.0, rel=1e-6)
    for k in range(2):
        assert np.allclose(s.D[k], 1.0, atol=1e-6)
    # all singular values are equal, so U_k is only fixed up to a rotation
    # that the core absorbs; rotating back must give the input
    assert np.allclose(tucker_mult(s.U, s.core), Q0, atol=1e-6)


def test_isvd_exact_identity_factors():
    Q0 = np.zeros((2, 2, 4))
    for i in range(2):
        for j in range(2):
            Q0[i, j, i + 2 * j] = 0.5
    s = isvd(Q0)
    for k in range(2):
        assert np.allclose(s.U[k], np.eye(2), atol=1e-12)
        assert np.allclose(s.D[k], 1.0, atol=1e-12)
    assert np.allclose(s.core, Q0, atol=1e-12)
    assert s.ell == pytest.approx(1.0, rel=1e-12)


def test_isvd_is_deterministic(rng):
    T = rng.standard_normal((3, 3, 10))
    a, b = isvd(T), isvd(T.copy())
    for x, y in zip(a.U[:2], b.U[:2]):
        assert np.array_equal(x, y)
    assert np.array_equal(a.core, b.core)


def test_hooi_full_rank_is_exact(rng):
    T = rng.standard_normal((3, 4, 6))
    h = hooi(T, (3, 4))
    assert h.residual <= 1e-10 * np.linalg.norm(T)


def test_hooi_rank_one_tensor():
    rng = np.random.default_rng(3)
    a, b, c = (v / np.linalg.norm(v) for v in (rng.standard_normal(n) for n in (3, 4, 5)))
    T = np.einsum("i,j,k->ijk", a, b, c)
    h = hooi(T, (1, 1))
    assert h.residual <= 1e-12


def test_hooi_beats_truncated_hosvd(rng):
    for _ in range(5):
        T = rng.standard_normal((4, 4, 10))
        Vs, core = hosvd_truncate(T, (2, 2))
        hosvd_res = np.linalg.norm(T - tucker_mult(Vs, core))
        h = hooi(T, (2, 2))
        assert h.residual <= hosvd_res + 1e-12
        fit = np.array(h.fit_history)
        assert np.all(np.diff(fit) >= -1e-12 * fit[0])
        for V in h.factors[:2]:
            assert np.allclose(V.T @ V, np.eye(2), atol=1e-12)


def test_hooi_rejects_bad_ranks(rng):
    T = rng.standard_normal((3, 4, 5))
    with pytest.raises(ValueError):
        hooi(T, (4, 2))
    with pytest.raises(ValueError):
        hooi(T, (2,))


def test_truncated_isvd_matches_hooi(rng):
    T = rng.standard_normal((4, 4, 10))
    t = truncated_isvd(T, (2, 2))
    assert abs(t.residual - t.hooi.residual) <= 1e-10
    for k in range(2):
        assert np.allclose(t.U[k].T @ t.U[k], np.eye(2), atol=1e-10)
        assert abs(np.prod(t.D[k]) - 1) <= 1e-8
    assert t.core.shape == (2, 2, 10)


def test_truncated_isvd_full_rank_equals_isvd(rng):
    T = rng.standard_normal((3, 4, 12))
    t = truncated_isvd(T, (3, 4))
    s = isvd(T)
    assert t.residual <= 1e-10 * np.linalg.norm(T)
    assert t.ell == pytest.approx(s.ell, rel=1e-8)
    for k in range(2):
        assert np.allclose(t.U[k], s.U[k], atol=1e-7)
        assert np.allclose(t.D[k], s.D[k], atol=1e-7)
    assert np.allclose(t.core, s.core, atol=1e-7)


def test_truncated_isvd_rank_one():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal(3), rng.standard_normal(4)
    T = np.einsum("i,j,k->ijk", a, b, rng.standard_normal(6))
    t = truncated_isvd(T, (1, 1))
    assert t.residual <= 1e-12 * np.linalg.norm(T)
    assert np.allclose(t.D[0], [1.0]) and np.allclose(t.D[1], [1.0])
