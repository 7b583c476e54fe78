import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrtface import linalg
from oracles import jacobi_svd, planted_rank, power_norm


def _orthonormal_cols(M, tol=1e-10):
    return np.abs(M.T @ M - np.eye(M.shape[1])).max() <= tol


def test_svd_identity():
    np.testing.assert_allclose(linalg.svd(np.eye(3)).singular_values, [1, 1, 1])


def test_svd_diagonal():
    res = linalg.svd(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(res.singular_values, [3, 2, 1])
    np.testing.assert_allclose(np.abs(res.U), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.abs(res.V), np.eye(3), atol=1e-12)


def test_svd_random_matches_jacobi(rng):
    A = rng.standard_normal((5, 4))
    res = linalg.svd(A)
    _, s_ref, _ = jacobi_svd(A)
    np.testing.assert_allclose(res.singular_values, s_ref, rtol=1e-12)
    assert np.linalg.norm(res.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
    assert _orthonormal_cols(res.U) and _orthonormal_cols(res.V)


def test_svd_full_factors_square(rng):
    res = linalg.svd(rng.standard_normal((6, 3)), full=True)
    assert res.U.shape == (6, 6) and res.V.shape == (3, 3)
    assert _orthonormal_cols(res.U)


def test_svd_large_round_trip(rng):
    A = rng.standard_normal((400, 400))
    res = linalg.svd(A)
    assert np.linalg.norm(res.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 30), n=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_svd_invariants(m, n, seed):
    A = np.random.default_rng(seed).standard_normal((m, n))
    res = linalg.svd(A)
    s = res.singular_values
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert _orthonormal_cols(res.U) and _orthonormal_cols(res.V)
    assert np.linalg.norm(res.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)


def test_svd_rank_at():
    res = linalg.svd(np.diag([3.0, 2.0, 1e-9]))
    assert res.rank_at(1e-6) == 2
    with pytest.raises(ValueError):
        res.rank_at(0)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_rejected(bad):
    A = np.eye(3)
    A[1, 2] = bad
    for fn in (linalg.svd, linalg.nuclear_norm, linalg.spectral_norm):
        with pytest.raises(ValueError, match="non-finite"):
            fn(A)


def test_nuclear_norm_examples():
    assert linalg.nuclear_norm(np.zeros((4, 4))) == 0
    assert linalg.nuclear_norm(np.diag([3.0, 2.0, 1.0])) == pytest.approx(6.0, abs=1e-12)


def test_nuclear_norm_random_frozen():
    # sum of one-sided Jacobi singular values of default_rng(0).standard_normal((6, 5))
    A = np.random.default_rng(0).standard_normal((6, 5))
    assert linalg.nuclear_norm(A) == pytest.approx(8.71778786247326, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
def test_nuclear_norm_homogeneous(seed, c):
    A = np.random.default_rng(seed).standard_normal((5, 7))
    assert linalg.nuclear_norm(c * A) == pytest.approx(abs(c) * linalg.nuclear_norm(A), rel=1e-10)


def test_spectral_norm_examples(rng):
    assert linalg.spectral_norm(np.diag([3.0, 2.0, 1.0])) == pytest.approx(3.0)
    u = rng.standard_normal(4)
    v = rng.standard_normal(6)
    outer = np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
    assert linalg.spectral_norm(outer) == pytest.approx(1.0, abs=1e-12)


def test_spectral_norm_random_frozen():
    # power iteration on A^T A for default_rng(1).standard_normal((5, 7))
    A = np.random.default_rng(1).standard_normal((5, 7))
    assert linalg.spectral_norm(A) == pytest.approx(4.414371109482137, abs=1e-8)
    assert linalg.spectral_norm(A) == pytest.approx(power_norm(A, seed=7), abs=1e-8)


def test_numerical_rank_examples(rng):
    assert linalg.numerical_rank(np.eye(3), 0.5) == 3
    assert linalg.numerical_rank(np.zeros((4, 5)), 1e-3) == 0
    a, b = rng.standard_normal((10, 2)), rng.standard_normal((8, 2))
    A = np.outer(a[:, 0], b[:, 0]) + np.outer(a[:, 1], b[:, 1]) + 1e-9 * rng.standard_normal((10, 8))
    assert linalg.numerical_rank(A, 1e-6) == 2


@pytest.mark.parametrize("delta", [0.0, -1.0])
def test_nonpositive_delta_rejected(delta, rng):
    with pytest.raises(ValueError):
        linalg.numerical_rank(np.eye(2), delta)
    with pytest.raises(ValueError):
        linalg.norm_subdifferential(np.eye(2), delta, rng)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(1, 12), n=st.integers(1, 12), r=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_norm_inequality(m, n, r, seed):
    r = min(r, m, n)
    A = planted_rank(np.random.default_rng(seed), m, n, r)
    spec, nuc = linalg.spectral_norm(A), linalg.nuclear_norm(A)
    assert spec <= nuc + 1e-10 * nuc
    assert nuc <= r * spec + 1e-10 * nuc


# ---- subgradient sampling ----------------------------------------------------


def _subgrad_ok(G, A, delta):
    n = min(A.shape)
    return (linalg.spectral_norm(G) <= 1 + 1e-8
            and np.trace(G.T @ A) >= linalg.nuclear_norm(A) - n * delta)


def test_subdifferential_full_rank_is_UVt(rng):
    A = rng.standard_normal((6, 4))
    delta = 1e-4 * linalg.spectral_norm(A)
    G = linalg.norm_subdifferential(A, delta, rng)
    U, s, V = jacobi_svd(A)
    np.testing.assert_allclose(G, U @ V.T, atol=1e-10)
    assert np.trace(G.T @ A) == pytest.approx(linalg.nuclear_norm(A), rel=1e-12)


def test_subdifferential_zero_matrix(rng):
    G = linalg.norm_subdifferential(np.zeros((5, 3)), 1e-3, rng)
    assert G.shape == (5, 3)
    assert linalg.spectral_norm(G) == pytest.approx(1.0, abs=1e-12)


def test_subdifferential_rank_deficient_characterization(rng):
    # 6x4 with singular values (5, 3, 1e-6, 1e-7); delta = 1e-3 drops the last two
    Q1 = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    Q2 = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    A = Q1[:, :4] @ np.diag([5.0, 3.0, 1e-6, 1e-7]) @ Q2.T
    delta = 1e-3
    G = linalg.norm_subdifferential(A, delta, rng)
    assert _subgrad_ok(G, A, delta)

    U, s, V = jacobi_svd(A)
    U1, V1 = U[:, :2], V[:, :2]
    W = G - U1 @ V1.T
    # subdifferential of the nuclear norm at the thresholded matrix:
    # U1 V1^T + W with U1^T W = 0, W V1 = 0, ||W|| <= 1
    assert np.abs(U1.T @ W).max() <= 1e-10
    assert np.abs(W @ V1).max() <= 1e-10
    assert linalg.spectral_norm(W) <= 1 + 1e-10
    assert linalg.spectral_norm(W) == pytest.approx(1.0, abs=1e-10)


def test_subdifferential_wide_uses_transpose(rng):
    A = planted_rank(rng, 3, 7, 2)
    delta = 1e-6
    G = linalg.norm_subdifferential(A, delta, rng)
    assert G.shape == A.shape
    assert _subgrad_ok(G, A, delta)


def test_subdifferential_reproducible():
    A = planted_rank(np.random.default_rng(5), 8, 5, 2)
    G1 = linalg.norm_subdifferential(A, 1e-6, np.random.default_rng(9))
    G2 = linalg.norm_subdifferential(A, 1e-6, np.random.default_rng(9))
    np.testing.assert_array_equal(G1, G2)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(1, 10), n=st.integers(1, 10), r=st.integers(0, 10),
       rel=st.sampled_from([1e-8, 1e-4, 1e-2]), seed=st.integers(0, 2**32 - 1))
def test_subdifferential_valid(m, n, r, rel, seed):
    rng = np.random.default_rng(seed)
    r = min(r, m, n)
    A = planted_rank(rng, m, n, r) if r else np.zeros((m, n))
    delta = linalg.resolve_delta(A, rel)
    assert _subgrad_ok(linalg.norm_subdifferential(A, delta, rng), A, delta)


def test_resolve_delta_policies():
    A = np.diag([4.0, 1.0])
    assert linalg.resolve_delta(A) == pytest.approx(4e-4)
    assert linalg.resolve_delta(A, 0.5, relative=False) == 0.5
    assert linalg.resolve_delta(np.zeros((2, 2))) > 0
