import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from redditfactors.lsi import (
    LsiDimensionError,
    dense_svd,
    fit_lsi,
    project_documents,
    reconstruction_error,
)
from redditfactors.vectorize import vectorize


def eig_singular_values(A):
    """sqrt of the eigenvalues of A^T A, descending."""
    w = np.linalg.eigvalsh(A.T @ A)[::-1]
    return np.sqrt(np.clip(w, 0, None))


def test_identity():
    m = fit_lsi(np.eye(2), 2)
    np.testing.assert_allclose(m.singular_values, [1, 1])
    np.testing.assert_allclose(m.reconstruct(), np.eye(2), atol=1e-15)
    P = project_documents(m)
    assert P @ P.T == pytest.approx(np.eye(2), abs=1e-15)


def test_rank_one():
    u = np.array([3.0, 4.0]) / 5
    v = np.array([1.0, 2.0, 2.0]) / 3
    A = np.outer(u, v)
    m = fit_lsi(A, 1)
    np.testing.assert_allclose(m.singular_values, [1.0], rtol=1e-14)
    assert reconstruction_error(A, m) < 1e-14


def test_random_5x8_full_rank_reconstruction():
    A = np.random.default_rng(0).random((5, 8))
    m = fit_lsi(A, 5)
    assert reconstruction_error(A, m) < 1e-10
    np.testing.assert_allclose(m.singular_values, eig_singular_values(A)[:5], rtol=1e-10)


def test_best_rank_j_error_matches_tail_singular_values():
    A = np.random.default_rng(1).random((12, 9))
    s = eig_singular_values(A)
    for j in range(1, 10):
        err = reconstruction_error(A, fit_lsi(A, j))
        assert err == pytest.approx(np.sqrt((s[j:9] ** 2).sum()), abs=1e-8)


@pytest.mark.parametrize("j", [0, 6])
def test_dimension_errors(j):
    with pytest.raises(LsiDimensionError):
        fit_lsi(np.ones((5, 8)), j)


def test_arpack_rejects_full_rank_request():
    with pytest.raises(LsiDimensionError):
        fit_lsi(np.random.default_rng(0).random((4, 6)), 4, solver="arpack")


def test_unknown_solver():
    with pytest.raises(ValueError):
        fit_lsi(np.eye(3), 1, solver="magic")


def test_arpack_agrees_with_dense():
    A = sp.random(300, 250, density=0.05, random_state=3, format="csc")
    dense = fit_lsi(A, 6, solver="dense")
    sparse = fit_lsi(A, 6, solver="arpack")
    np.testing.assert_allclose(sparse.singular_values, dense.singular_values, rtol=1e-10)
    # Sign convention makes the factors themselves agree.
    np.testing.assert_allclose(sparse.term_basis, dense.term_basis, atol=1e-8)
    np.testing.assert_allclose(sparse.doc_projection, dense.doc_projection, atol=1e-8)


def test_auto_solver_uses_arpack_for_large_input():
    A = sp.random(400, 260, density=0.03, random_state=4, format="csc")
    m = fit_lsi(A, 3)
    np.testing.assert_allclose(m.singular_values, fit_lsi(A, 3, solver="dense").singular_values, rtol=1e-10)


def test_sign_convention():
    A = np.random.default_rng(5).normal(size=(7, 6))
    m = fit_lsi(A, 4)
    for col in m.term_basis.T:
        assert col[np.argmax(np.abs(col))] > 0
    # Flipping A's sign flips the projections but not the basis orientation rule.
    m2 = fit_lsi(-A, 4)
    for col in m2.term_basis.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_basis_orthonormal():
    A = np.random.default_rng(6).random((15, 11))
    m = fit_lsi(A, 5)
    np.testing.assert_allclose(m.term_basis.T @ m.term_basis, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(m.doc_projection @ m.doc_projection.T, np.eye(5), atol=1e-12)


def test_duplicate_documents_identical_vectors():
    A = np.random.default_rng(7).random((6, 5))
    A = np.hstack([A, A[:, [2]]])
    P = project_documents(fit_lsi(A, 4))
    np.testing.assert_allclose(P[2], P[5], rtol=0, atol=1e-14)


def test_two_groups_collapse_to_two_points():
    a = np.array([1.0, 2.0, 0.0, 0.0, 1.0])
    b = np.array([0.0, 0.0, 3.0, 1.0, 0.5])
    A = np.column_stack([a] * 6 + [b] * 4)
    P = project_documents(fit_lsi(A, 2))
    distinct = np.unique(np.round(P, 12), axis=0)
    assert len(distinct) == 2
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0)


def test_zero_document_stays_at_origin():
    A = np.array([[1.0, 0.0, 2.0], [0.0, 0.0, 1.0], [3.0, 0.0, 0.0]])
    P = project_documents(fit_lsi(A, 2))
    np.testing.assert_array_equal(P[1], 0.0)


def test_accepts_term_document_matrix():
    tdm = vectorize(["tsla moon", "tsla puts", "moon puts", "tsla moon puts"], min_df=1, ngram_range=(1, 1))
    m = fit_lsi(tdm, 2)
    assert m.doc_projection.shape == (2, 4)
    s = eig_singular_values(tdm.dense())
    np.testing.assert_allclose(m.singular_values, s[:2], rtol=1e-10)


matrices = st.tuples(st.integers(2, 12), st.integers(2, 12)).flatmap(
    lambda mn: arrays(np.float64, mn, elements=st.floats(0, 5, allow_subnormal=False)))


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_singular_values_match_eigen_oracle(A):
    r = min(A.shape)
    m = fit_lsi(A, r)
    np.testing.assert_allclose(m.singular_values, eig_singular_values(A)[:r], atol=1e-6)
    errs = [reconstruction_error(A, fit_lsi(A, j)) for j in range(1, r + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 9), st.integers(3, 9), st.randoms(use_true_random=False))
def test_column_permutation_permutes_projections(m, n, rnd):
    A = np.random.default_rng(rnd.randint(0, 2**32 - 1)).random((m, n))
    perm = list(range(n))
    rnd.shuffle(perm)
    j = min(m, n) - 1
    P = project_documents(fit_lsi(A, j))
    Q = project_documents(fit_lsi(A[:, perm], j))
    np.testing.assert_allclose(Q, P[perm], atol=1e-9)


def test_dense_svd_sparse_input():
    A = sp.csc_matrix(np.diag([3.0, 1.0, 2.0]))
    U, s, Vt = dense_svd(A, 2)
    np.testing.assert_allclose(s, [3.0, 2.0])
