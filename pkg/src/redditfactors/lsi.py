"""Latent semantic indexing via truncated SVD of a term-document matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, svds

from .vectorize import TermDocumentMatrix

DENSE_LIMIT = 200


class LsiDimensionError(ValueError):
    pass


class LsiConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LsiModel:
    j: int
    singular_values: np.ndarray   # (j,), descending
    term_basis: np.ndarray        # (m, j), orthonormal columns
    doc_projection: np.ndarray    # (j, n), leading rows of V^T

    def reconstruct(self) -> np.ndarray:
        return (self.term_basis * self.singular_values) @ self.doc_projection


def _fix_signs(U, s, Vt):
    # Largest-|.| entry of each left singular vector made positive.
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, s, Vt * signs[:, None]


def dense_svd(A, j: int):
    """Top-``j`` singular triplets by full LAPACK SVD."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return _fix_signs(U[:, :j], s[:j], Vt[:j])


def _sparse_svd(A, j: int, seed: int = 0):
    m, n = A.shape
    rng = np.random.default_rng(seed)
    v0 = rng.uniform(-1, 1, size=min(m, n))
    try:
        U, s, Vt = svds(sp.csr_matrix(A, dtype=float), k=j, v0=v0, maxiter=10 * max(m, n))
    except (ArpackNoConvergence, ArpackError) as exc:
        raise LsiConvergenceError(str(exc)) from exc
    order = np.argsort(-s, kind="stable")
    return _fix_signs(U[:, order], s[order], Vt[order])


def fit_lsi(A, j: int, solver: str = "auto") -> LsiModel:
    """Fit a rank-``j`` LSI model.

    ``solver`` is ``"dense"`` (LAPACK), ``"arpack"`` (iterative, sparse) or
    ``"auto"``, which goes dense when both dimensions are at most 200 or when
    ``j`` equals the full rank bound (ARPACK needs ``j < min(m, n)``).
    """
    X = A.weights if isinstance(A, TermDocumentMatrix) else A
    m, n = X.shape
    if not 1 <= j <= min(m, n):
        raise LsiDimensionError(f"j={j} outside [1, {min(m, n)}] for a {m}x{n} matrix")
    if solver == "auto":
        solver = "dense" if max(m, n) <= DENSE_LIMIT or j >= min(m, n) else "arpack"
    if solver == "dense":
        U, s, Vt = dense_svd(X, j)
    elif solver == "arpack":
        if j >= min(m, n):
            raise LsiDimensionError("arpack solver needs j < min(m, n)")
        U, s, Vt = _sparse_svd(X, j)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    s = np.clip(s, 0.0, None)
    return LsiModel(j, s, U, Vt)


def project_documents(model: LsiModel, normalize: bool = True) -> np.ndarray:
    """Document vectors as rows: columns of the truncated ``V^T``.

    Rows are scaled to unit length so Euclidean distance ranks like cosine
    similarity; all-zero documents stay at the origin.
    """
    X = np.array(model.doc_projection.T, dtype=float)
    if normalize:
        norms = np.linalg.norm(X, axis=1)
        nz = norms > 0
        X[nz] /= norms[nz, None]
    return X


def reconstruction_error(A, model: LsiModel) -> float:
    X = A.weights if isinstance(A, TermDocumentMatrix) else A
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)
    return float(np.linalg.norm(X - model.reconstruct()))
