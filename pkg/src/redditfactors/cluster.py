"""k-means with silhouette scoring and an LSI-dimension x cluster-count grid search."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .lsi import fit_lsi, project_documents
from .vectorize import (DEFAULT_MIN_DF, DEFAULT_NGRAM_RANGE, EmptyVocabularyError,
                        TermDocumentMatrix, build_vocabulary, tfidf_matrix, tokenize)

logger = logging.getLogger(__name__)

DEFAULT_J_RANGE = tuple(range(2, 11))
DEFAULT_K_RANGE = tuple(range(2, 9))


class InfeasibleClusteringError(ValueError):
    pass


class SingleClusterError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterSolution:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    avg_silhouette: float
    seed: int
    history: tuple = ()


def _sq_dists(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkj,nkj->nk", diff, diff)


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # only reachable with fewer distinct points than k
            raise InfeasibleClusteringError("ran out of distinct points while seeding")
        idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _repair_empty(X, C, a, k):
    """Move the point farthest from its centroid into each empty cluster."""
    C = C.copy()
    a = a.copy()
    counts = np.bincount(a, minlength=k)
    for e in np.flatnonzero(counts == 0):
        d = ((X - C[a]) ** 2).sum(axis=1)
        d[counts[a] < 2] = -1.0
        p = int(np.argmax(d))
        counts[a[p]] -= 1
        a[p] = e
        counts[e] = 1
        C[e] = X[p]
    return C, a


def _count_distinct(X, limit, rtol=1e-12):
    """Distinct rows of ``X``, stopping once ``limit`` are found.

    Rows closer than ``rtol`` times the data scale count as one point, so
    duplicate documents that picked up rounding noise in the projection
    are not mistaken for separate points.
    """
    tol2 = (rtol * max(1.0, float(np.abs(X).max(initial=0.0)))) ** 2
    reps = []
    for x in X:
        if all(((x - r) ** 2).sum() > tol2 for r in reps):
            reps.append(x)
            if len(reps) >= limit:
                break
    return len(reps)


def _means(X, a, k):
    C = np.zeros((k, X.shape[1]))
    np.add.at(C, a, X)
    return C / np.bincount(a, minlength=k)[:, None]


def _canonical(a, C):
    # Relabel clusters in order of first appearance.
    order = list(dict.fromkeys(a.tolist()))
    remap = np.empty(len(C), dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[a], C[order]


def _lloyd(X, k, rng, max_iter):
    C = _kmeanspp(X, k, rng)
    D = _sq_dists(X, C)
    a = np.argmin(D, axis=1)
    history = [float(D[np.arange(len(X)), a].sum())]
    for _ in range(max_iter):
        C, a = _repair_empty(X, C, a, k)
        C = _means(X, a, k)
        D = _sq_dists(X, C)
        a_new = np.argmin(D, axis=1)
        inertia = float(D[np.arange(len(X)), a_new].sum())
        if inertia > history[-1] + 1e-12 * max(1.0, history[-1]):
            raise AssertionError("Lloyd inertia increased")
        history.append(inertia)
        if np.array_equal(a_new, a):
            break
        a = a_new
    else:
        C, a = _repair_empty(X, C, a_new, k)
        C = _means(X, a, k)
        history.append(float(_sq_dists(X, C)[np.arange(len(X)), a].sum()))
    return a, C, history


def kmeans(points, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300,
           score: bool = True) -> ClusterSolution:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Restart ``r`` draws from ``default_rng([seed, r])``; the lowest-inertia
    run wins, earliest restart on ties. Labels are renumbered by first
    appearance in ``points``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1 or restarts < 1:
        raise ValueError("k and restarts must be positive")
    n_distinct = _count_distinct(X, limit=k)
    if k > n_distinct:
        raise InfeasibleClusteringError(f"k={k} exceeds {n_distinct} distinct points")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        a, C, hist = _lloyd(X, k, rng, max_iter)
        if best is None or hist[-1] < best[2][-1]:
            best = (a, C, hist)
    a, C, hist = best
    a, C = _canonical(a, C)
    sil = silhouette(X, a) if (score and k >= 2) else float("nan")
    return ClusterSolution(k, a, C, hist[-1], sil, seed, tuple(hist))


def silhouette(points, assignments, chunk: int = 1024) -> float:
    """Mean silhouette width under Euclidean distance.

    Points in singleton clusters score 0, as do points with ``a == b == 0``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels, a_idx = np.unique(np.asarray(assignments), return_inverse=True)
    k = len(labels)
    if k < 2:
        raise SingleClusterError("silhouette needs at least two clusters")
    n = len(X)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), a_idx] = 1.0
    sizes = onehot.sum(axis=0)
    s = np.zeros(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        S = cdist(X[lo:hi], X) @ onehot
        own = a_idx[lo:hi]
        rows = np.arange(hi - lo)
        own_size = sizes[own]
        a = np.where(own_size > 1, S[rows, own] / np.maximum(own_size - 1, 1), 0.0)
        other = S / sizes
        other[rows, own] = np.inf
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(denom > 0, (b - a) / denom, 0.0)
        val[own_size == 1] = 0.0
        s[lo:hi] = val
    return float(s.mean())


@dataclass
class GridSearchResult:
    table: dict                      # (j, k) -> avg silhouette, nan when the cell failed
    best_j: int
    best_k: int
    best: ClusterSolution
    errors: dict = field(default_factory=dict)

    def rows(self):
        return [(j, k, v) for (j, k), v in sorted(self.table.items())]


def cell_seed(seed: int, j: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, j, k]).generate_state(1)[0])


def grid_search(tfidf, j_range: Sequence[int] = DEFAULT_J_RANGE,
                k_range: Sequence[int] = DEFAULT_K_RANGE, seed: int = 0,
                restarts: int = 10, max_workers: int = 1,
                solver: str = "auto") -> GridSearchResult:
    """Pick (j, k) maximizing the average silhouette.

    Ties go to the smaller k, then the smaller j. Cells whose LSI fit or
    clustering fails are recorded as NaN with the error message kept in
    ``errors``.
    """
    j_range, k_range = sorted(set(j_range)), sorted(set(k_range))
    if not j_range or not k_range:
        raise ValueError("j_range and k_range must be non-empty")
    table, errors, solutions = {}, {}, {}

    def run_j(j):
        out = {}
        try:
            vecs = project_documents(fit_lsi(tfidf, j, solver=solver))
        except Exception as exc:  # noqa: BLE001 - recorded per cell
            return {k: exc for k in k_range}
        for k in k_range:
            try:
                out[k] = kmeans(vecs, k, seed=cell_seed(seed, j, k), restarts=restarts)
            except Exception as exc:  # noqa: BLE001
                out[k] = exc
        return out

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = dict(zip(j_range, pool.map(run_j, j_range)))
    else:
        results = {j: run_j(j) for j in j_range}

    for j in j_range:
        for k in k_range:
            res = results[j][k]
            if isinstance(res, Exception):
                table[(j, k)] = float("nan")
                errors[(j, k)] = f"{type(res).__name__}: {res}"
            else:
                table[(j, k)] = res.avg_silhouette
                solutions[(j, k)] = res

    scored = [(v, -k, -j) for (j, k), v in table.items() if not math.isnan(v)]
    if not scored:
        raise InsufficientDataError(f"every grid cell failed: {errors}")
    _, nk, nj = max(scored)
    return GridSearchResult(table, -nj, -nk, solutions[(-nj, -nk)], errors)


@dataclass(frozen=True)
class GridConfig:
    j_range: tuple = DEFAULT_J_RANGE
    k_range: tuple = DEFAULT_K_RANGE
    seed: int = 0
    restarts: int = 10
    min_df: int = DEFAULT_MIN_DF
    ngram_range: tuple = DEFAULT_NGRAM_RANGE
    max_workers: int = 1


@dataclass
class Classification:
    classes: dict                    # comment id -> class index
    grid: GridSearchResult
    tfidf: TermDocumentMatrix

    @property
    def k(self) -> int:
        return self.grid.best_k


def classify_corpus(comments, stopwords=frozenset(), config: GridConfig = GridConfig()) -> Classification:
    """Vectorize one stock's comments, reduce, cluster and label each comment."""
    comments = list(comments)
    if len(comments) < max(2, min(config.k_range)):
        raise InsufficientDataError(
            f"{len(comments)} comments is too few for k in {config.k_range}"
        )
    docs = [tokenize(c.body) for c in comments]
    try:
        vocab = build_vocabulary(docs, stopwords, min_df=config.min_df,
                                 ngram_range=config.ngram_range)
    except EmptyVocabularyError as exc:
        raise InsufficientDataError(str(exc)) from exc
    tdm = tfidf_matrix(docs, vocab, [c.id for c in comments])
    limit = min(tdm.shape)
    j_range = [j for j in config.j_range if j <= limit]
    if not j_range:
        raise InsufficientDataError(f"matrix {tdm.shape} too small for j in {config.j_range}")
    grid = grid_search(tdm, j_range, config.k_range, seed=config.seed,
                       restarts=config.restarts, max_workers=config.max_workers)
    classes = {c.id: int(a) for c, a in zip(comments, grid.best.assignments)}
    return Classification(classes, grid, tdm)
