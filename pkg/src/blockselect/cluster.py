"""Clustering objectives over spectral embeddings and their minimizers.

Three losses, one per blockmodel: squared distances to community centroids
(k-means geometry), squared residuals to the best rank-1 subspace per
community, and squared residuals to the best rank-K subspace per community.
The rank-r losses are minimized by a greedy alternation: refit each
community's subspace by SVD, reassign every point to the community whose
subspace is closest, repeat until the labels stop changing.

All minimizers are restarted from multiple seeded initializations; the best
objective wins, ties broken by restart index. Objectives are checked
non-increasing at every iteration (between empty-cluster repairs); a
violation raises ``NumericalError``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._seeds import derive_seed
from .errors import NumericalError
from .netcore import Graph
from .spectral import Embedding, EmbeddingSource, ase, laplacian_embedding, top_eigenpairs

_MAX_ROUNDS = 100
_MONOTONE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class ClusterSolution:
    """Labels plus per-cluster geometry for one minimized objective.

    ``centroids`` is set for the centroid loss; ``bases`` (one orthonormal
    d x r_k matrix per cluster, possibly rank-truncated) for the subspace
    losses. ``degenerate`` flags iteration-cap hits and clusters smaller
    than the requested rank.
    """

    labels: np.ndarray = field(repr=False)
    objective: float
    centroids: np.ndarray | None = field(default=None, repr=False)
    bases: list[np.ndarray] | None = field(default=None, repr=False)
    n_iters: int = 0
    n_restarts_used: int = 1
    degenerate: bool = False


# ---------------------------------------------------------------------------
# objective values
# ---------------------------------------------------------------------------

def q1_value(labels: np.ndarray, emb: Embedding) -> float:
    """Sum of squared distances from each row to its community mean."""
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for k in np.unique(labels):
        pts = emb.rows[labels == k]
        centroid = pts.mean(axis=0)
        total += float(((pts - centroid) ** 2).sum())
    return total


def q_subspace_value(labels: np.ndarray, emb: Embedding, r: int) -> float:
    """Sum of squared residuals to each community's best rank-r subspace.

    Equals sum_k ||M_k||_F^2 - ||V_k^T M_k||_F^2 where M_k stacks the
    community's rows as columns and V_k holds its top left singular
    vectors; computed as the trailing singular-value energy, which is the
    same quantity without cancellation.
    """
    if r < 1:
        raise ValueError("rank r must be >= 1")
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for k in np.unique(labels):
        pts = emb.rows[labels == k]
        svals = np.linalg.svd(pts, compute_uv=False)
        total += float((svals[min(r, svals.size):] ** 2).sum())
    return total


# ---------------------------------------------------------------------------
# centroid loss minimization (Lloyd + k-means++ restarts)
# ---------------------------------------------------------------------------

def _kmeanspp_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centroids = np.empty((k, rows.shape[1]))
    centroids[0] = rows[rng.integers(n)]
    d2 = ((rows - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = rows[idx]
        d2 = np.minimum(d2, ((rows - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _sq_dists(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        (rows**2).sum(axis=1)[:, None]
        - 2.0 * rows @ centroids.T
        + (centroids**2).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _repair_empty(labels: np.ndarray, point_cost: np.ndarray, k: int) -> bool:
    """Move the worst-fitting point from a cluster of size >= 2 into each
    empty cluster. Returns True if any repair happened."""
    repaired = False
    counts = np.bincount(labels, minlength=k + 1)
    for empty in range(1, k + 1):
        if counts[empty] > 0:
            continue
        movable = counts[labels] >= 2
        if not movable.any():  # unreachable when n >= k
            raise NumericalError("cannot repair empty cluster")
        cost = np.where(movable, point_cost, -np.inf)
        victim = int(np.argmax(cost))
        counts[labels[victim]] -= 1
        labels[victim] = empty
        counts[empty] += 1
        repaired = True
    return repaired


def _check_monotone(prev: float, new: float) -> None:
    if new > prev + _MONOTONE_RTOL * max(1.0, abs(prev)):
        raise NumericalError(
            f"objective increased within an iteration: {prev!r} -> {new!r}"
        )


def minimize_q1(
    emb: Embedding, k: int, n_restarts: int = 10, seed: int = 0
) -> ClusterSolution:
    """Minimize the centroid loss with Lloyd's algorithm, k-means++
    seeding, and ``n_restarts`` independent starts."""
    rows = emb.rows
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n_restarts < 1:
        raise ValueError("need at least one restart")
    best: ClusterSolution | None = None
    for restart in range(n_restarts):
        rng = np.random.default_rng(derive_seed(seed, "q1-restart", restart))
        centroids = _kmeanspp_init(rows, k, rng)
        labels = np.zeros(n, dtype=np.int64)
        prev_obj = np.inf
        degenerate = False
        for rounds in range(1, _MAX_ROUNDS + 1):
            d2 = _sq_dists(rows, centroids)
            new_labels = np.argmin(d2, axis=1) + 1
            repaired = _repair_empty(
                new_labels, d2[np.arange(n), new_labels - 1], k
            )
            for j in range(1, k + 1):
                centroids[j - 1] = rows[new_labels == j].mean(axis=0)
            obj = float(((rows - centroids[new_labels - 1]) ** 2).sum())
            if not repaired:
                _check_monotone(prev_obj, obj)
            prev_obj = obj
            if np.array_equal(new_labels, labels):
                labels = new_labels
                break
            labels = new_labels
        else:
            degenerate = True
            rounds = _MAX_ROUNDS
        objective = q1_value(labels, emb)
        if best is None or objective < best.objective:
            best = ClusterSolution(
                labels=labels,
                objective=objective,
                centroids=centroids.copy(),
                n_iters=rounds,
                n_restarts_used=n_restarts,
                degenerate=degenerate,
            )
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# subspace loss minimization (greedy projection / reassignment)
# ---------------------------------------------------------------------------

def _fit_bases(
    rows: np.ndarray, labels: np.ndarray, k: int, r: int
) -> tuple[list[np.ndarray], float, bool]:
    """Per-cluster top-r left singular bases of the stacked points, the
    resulting objective, and a truncation flag."""
    bases: list[np.ndarray] = []
    objective = 0.0
    truncated = False
    d = rows.shape[1]
    for j in range(1, k + 1):
        pts = rows[labels == j]
        if pts.shape[0] == 0:
            bases.append(np.zeros((d, 0)))
            truncated = True
            continue
        _, svals, vt = np.linalg.svd(pts, full_matrices=False)
        rank = min(r, svals.size)
        if rank < r and d > pts.shape[0]:
            truncated = True
        bases.append(vt[:rank].T)
        objective += float((svals[rank:] ** 2).sum())
    return bases, objective, truncated


def _residual_matrix(rows: np.ndarray, bases: list[np.ndarray]) -> np.ndarray:
    row_sq = (rows**2).sum(axis=1)
    res = np.empty((rows.shape[0], len(bases)))
    for j, basis in enumerate(bases):
        if basis.shape[1] == 0:
            res[:, j] = row_sq
        else:
            proj = rows @ basis
            res[:, j] = row_sq - (proj**2).sum(axis=1)
    return np.maximum(res, 0.0)


def _seed_labels(
    rows: np.ndarray, k: int, r: int, rng: np.random.Generator
) -> np.ndarray:
    """Random initial assignment seeded by candidate subspaces.

    Draws k disjoint random point subsets, spans each, and assigns every
    point to its nearest candidate span. Uniform random labels make all
    initial clusters span nearly the same space, which strands the greedy
    descent in poor basins; subset spans give genuinely distinct starts.
    """
    n, d = rows.shape
    size = max(1, min(r, n // k))
    idx = rng.permutation(n)
    bases = []
    for j in range(k):
        pts = rows[idx[j * size:(j + 1) * size]]
        q, _ = np.linalg.qr(pts.T)
        bases.append(q[:, : min(pts.shape[0], d)])
    res = _residual_matrix(rows, bases)
    labels = (np.argmin(res, axis=1) + 1).astype(np.int64)
    _repair_empty(labels, res[np.arange(n), labels - 1], k)
    return labels


def minimize_q_subspace(
    emb: Embedding,
    k: int,
    r: int,
    n_restarts: int = 20,
    seed: int = 0,
    init_labels: np.ndarray | None = None,
) -> ClusterSolution:
    """Greedy minimization of the rank-r subspace loss.

    Alternates refitting each community's rank-r basis with reassigning
    every point to the community of smallest projection residual (ties to
    the lowest community index). When ``init_labels`` is given the first
    restart starts from it; the rest start from random assignments.
    """
    rows = emb.rows
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if r < 1:
        raise ValueError("rank r must be >= 1")
    if n_restarts < 1:
        raise ValueError("need at least one restart")
    if init_labels is not None:
        init_labels = np.asarray(init_labels, dtype=np.int64)
        if init_labels.shape != (n,):
            raise ValueError("init_labels must have one entry per row")
        if len(np.unique(init_labels)) != k or init_labels.min() < 1 or init_labels.max() > k:
            raise ValueError("init_labels must use every community in [1, k]")
    best: ClusterSolution | None = None
    for restart in range(n_restarts):
        rng = np.random.default_rng(derive_seed(seed, "qsub-restart", restart))
        if restart == 0 and init_labels is not None:
            labels = init_labels.copy()
        else:
            labels = _seed_labels(rows, k, r, rng)
        bases, prev_obj, truncated = _fit_bases(rows, labels, k, r)
        rounds = 0
        converged = False
        while rounds < _MAX_ROUNDS:
            rounds += 1
            res = _residual_matrix(rows, bases)
            new_labels = (np.argmin(res, axis=1) + 1).astype(np.int64)
            repaired = _repair_empty(
                new_labels, res[np.arange(n), new_labels - 1], k
            )
            bases, obj, truncated = _fit_bases(rows, new_labels, k, r)
            if not repaired:
                _check_monotone(prev_obj, obj)
            prev_obj = obj
            if np.array_equal(new_labels, labels):
                converged = True
                break
            labels = new_labels
        # truncated reflects the final fit; rank-deficient clusters at the
        # solution and iteration-cap exits are both degeneracies
        degenerate = truncated or not converged
        objective = q_subspace_value(labels, emb, r)
        if best is None or objective < best.objective:
            best = ClusterSolution(
                labels=labels,
                objective=objective,
                bases=bases,
                n_iters=rounds,
                n_restarts_used=n_restarts,
                degenerate=degenerate,
            )
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# spectral-clustering baselines
# ---------------------------------------------------------------------------

def sc_l(g: Graph, k: int, n_restarts: int = 10, seed: int = 0) -> ClusterSolution:
    """K-means on the normalized-Laplacian embedding."""
    emb = laplacian_embedding(g, k, regularize=False)
    return minimize_q1(emb, k, n_restarts=n_restarts, seed=seed)


def rsc_l(g: Graph, k: int, n_restarts: int = 10, seed: int = 0) -> ClusterSolution:
    """K-means on the row-normalized Laplacian embedding."""
    emb = laplacian_embedding(g, k, regularize=True)
    return minimize_q1(emb, k, n_restarts=n_restarts, seed=seed)


def osc(g: Graph, k: int, n_restarts: int = 10, seed: int = 0) -> ClusterSolution:
    """Orthogonal subspace clustering baseline: spectral decomposition of
    U U^T built from the K^2-dimensional adjacency embedding (orthonormal
    eigenvector rows), then K-means on its top-K eigenvector rows."""
    emb = ase(g, k * k, scaled=False)
    gram = emb.rows @ emb.rows.T
    values, vectors = top_eigenpairs(gram, k)
    gram_emb = Embedding(
        rows=vectors, eigenvalues=values, source=EmbeddingSource.ADJACENCY, d=k
    )
    return minimize_q1(gram_emb, k, n_restarts=n_restarts, seed=seed)


# ---------------------------------------------------------------------------
# label alignment
# ---------------------------------------------------------------------------

def mislabel_rate(est_labels: np.ndarray, true_labels: np.ndarray, k: int) -> float:
    """Minimum fraction of disagreeing nodes over all bijections of the
    community labels. Exact: K! enumeration for K <= 8, otherwise the
    Hungarian assignment on the confusion matrix."""
    est = np.asarray(est_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if est.shape != true.shape:
        raise ValueError("label vectors must have equal length")
    for name, vec in (("est", est), ("true", true)):
        if vec.min() < 1 or vec.max() > k:
            raise ValueError(f"{name} labels must lie in [1, {k}]")
    n = est.size
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (est - 1, true - 1), 1)
    if k <= 8:
        best_match = max(
            sum(confusion[sigma[b], b] for b in range(k))
            for sigma in itertools.permutations(range(k))
        )
    else:
        rows_idx, cols_idx = linear_sum_assignment(-confusion)
        best_match = int(confusion[rows_idx, cols_idx].sum())
    return 1.0 - best_match / n
