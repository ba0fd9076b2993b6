"""Eigendecomposition and spectral embeddings of graphs.

The adjacency spectral embedding keeps the d eigenpairs of largest
eigenvalue magnitude and returns latent-position rows scaled by
sqrt(|eigenvalue|) per column (the usual adjacency-embedding convention;
pass ``scaled=False`` for the bare orthonormal eigenvector rows). The
Laplacian variant embeds D^{-1/2} A D^{-1/2} with the convention 0/0 = 0
for isolated nodes and returns unscaled eigenvector rows.

Small or dense problems use a full dense symmetric eigendecomposition;
large sparse ones go through ARPACK's implicitly restarted Lanczos with a
fixed starting vector, so identical inputs always produce bit-identical
embeddings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import IO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, eigsh

from .errors import NumericalError
from .netcore import Graph, degrees

# Dense path whenever n <= this or d is a large fraction of n; ARPACK needs
# k well below n and is only worthwhile on genuinely sparse problems.
_DENSE_CUTOFF = 512
_DENSE_FALLBACK_MAX_N = 8192

_SYM_TOL = 1e-10


class EmbeddingSource(enum.Enum):
    ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True, eq=False)
class Embedding:
    """n x d matrix of estimated latent positions plus retained eigenvalues.

    ``rows[i]`` is the i-th latent position; ``eigenvalues`` are sorted by
    decreasing magnitude. Columns follow the sign convention that the entry
    of largest absolute value in each underlying eigenvector is
    nonnegative. ``scaled`` records whether columns carry the
    sqrt(|eigenvalue|) factor.
    """

    rows: np.ndarray
    eigenvalues: np.ndarray
    source: EmbeddingSource
    d: int
    scaled: bool = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return (
            self.source == other.source
            and self.d == other.d
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
        )

    __hash__ = None


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the largest-|entry| coordinate of each
    column is nonnegative (first occurrence wins on ties)."""
    v = vectors.copy()
    for col in range(v.shape[1]):
        pivot = int(np.argmax(np.abs(v[:, col])))
        if v[pivot, col] < 0:
            v[:, col] = -v[:, col]
    return v


def _order_by_magnitude(values: np.ndarray, vectors: np.ndarray, d: int):
    # stable sort keeps the solver's original order among magnitude ties
    order = np.argsort(-np.abs(values), kind="stable")[:d]
    return values[order], vectors[:, order]


def top_eigenpairs(matrix: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """The d eigenpairs of a dense symmetric matrix with largest |eigenvalue|.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted by
    decreasing magnitude and sign-fixed eigenvectors as columns.

    Raises ``ValueError`` if d > n or the matrix is not symmetric within
    1e-10 (relative to its largest entry).
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    n = m.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"d must be in [1, {n}], got {d}")
    scale = max(1.0, float(np.max(np.abs(m)))) if n else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > _SYM_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance 1e-10")
    values, vectors = np.linalg.eigh(m)
    values, vectors = _order_by_magnitude(values, vectors, d)
    return values, _fix_signs(vectors)


def _arpack_start_vector(n: int) -> np.ndarray:
    # fixed pseudo-random direction: deterministic and almost surely not
    # orthogonal to any target eigenvector
    v0 = np.random.default_rng(0x5EED_1A9C).standard_normal(n)
    return v0 / np.linalg.norm(v0)


def _top_eigenpairs_sparse(matrix: sp.spmatrix, d: int):
    try:
        values, vectors = eigsh(
            matrix, k=d, which="LM", v0=_arpack_start_vector(matrix.shape[0])
        )
    except ArpackError as exc:
        n = matrix.shape[0]
        if n <= _DENSE_FALLBACK_MAX_N:
            return top_eigenpairs(matrix.toarray(), d)
        raise NumericalError(f"Lanczos failed for n={n}, d={d}: {exc}") from exc
    values, vectors = _order_by_magnitude(values, vectors, d)
    return values, _fix_signs(vectors)


def _embed(matrix_sparse: sp.spmatrix, d: int) -> tuple[np.ndarray, np.ndarray]:
    n = matrix_sparse.shape[0]
    sparse_ok = n > _DENSE_CUTOFF and d <= n // 8 and matrix_sparse.nnz > 0
    if sparse_ok:
        return _top_eigenpairs_sparse(matrix_sparse, d)
    return top_eigenpairs(matrix_sparse.toarray(), d)


def dense_adjacency(g: Graph) -> np.ndarray:
    """Materialize the full n x n adjacency matrix (float64)."""
    return g.adjacency.toarray()


def ase(g: Graph, d: int, scaled: bool = True) -> Embedding:
    """Adjacency spectral embedding of the graph into R^d.

    Columns are the eigenvectors of A for the d largest-magnitude
    eigenvalues; with ``scaled`` (the default) each column is multiplied by
    sqrt(|eigenvalue|), so the rows are latent positions in the usual
    adjacency-embedding scale. ``scaled=False`` returns the orthonormal
    eigenvector rows themselves.
    """
    if not 1 <= d <= g.n:
        raise ValueError(f"embedding dimension d must be in [1, {g.n}], got {d}")
    values, vectors = _embed(g.adjacency, d)
    if scaled:
        vectors = vectors * np.sqrt(np.abs(values))[None, :]
    return Embedding(
        rows=vectors, eigenvalues=values, source=EmbeddingSource.ADJACENCY,
        d=d, scaled=scaled,
    )


def laplacian_embedding(g: Graph, d: int, regularize: bool = False) -> Embedding:
    """Spectral embedding of L = D^{-1/2} A D^{-1/2}.

    Isolated nodes contribute zero rows/columns to L (0/0 = 0 convention).
    With ``regularize`` each nonzero row of the eigenvector matrix is
    rescaled to unit Euclidean norm (degree-corrected spectral clustering
    normalization); zero rows stay zero.
    """
    if not 1 <= d <= g.n:
        raise ValueError(f"embedding dimension d must be in [1, {g.n}], got {d}")
    deg = degrees(g).astype(np.float64)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    scaling = sp.diags(inv_sqrt)
    lap = scaling @ g.adjacency @ scaling
    values, vectors = _embed(lap.tocsr(), d)
    if regularize:
        vectors = vectors.copy()
        norms = np.linalg.norm(vectors, axis=1)
        keep = norms > 1e-12
        vectors[keep] /= norms[keep, None]
        vectors[~keep] = 0.0
    return Embedding(
        rows=vectors, eigenvalues=values, source=EmbeddingSource.LAPLACIAN,
        d=d, scaled=False,
    )


def write_embedding_csv(emb: Embedding, stream: IO[str]) -> None:
    """Debug CSV dump: header "d1,...,dd", eigenvalue line, then one line
    per node, all values with 17 significant digits."""
    d = emb.d
    stream.write(",".join(f"d{i + 1}" for i in range(d)) + "\n")
    stream.write(",".join(f"{v:.17g}" for v in emb.eigenvalues) + "\n")
    for row in emb.rows:
        stream.write(",".join(f"{v:.17g}" for v in row) + "\n")
