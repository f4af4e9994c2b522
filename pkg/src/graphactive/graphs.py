"""Similarity graphs, graph Laplacians, and the regularized prior precision.

Graphs are built from feature vectors with a Gaussian kernel, either on exact
k-nearest-neighbor edges (symmetrized by elementwise max) or on all pairs for
small datasets. All structures are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InvalidParameterError, ResourceLimitError
from .instrument import counters

# Dense covariance work is quadratic in N; keep full graphs and posteriors
# under this node count.
DENSE_CAP = 5000

_KNN_CHUNK = 1024


def validate_features(X) -> np.ndarray:
    """Coerce to a float (N, d) array and check basic invariants."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidParameterError(f"feature matrix must be 2-D, got shape {X.shape}")
    n, d = X.shape
    if n < 2 or d < 1:
        raise InvalidParameterError(f"need N >= 2 and d >= 1, got N={n}, d={d}")
    if not np.all(np.isfinite(X)):
        raise InvalidParameterError("feature matrix contains non-finite entries")
    return X


@dataclass(frozen=True)
class SimilarityGraph:
    """Sparse symmetric nonnegative edge weights with a zero diagonal."""

    weights: sp.csr_matrix

    def __post_init__(self):
        W = self.weights
        if W.shape[0] != W.shape[1]:
            raise InvalidParameterError("weight matrix must be square")
        if (W != W.T).nnz != 0:
            raise InvalidParameterError("weight matrix must be exactly symmetric")
        if W.nnz and W.data.min() < 0:
            raise InvalidParameterError("edge weights must be nonnegative")
        if np.any(W.diagonal() != 0):
            raise InvalidParameterError("self-weights are not allowed (W_ii must be 0)")

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()


@dataclass(frozen=True)
class Laplacian:
    """A graph Laplacian together with the node degrees it was built from."""

    kind: str  # "unnormalized" | "normalized"
    matrix: sp.csr_matrix
    degrees: np.ndarray


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq_a = (A * A).sum(axis=1)
    sq_b = (B * B).sum(axis=1)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_knn_graph(X, k: int, length_scale: float) -> SimilarityGraph:
    """Exact k-nearest-neighbor graph with Gaussian kernel weights.

    Each node is connected to its k nearest neighbors (Euclidean distance)
    with weight exp(-dist^2 / length_scale^2); the result is symmetrized by
    an elementwise max with its transpose, so every directed k-NN edge is
    kept. Duplicate points get weight 1.
    """
    X = validate_features(X)
    n = X.shape[0]
    if not 1 <= k < n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    if length_scale <= 0:
        raise InvalidParameterError(f"length_scale must be positive, got {length_scale}")

    rows = np.empty(n * k, dtype=np.int64)
    cols = np.empty(n * k, dtype=np.int64)
    vals = np.empty(n * k, dtype=float)
    inv_ls2 = 1.0 / (length_scale * length_scale)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        d2 = _pairwise_sq_dists(X[start:stop], X)
        for i in range(start, stop):
            d2[i - start, i] = np.inf  # exclude self
        nn = np.argpartition(d2, k - 1, axis=1)[:, :k]
        block = np.arange(start, stop)
        rows[start * k : stop * k] = np.repeat(block, k)
        cols[start * k : stop * k] = nn.ravel()
        picked = d2[np.arange(stop - start)[:, None], nn]
        vals[start * k : stop * k] = np.exp(-picked.ravel() * inv_ls2)

    # Self-edges were excluded above, so the diagonal is structurally empty.
    W = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    W = W.maximum(W.T).tocsr()
    W.eliminate_zeros()
    return SimilarityGraph(weights=W)


def build_full_graph(X, length_scale: float, dense_cap: int = DENSE_CAP) -> SimilarityGraph:
    """All-pairs Gaussian kernel graph for small datasets."""
    X = validate_features(X)
    n = X.shape[0]
    if n > dense_cap:
        raise ResourceLimitError(
            f"full graph on N={n} nodes exceeds the dense cap of {dense_cap}"
        )
    if length_scale <= 0:
        raise InvalidParameterError(f"length_scale must be positive, got {length_scale}")
    d2 = _pairwise_sq_dists(X, X)
    W = np.exp(-d2 / (length_scale * length_scale))
    np.fill_diagonal(W, 0.0)
    return SimilarityGraph(weights=sp.csr_matrix(W))


def laplacian(G: SimilarityGraph, kind: str = "unnormalized") -> Laplacian:
    """Graph Laplacian of the given kind.

    unnormalized: L = D - W. normalized: D^{-1/2} (D - W) D^{-1/2}, where
    isolated nodes (zero degree) get scaling 0, zeroing their row and column;
    a warning is emitted when that happens.
    """
    d = G.degrees()
    W = G.weights
    if kind == "unnormalized":
        L = sp.diags(d) - W
    elif kind == "normalized":
        isolated = d == 0
        if isolated.any():
            warnings.warn(
                f"normalized Laplacian: {int(isolated.sum())} isolated node(s); "
                "their rows and columns are zeroed",
                stacklevel=2,
            )
        with np.errstate(divide="ignore"):
            dinv_sqrt = np.where(isolated, 0.0, 1.0 / np.sqrt(np.where(isolated, 1.0, d)))
        S = sp.diags(dinv_sqrt)
        L = S @ (sp.diags(d) - W) @ S
    else:
        raise InvalidParameterError(f"unknown Laplacian kind: {kind!r}")
    return Laplacian(kind=kind, matrix=L.tocsr(), degrees=d)


@dataclass(frozen=True)
class PriorPrecision:
    """Regularized precision (L + tau^2 I) / tau^2 with a cached Cholesky factor.

    The matrix is symmetric positive definite for any tau > 0; the dense
    factor is computed once at construction and reused for all solves.
    """

    matrix: sp.csr_matrix
    tau: float
    _dense: np.ndarray = field(repr=False)
    _chol: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        """Dense view of the precision matrix. Do not mutate."""
        return self._dense

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._chol, b)

    def inverse(self) -> np.ndarray:
        """Dense prior covariance (the inverse of this precision)."""
        return self.solve(np.eye(self.n))


def regularized_precision(L: Laplacian, tau: float) -> PriorPrecision:
    """Shift the Laplacian by tau^2 and rescale, yielding a PD precision."""
    if tau <= 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    n = L.matrix.shape[0]
    M = (L.matrix + (tau * tau) * sp.identity(n, format="csr")) / (tau * tau)
    M = M.tocsr()
    dense = M.toarray()
    counters.cholesky_factorizations += 1
    chol = scipy.linalg.cho_factor(dense, lower=True)
    return PriorPrecision(matrix=M, tau=float(tau), _dense=dense, _chol=chol)
