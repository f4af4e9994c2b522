import numpy as np
import pytest
import scipy.sparse as sp

from graphactive import (
    LabeledSet,
    SimilarityGraph,
    laplacian,
    regularized_precision,
)
from graphactive.instrument import reset_counters


@pytest.fixture(autouse=True)
def _fresh_counters():
    reset_counters()
    yield


def random_graph(rng: np.random.Generator, n: int, density: float = 0.3) -> SimilarityGraph:
    """Random symmetric nonnegative weight matrix with a zero diagonal."""
    W = rng.uniform(0.0, 1.0, size=(n, n))
    mask = rng.uniform(size=(n, n)) < density
    W = W * mask
    W = np.maximum(W, W.T)
    np.fill_diagonal(W, 0.0)
    return SimilarityGraph(weights=sp.csr_matrix(W))


def random_prior(rng: np.random.Generator, n: int, tau: float = 0.7):
    G = random_graph(rng, n)
    L = laplacian(G, "unnormalized")
    return regularized_precision(L, tau)


def random_labeled(rng: np.random.Generator, n: int, m: int) -> LabeledSet:
    idx = rng.choice(n, size=m, replace=False)
    labels = rng.choice([-1, 1], size=m)
    return LabeledSet(idx, labels)


def path_graph(n: int, weight: float = 1.0) -> SimilarityGraph:
    W = np.zeros((n, n))
    for i in range(n - 1):
        W[i, i + 1] = W[i + 1, i] = weight
    return SimilarityGraph(weights=sp.csr_matrix(W))
