"""Shared test fixtures: random structure generators and dense oracles.

The oracles are written independently of the library internals: plain dense
power accumulation for the truncated series and an eigendecomposition for the
matrix exponential.
"""
import numpy as np

from diffgraph.graphs import Graph, graph_from_edges, hypergraph_from_memberships
from diffgraph.sparse import SparseMatrix


def random_graph(rng, n=None, p=0.4, weighted=False, d=3):
    n = int(n if n is not None else rng.integers(2, 16))
    mask = np.triu(rng.random((n, n)) < p, 1)
    rows, cols = np.nonzero(mask)
    feats = rng.normal(size=(n, d))
    if rows.size == 0:
        return Graph(SparseMatrix.zeros(n, n), feats)
    w = rng.uniform(0.2, 2.0, rows.size) if weighted else np.ones(rows.size)
    return graph_from_edges(n, np.stack([rows, cols], 1), w, feats)


def random_hypergraph(rng, n=None, m=None, d=3):
    n = int(n if n is not None else rng.integers(2, 16))
    m = int(m if m is not None else rng.integers(1, 8))
    members = []
    for _ in range(m):
        size = int(rng.integers(1, n + 1))
        members.append(np.sort(rng.choice(n, size=size, replace=False)))
    return hypergraph_from_memberships(n, members, rng.uniform(0.5, 2.0, m), rng.normal(size=(n, d)))


def random_structure(rng, **kw):
    if rng.random() < 0.5:
        return random_graph(rng, **kw)
    return random_hypergraph(rng, **kw)


def dense_series_oracle(base: np.ndarray, weights) -> np.ndarray:
    """Naive power accumulation sum_k weights[k] * base^k."""
    acc = np.zeros_like(base)
    power = np.eye(base.shape[0])
    for w in weights:
        acc = acc + w * power
        power = power @ base
    return acc


def heat_eig_oracle(laplacian: np.ndarray, t: float) -> np.ndarray:
    """exp(-t L) through a dense symmetric eigendecomposition."""
    w, v = np.linalg.eigh(laplacian)
    return (v * np.exp(-t * w)) @ v.T
