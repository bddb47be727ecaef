"""Graph and hypergraph containers plus the spectral operators built from them.

Conventions: adjacency matrices are symmetric with zero diagonal and
non-negative weights; hypergraph incidence is a binary N x M matrix with
positive hyperedge weights. Transition matrices add self-loops on graphs and
give isolated hypergraph nodes an identity row, so every row is stochastic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .sparse import SparseMatrix


def _as_features(features, n_nodes: int) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != n_nodes:
        raise DataError(f"features must be ({n_nodes}, d), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("features must be finite")
    x = x.copy()
    x.flags.writeable = False
    return x


@dataclass(frozen=True)
class Graph:
    adjacency: SparseMatrix
    features: np.ndarray

    def __post_init__(self):
        adj = self.adjacency
        if adj.n_rows != adj.n_cols:
            raise DataError("adjacency must be square")
        adj.validate()
        if adj.nnz:
            if np.any(adj.values < 0):
                raise DataError("adjacency weights must be non-negative")
            if np.any(adj.diagonal() != 0.0):
                raise DataError("adjacency diagonal must be zero")
            if adj.max_abs_diff(adj.transpose()) > 1e-12:
                raise DataError("adjacency must be symmetric within 1e-12")
        object.__setattr__(self, "features", _as_features(self.features, adj.n_rows))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.n_rows

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class Hypergraph:
    incidence: SparseMatrix          # N x M, entries all exactly 1
    hyperedge_weights: np.ndarray    # length M, strictly positive
    features: np.ndarray

    def __post_init__(self):
        inc = self.incidence
        inc.validate()
        if inc.nnz and np.any(inc.values != 1.0):
            raise DataError("incidence entries must be exactly 1")
        w = np.asarray(self.hyperedge_weights, dtype=np.float64)
        if w.shape != (inc.n_cols,):
            raise DataError(f"hyperedge_weights must have length {inc.n_cols}")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DataError("hyperedge weights must be positive and finite")
        edge_deg = np.bincount(inc.col_indices, minlength=inc.n_cols)
        if np.any(edge_deg < 1):
            raise DataError("every hyperedge must contain at least one node")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "hyperedge_weights", w)
        object.__setattr__(self, "features", _as_features(self.features, inc.n_rows))

    @property
    def n_nodes(self) -> int:
        return self.incidence.n_rows

    @property
    def n_hyperedges(self) -> int:
        return self.incidence.n_cols

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


Structure = Graph | Hypergraph


@dataclass(frozen=True)
class DegreeInfo:
    node_degrees: np.ndarray
    hyperedge_degrees: np.ndarray | None


def degree_info(structure: Structure) -> DegreeInfo:
    if isinstance(structure, Graph):
        return DegreeInfo(structure.adjacency.row_sums(), None)
    inc = structure.incidence
    rows = np.repeat(np.arange(inc.n_rows), np.diff(inc.row_offsets))
    node_deg = np.bincount(
        rows, weights=structure.hyperedge_weights[inc.col_indices], minlength=inc.n_rows
    )
    edge_deg = np.bincount(inc.col_indices, minlength=inc.n_cols).astype(np.float64)
    return DegreeInfo(node_deg, edge_deg)


# -- construction helpers ----------------------------------------------------


def graph_from_edges(n_nodes, edges, weights=None, features=None) -> Graph:
    """Undirected graph from (i, j) pairs; both directions stored."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if weights is None:
        weights = np.ones(edges.shape[0], dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(edges[:, 0] == edges[:, 1]):
        raise DataError("self-loops are not valid edges")
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    vals = np.concatenate([weights, weights])
    adj = SparseMatrix.from_triplets(rows, cols, vals, n_nodes, n_nodes)
    if features is None:
        features = np.zeros((n_nodes, 1))
    return Graph(adj, features)


def hypergraph_from_memberships(n_nodes, memberships, weights=None, features=None) -> Hypergraph:
    """Hypergraph from a list of node-index collections, one per hyperedge."""
    rows, cols = [], []
    for m, members in enumerate(memberships):
        for i in members:
            rows.append(int(i))
            cols.append(m)
    n_edges = len(memberships)
    inc = SparseMatrix.from_triplets(
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.ones(len(rows)),
        n_nodes,
        n_edges,
    )
    if weights is None:
        weights = np.ones(n_edges)
    if features is None:
        features = np.zeros((n_nodes, 1))
    return Hypergraph(inc, weights, features)


def edge_list(graph: Graph):
    """Canonical undirected edge list: (i, j, w) with i < j, sorted."""
    adj = graph.adjacency
    rows = np.repeat(np.arange(adj.n_rows), np.diff(adj.row_offsets))
    upper = rows < adj.col_indices
    return rows[upper], adj.col_indices[upper], adj.values[upper]


def hyperedge_members(hg: Hypergraph) -> list[np.ndarray]:
    """Sorted node indices of each hyperedge."""
    t = hg.incidence.transpose()
    return [
        t.col_indices[t.row_offsets[m]:t.row_offsets[m + 1]] for m in range(hg.n_hyperedges)
    ]


# -- spectral operators ------------------------------------------------------


def graph_transition(graph: Graph) -> SparseMatrix:
    """Row-stochastic P = D^-1 (A + Id) with D the degree of A + Id."""
    a_loop = graph.adjacency.add(SparseMatrix.identity(graph.n_nodes))
    deg = a_loop.row_sums()
    return a_loop.scale_rows(1.0 / deg)


def hypergraph_transition(hg: Hypergraph) -> SparseMatrix:
    """Row-stochastic P = D_v^-1 I W D_e^-1 I^T; isolated nodes get identity rows."""
    info = degree_info(hg)
    d_v, d_e = info.node_degrees, info.hyperedge_degrees
    inc = hg.incidence
    scaled = inc.scale_cols(hg.hyperedge_weights / np.maximum(d_e, 1.0))
    walk = scaled.matmul(inc.transpose())
    isolated = d_v == 0.0
    inv_dv = np.where(isolated, 0.0, 1.0 / np.maximum(d_v, 1e-300))
    p = walk.scale_rows(inv_dv)
    if np.any(isolated):
        idx = np.flatnonzero(isolated)
        patch = SparseMatrix.from_triplets(idx, idx, np.ones(idx.size), hg.n_nodes, hg.n_nodes)
        p = p.add(patch)
    return p


def graph_smoothing(graph: Graph) -> SparseMatrix:
    """Symmetric D^-1/2 (A + Id) D^-1/2 with D the degree of A + Id."""
    a_loop = graph.adjacency.add(SparseMatrix.identity(graph.n_nodes))
    inv_sqrt = 1.0 / np.sqrt(a_loop.row_sums())
    return a_loop.scale_rows(inv_sqrt).scale_cols(inv_sqrt)


def normalized_laplacian(graph: Graph) -> SparseMatrix:
    """L = Id - D^-1/2 (A + Id) D^-1/2; symmetric with eigenvalues in [0, 2]."""
    return SparseMatrix.identity(graph.n_nodes).add(graph_smoothing(graph).scale(-1.0))


def hypergraph_smoothing(hg: Hypergraph) -> SparseMatrix:
    """Symmetric H = D_v^-1/2 I W D_e^-1 I^T D_v^-1/2, identity on isolated nodes."""
    info = degree_info(hg)
    d_v, d_e = info.node_degrees, info.hyperedge_degrees
    inc = hg.incidence
    scaled = inc.scale_cols(hg.hyperedge_weights / np.maximum(d_e, 1.0))
    core = scaled.matmul(inc.transpose())
    isolated = d_v == 0.0
    inv_sqrt = np.where(isolated, 0.0, 1.0 / np.sqrt(np.maximum(d_v, 1e-300)))
    h = core.scale_rows(inv_sqrt).scale_cols(inv_sqrt)
    if np.any(isolated):
        idx = np.flatnonzero(isolated)
        patch = SparseMatrix.from_triplets(idx, idx, np.ones(idx.size), hg.n_nodes, hg.n_nodes)
        h = h.add(patch)
    return h


def hypergraph_laplacian(hg: Hypergraph) -> SparseMatrix:
    """L = Id - H with H the symmetric hypergraph smoothing operator."""
    return SparseMatrix.identity(hg.n_nodes).add(hypergraph_smoothing(hg).scale(-1.0))


def hypergraph_adjacency(hg: Hypergraph) -> SparseMatrix:
    """Clique expansion I W I^T with the diagonal removed."""
    inc = hg.incidence
    expanded = inc.scale_cols(hg.hyperedge_weights).matmul(inc.transpose())
    rows = np.repeat(np.arange(expanded.n_rows), np.diff(expanded.row_offsets))
    off_diag = rows != expanded.col_indices
    return SparseMatrix.from_triplets(
        rows[off_diag], expanded.col_indices[off_diag], expanded.values[off_diag],
        hg.n_nodes, hg.n_nodes,
    )


def transition_matrix(structure: Structure) -> SparseMatrix:
    if isinstance(structure, Graph):
        return graph_transition(structure)
    return hypergraph_transition(structure)


def laplacian_matrix(structure: Structure) -> SparseMatrix:
    if isinstance(structure, Graph):
        return normalized_laplacian(structure)
    return hypergraph_laplacian(structure)


def structure_adjacency(structure: Structure) -> SparseMatrix:
    """Pairwise adjacency: the graph's own, or the hypergraph clique expansion."""
    if isinstance(structure, Graph):
        return structure.adjacency
    return hypergraph_adjacency(structure)


# -- permutation -------------------------------------------------------------


def _check_permutation(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise DataError(f"perm must be a bijection on {n} nodes")
    return perm


def permute(structure: Structure, perm) -> Structure:
    """Relabel nodes: node i moves to index perm[i]. Hyperedge order is kept."""
    n = structure.n_nodes
    perm = _check_permutation(perm, n)
    feats = np.empty_like(structure.features)
    feats[perm] = structure.features
    if isinstance(structure, Graph):
        adj = structure.adjacency
        rows = np.repeat(np.arange(n), np.diff(adj.row_offsets))
        new_adj = SparseMatrix.from_triplets(
            perm[rows], perm[adj.col_indices], adj.values, n, n
        )
        return Graph(new_adj, feats)
    inc = structure.incidence
    rows = np.repeat(np.arange(n), np.diff(inc.row_offsets))
    new_inc = SparseMatrix.from_triplets(
        perm[rows], inc.col_indices, inc.values, n, inc.n_cols
    )
    return Hypergraph(new_inc, structure.hyperedge_weights, feats)


def permute_dense(mat: np.ndarray, perm) -> np.ndarray:
    """Apply the same relabeling to a dense N x N operator: out[p[i], p[j]] = mat[i, j]."""
    perm = _check_permutation(perm, mat.shape[0])
    out = np.empty_like(mat)
    out[np.ix_(perm, perm)] = mat
    return out
