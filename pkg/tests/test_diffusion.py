"""Diffusion kernels against independent dense oracles."""
import numpy as np
import pytest

from diffgraph.diffusion import (
    DiffusionConfig,
    build_kernel,
    diffuse_features,
    enhanced_adjacency,
    heat_kernel,
    ppr_kernel,
    rw_kernel,
    series_kernel,
    sparsify_kernel,
)
from diffgraph.errors import ConfigError, DataError
from diffgraph.graphs import (
    Graph,
    graph_from_edges,
    graph_transition,
    laplacian_matrix,
    normalized_laplacian,
    permute,
    permute_dense,
    transition_matrix,
)
from diffgraph.sparse import SparseMatrix
from helpers import (
    dense_series_oracle,
    heat_eig_oracle,
    random_graph,
    random_structure,
)


def test_rw_kernel_hand_value():
    # 2-node single edge: P is the constant 1/2 matrix, lambda=0.5, T=2
    p = graph_transition(graph_from_edges(2, [(0, 1)]))
    k = rw_kernel(p, 0.5, 2).to_dense()
    np.testing.assert_allclose(k, [[1.375, 0.375], [0.375, 1.375]], atol=1e-15)


def test_ppr_kernel_hand_value():
    # idempotent P: K -> alpha*I + (1-alpha-ish)*P as T grows
    p = graph_transition(graph_from_edges(2, [(0, 1)]))
    k = ppr_kernel(p, 0.5, 20).to_dense()
    np.testing.assert_allclose(k, [[0.75, 0.25], [0.25, 0.75]], atol=1e-6)


def test_heat_kernel_hand_value():
    lap = normalized_laplacian(graph_from_edges(2, [(0, 1)]))
    k = heat_kernel(lap, 1.0, 4).to_dense()
    expected = (1 + np.exp(-1.0)) / 2, (1 - np.exp(-1.0)) / 2
    np.testing.assert_allclose(k, [[expected[0], expected[1]], [expected[1], expected[0]]],
                               atol=1e-9)


def test_series_kernels_match_dense_oracle():
    rng = np.random.default_rng(20)
    for _ in range(40):
        s = random_structure(rng)
        p = transition_matrix(s)
        order = int(rng.integers(0, 9))
        lam = float(rng.uniform(0.05, 0.95))
        alpha = float(rng.uniform(0.05, 1.0))
        d = p.to_dense()
        k_rw = rw_kernel(p, lam, order).to_dense()
        np.testing.assert_allclose(
            k_rw, dense_series_oracle(d, lam ** np.arange(order + 1)), atol=1e-10
        )
        k_ppr = ppr_kernel(p, alpha, order).to_dense()
        np.testing.assert_allclose(
            k_ppr, dense_series_oracle(d, alpha * (1 - alpha) ** np.arange(order + 1)),
            atol=1e-10,
        )


def test_truncated_row_sums_closed_form():
    rng = np.random.default_rng(21)
    for _ in range(40):
        s = random_structure(rng)
        p = transition_matrix(s)
        order = int(rng.integers(0, 9))
        lam, alpha = 0.5, 0.15
        rw_sum = rw_kernel(p, lam, order).row_sums()
        np.testing.assert_allclose(
            rw_sum, np.full(s.n_nodes, (1 - lam ** (order + 1)) / (1 - lam)), atol=1e-9
        )
        ppr_sum = ppr_kernel(p, alpha, order).row_sums()
        np.testing.assert_allclose(
            ppr_sum, np.full(s.n_nodes, 1 - (1 - alpha) ** (order + 1)), atol=1e-9
        )


def test_heat_kernel_matches_eig_oracle():
    rng = np.random.default_rng(22)
    for _ in range(30):
        s = random_structure(rng)
        lap = laplacian_matrix(s)
        t = float(rng.uniform(0.2, 2.0))
        order = int(rng.integers(2, 9))
        k = heat_kernel(lap, t, order).to_dense()
        np.testing.assert_allclose(k, heat_eig_oracle(lap.to_dense(), t), atol=1e-8)
        np.testing.assert_allclose(k, k.T, atol=1e-9)


def test_heat_kernel_degenerate_cases():
    # L = 0 -> identity; order 0 truncation -> identity
    assert heat_kernel(SparseMatrix.zeros(3, 3), 1.0, 4).max_abs_diff(
        SparseMatrix.identity(3)
    ) == 0.0
    lap = normalized_laplacian(graph_from_edges(2, [(0, 1)]))
    assert heat_kernel(lap, 1.0, 0).max_abs_diff(SparseMatrix.identity(2)) == 0.0


def test_series_weights_override_runs_literal_series():
    rng = np.random.default_rng(23)
    weights = (1.0, 0.3, 0.0, 0.05)
    for kind in ("random_walk", "ppr", "heat"):
        s = random_graph(rng, n=8)
        cfg = DiffusionConfig(kind=kind, series_weights=weights)
        k = build_kernel(s, cfg).matrix.to_dense()
        base = laplacian_matrix(s) if kind == "heat" else transition_matrix(s)
        np.testing.assert_allclose(k, dense_series_oracle(base.to_dense(), weights), atol=1e-12)


def test_build_kernel_matches_direct_constructors():
    rng = np.random.default_rng(24)
    s = random_structure(rng)
    for cfg, direct in [
        (DiffusionConfig(kind="random_walk", lam=0.4, order=3),
         lambda: rw_kernel(transition_matrix(s), 0.4, 3)),
        (DiffusionConfig(kind="ppr", alpha=0.2, order=5),
         lambda: ppr_kernel(transition_matrix(s), 0.2, 5)),
        (DiffusionConfig(kind="heat", time=0.7, order=6),
         lambda: heat_kernel(laplacian_matrix(s), 0.7, 6)),
    ]:
        built = build_kernel(s, cfg)
        assert built.matrix.max_abs_diff(direct()) == 0.0
        assert built.config == cfg
        assert built.source_hash


def test_kernel_nonnegative_for_walk_families():
    rng = np.random.default_rng(25)
    for _ in range(20):
        s = random_structure(rng)
        for cfg in (DiffusionConfig(kind="random_walk"), DiffusionConfig(kind="ppr")):
            k = build_kernel(s, cfg)
            assert np.all(k.matrix.values >= 0)


def test_kernel_permutation_equivariance():
    rng = np.random.default_rng(26)
    for _ in range(20):
        s = random_structure(rng)
        perm = rng.permutation(s.n_nodes)
        for cfg in (
            DiffusionConfig(kind="random_walk"),
            DiffusionConfig(kind="ppr"),
            DiffusionConfig(kind="heat"),
        ):
            k0 = build_kernel(s, cfg).matrix.to_dense()
            k1 = build_kernel(permute(s, perm), cfg).matrix.to_dense()
            assert np.max(np.abs(k1 - permute_dense(k0, perm))) <= 1e-10


def test_config_validation_errors():
    bad = [
        DiffusionConfig(kind="taxicab"),
        DiffusionConfig(kind="random_walk", lam=0.0),
        DiffusionConfig(kind="random_walk", lam=1.0),
        DiffusionConfig(kind="ppr", alpha=0.0),
        DiffusionConfig(kind="ppr", alpha=1.5),
        DiffusionConfig(kind="heat", time=0.0),
        DiffusionConfig(kind="heat", time=-1.0),
        DiffusionConfig(order=-1),
        DiffusionConfig(sparsify_epsilon=-0.1),
        DiffusionConfig(sparsify_top_k=0),
        DiffusionConfig(sparsify_epsilon=0.1, sparsify_top_k=2),
        DiffusionConfig(series_weights=()),
        DiffusionConfig(series_weights=(1.0, float("nan"))),
    ]
    for cfg in bad:
        with pytest.raises(ConfigError):
            cfg.validate()
    # alpha = 1 is the degenerate-but-legal identity-ish case
    DiffusionConfig(kind="ppr", alpha=1.0).validate()


def test_sparsify_preserves_row_sums():
    rng = np.random.default_rng(27)
    for _ in range(20):
        s = random_structure(rng)
        k = build_kernel(s, DiffusionConfig(kind="ppr", order=6))
        before = k.matrix.row_sums()
        eps = 0.01
        had_small = bool(np.any(np.abs(k.matrix.values) < eps))
        sp = sparsify_kernel(k, epsilon=eps)
        np.testing.assert_allclose(sp.matrix.row_sums(), before, atol=1e-12)
        if had_small:
            assert sp.matrix.nnz < k.matrix.nnz
        top = sparsify_kernel(k, top_k=3)
        assert np.all(np.diff(top.matrix.row_offsets) <= 3)
        np.testing.assert_allclose(top.matrix.row_sums(), before, atol=1e-12)


def test_sparsify_identity_cases():
    rng = np.random.default_rng(28)
    s = random_graph(rng, n=7)
    k = build_kernel(s, DiffusionConfig(kind="ppr"))
    unchanged = sparsify_kernel(k, epsilon=0.0)
    assert unchanged.matrix.max_abs_diff(k.matrix) == 0.0
    unchanged = sparsify_kernel(k, top_k=s.n_nodes)
    assert unchanged.matrix.max_abs_diff(k.matrix) == 0.0
    with pytest.raises(ConfigError):
        sparsify_kernel(k)
    with pytest.raises(ConfigError):
        sparsify_kernel(k, epsilon=0.1, top_k=2)


def test_diffuse_features():
    rng = np.random.default_rng(29)
    s = random_graph(rng, n=9, d=4)
    k = build_kernel(s, DiffusionConfig())
    out = diffuse_features(k, s.features)
    np.testing.assert_allclose(out, k.matrix.to_dense() @ s.features, atol=1e-12)
    eye = SparseMatrix.identity(9)
    np.testing.assert_array_equal(diffuse_features(eye, s.features), s.features)
    with pytest.raises(DataError):
        diffuse_features(k, s.features[:4])


def test_enhanced_adjacency_identity_kernel():
    adj = SparseMatrix.from_triplets([0, 1], [1, 0], [1.0, 1.0], 2, 2)
    at = enhanced_adjacency(SparseMatrix.identity(2), adj)
    np.testing.assert_array_equal(at.matrix.to_dense(), adj.to_dense())


def test_enhanced_adjacency_invariants():
    rng = np.random.default_rng(30)
    for _ in range(15):
        g = random_graph(rng, n=int(rng.integers(2, 12)))
        k = build_kernel(g, DiffusionConfig(kind="ppr"))
        at = enhanced_adjacency(k, g.adjacency).matrix
        dense = at.to_dense()
        np.testing.assert_allclose(dense, dense.T, atol=1e-12)
        assert dense.min() >= 0.0
        assert dense.max() <= 1.0
        if at.nnz:
            assert np.isclose(dense.max(), 1.0)


def test_enhanced_adjacency_keeps_disconnection():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    k = build_kernel(g, DiffusionConfig(kind="ppr", order=6))
    at = enhanced_adjacency(k, g.adjacency).matrix.to_dense()
    assert np.all(at[:2, 2:] == 0.0)
    assert np.all(at[2:, :2] == 0.0)
