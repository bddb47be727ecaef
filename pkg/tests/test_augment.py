import math
from fractions import Fraction

import numpy as np
import pytest

from diffgraph.augment import (
    AugmentConfig,
    apply_drop,
    apply_feature_mask,
    drop_plan,
    drop_probabilities,
    edge_scores,
    hyperedge_scores,
    mask_count,
    min_max_normalize,
    node_mask_weights,
    node_scores,
    sample_keep,
    sample_node_mask,
    sample_view,
)
from diffgraph.errors import ConfigError, DataError
from diffgraph.graphs import edge_list, graph_from_edges, hypergraph_from_memberships
from diffgraph.sparse import SparseMatrix

from helpers import random_graph, random_hypergraph, random_structure


def sym_matrix(rng, n):
    m = rng.random((n, n))
    m = 0.5 * (m + m.T)
    return SparseMatrix.from_dense(m)


def test_node_scores_hand_value():
    x = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(node_scores(x), [5.0, 0.0, 1.0])


def test_edge_scores_reads_enhanced_entries():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    enhanced = SparseMatrix.from_dense(
        np.array([[0.0, 0.7, 0.0], [0.7, 0.0, 0.2], [0.0, 0.2, 0.0]])
    )
    np.testing.assert_allclose(edge_scores(enhanced, g), [0.7, 0.2])


def test_hyperedge_scores_match_dense_oracle():
    rng = np.random.default_rng(4)
    for _ in range(30):
        hg = random_hypergraph(rng)
        enhanced = sym_matrix(rng, hg.n_nodes)
        got = hyperedge_scores(enhanced, hg)
        inc = hg.incidence.to_dense()
        dense = enhanced.to_dense()
        want = np.array([inc[:, m] @ dense @ inc[:, m] for m in range(hg.n_hyperedges)])
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_min_max_normalize():
    np.testing.assert_allclose(min_max_normalize(np.array([2.0, 4.0, 6.0])), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(min_max_normalize(np.array([3.0, 3.0])), [0.5, 0.5])
    assert min_max_normalize(np.array([])).size == 0


def test_drop_probabilities_shape_and_bounds():
    scores = np.array([0.0, 1.0, 2.0, 3.0])
    p = drop_probabilities(scores, 0.1, 0.5)
    np.testing.assert_allclose(p, [0.5, 0.5 - 0.4 / 3, 0.1 + 0.4 / 3, 0.1])
    # higher score never raises the drop probability
    assert np.all(np.diff(p) <= 0)
    np.testing.assert_allclose(
        drop_probabilities(np.full(5, 7.0), 0.2, 0.6), np.full(5, 0.4)
    )


def test_drop_plan_guided_vs_random():
    rng = np.random.default_rng(7)
    g = random_graph(rng, n=8)
    x_diff = rng.normal(size=(8, 3))
    enhanced = sym_matrix(rng, 8)
    guided = drop_plan(g, enhanced, x_diff, AugmentConfig(strategy="diffusion", p_min=0.1, p_max=0.5))
    rand = drop_plan(g, enhanced, x_diff, AugmentConfig(strategy="random", p_min=0.1, p_max=0.5))
    n_edges = edge_list(g)[0].size
    assert guided.node_probs.shape == (8,)
    assert guided.struct_probs.shape == (n_edges,)
    np.testing.assert_allclose(rand.node_probs, np.full(8, 0.3))
    np.testing.assert_allclose(rand.struct_probs, np.full(n_edges, 0.3))
    assert np.all(guided.node_probs >= 0.1) and np.all(guided.node_probs <= 0.5)


def test_sample_keep_rate_tracks_probability():
    rng = np.random.default_rng(11)
    probs = np.full(20000, 0.3)
    keep = sample_keep(probs, rng)
    assert abs(np.mean(keep) - 0.7) < 0.02


def test_sample_keep_forces_one_survivor():
    rng = np.random.default_rng(1)
    probs = np.array([1.0, 1.0, 0.5, 1.0])
    for _ in range(20):
        keep = sample_keep(probs, rng, force_keep_one=True)
        assert keep.any()
    # all-ones probabilities keep exactly the argmin element
    keep = sample_keep(np.array([1.0, 1.0, 1.0]), rng, force_keep_one=True)
    np.testing.assert_array_equal(keep, [True, False, False])


def test_apply_drop_graph_hand_case():
    g = graph_from_edges(3, [(0, 1), (1, 2)], features=np.eye(3))
    x_diff = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    view = apply_drop(g, np.array([True, False, True]), np.array([True, True]), x_diff)
    assert view.structure.n_nodes == 2
    assert view.structure.adjacency.nnz == 0
    np.testing.assert_array_equal(view.node_indices, [0, 2])
    np.testing.assert_array_equal(view.structure.features, [[1.0, 0.0], [3.0, 0.0]])


def test_apply_drop_graph_edge_only():
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    x_diff = np.zeros((3, 1))
    view = apply_drop(g, np.ones(3, dtype=bool), np.array([False, True]), x_diff)
    dense = view.structure.adjacency.to_dense()
    want = np.zeros((3, 3))
    want[1, 2] = want[2, 1] = 1.0
    np.testing.assert_array_equal(dense, want)


def test_apply_drop_hypergraph_pruning():
    hg = hypergraph_from_memberships(
        4, [[0, 1, 2], [1, 3], [2, 3]], weights=np.array([2.0, 1.0, 1.0])
    )
    x_diff = np.arange(8.0).reshape(4, 2)
    node_keep = np.array([True, False, True, True])
    struct_keep = np.array([True, True, False])
    view = apply_drop(hg, node_keep, struct_keep, x_diff)
    # {0,1,2} loses node 1 but keeps {0,2} -> relabeled {0,1}
    # {1,3} shrinks to one member -> dropped; {2,3} is struct-dropped
    assert view.structure.n_hyperedges == 1
    assert view.structure.n_nodes == 3
    np.testing.assert_array_equal(view.structure.incidence.to_dense(), [[1.0], [1.0], [0.0]])
    np.testing.assert_array_equal(view.structure.hyperedge_weights, [2.0])
    np.testing.assert_array_equal(view.node_indices, [0, 2, 3])


def test_apply_drop_validation():
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(DataError):
        apply_drop(g, np.zeros(3, dtype=bool), np.array([True]), np.zeros((3, 1)))
    with pytest.raises(DataError):
        apply_drop(g, np.ones(2, dtype=bool), np.array([True]), np.zeros((3, 1)))
    with pytest.raises(DataError):
        apply_drop(g, np.ones(3, dtype=bool), np.ones(2, dtype=bool), np.zeros((3, 1)))


def test_sample_view_produces_valid_structures():
    rng = np.random.default_rng(13)
    config = AugmentConfig(p_min=0.2, p_max=0.6)
    for _ in range(40):
        structure = random_structure(rng)
        x_diff = rng.normal(size=(structure.n_nodes, 3))
        enhanced = sym_matrix(rng, structure.n_nodes)
        plan = drop_plan(structure, enhanced, x_diff, config)
        view = sample_view(structure, plan, x_diff, rng)
        assert view.structure.n_nodes >= 1
        assert view.structure.n_nodes == view.node_indices.size
        assert np.all(np.diff(view.node_indices) > 0)
        np.testing.assert_array_equal(view.structure.features, x_diff[view.node_indices])
        # construction re-validates symmetry/incidence via the dataclass checks


def test_mask_count_matches_fraction_oracle():
    for k in range(1, 11):
        for n in range(1, 51):
            ratio = k / 10
            want = math.ceil(Fraction(k, 10) * n)
            assert mask_count(n, ratio) == want, (k, n)


def test_node_mask_weights():
    scores = np.array([0.0, 5.0, 10.0])
    w = node_mask_weights(scores)
    np.testing.assert_allclose(w, [1.0 + 1e-6, 0.5 + 1e-6, 1e-6])
    np.testing.assert_array_equal(node_mask_weights(scores, strategy="random"), np.ones(3))


def test_sample_node_mask_properties():
    rng = np.random.default_rng(17)
    for _ in range(30):
        n = int(rng.integers(4, 30))
        ratio = float(rng.uniform(0.1, 0.9))
        weights = node_mask_weights(rng.random(n))
        idx = sample_node_mask(n, ratio, weights, rng)
        assert idx.size == mask_count(n, ratio)
        assert np.unique(idx).size == idx.size
        assert np.all(np.diff(idx) > 0)
        assert np.all((idx >= 0) & (idx < n))


def test_sample_node_mask_deterministic():
    weights = np.ones(10)
    a = sample_node_mask(10, 0.4, weights, np.random.default_rng(3))
    b = sample_node_mask(10, 0.4, weights, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_sample_node_mask_prefers_low_scores():
    # node 9 has by far the highest score, so a tiny mask weight
    scores = np.zeros(10)
    scores[9] = 100.0
    weights = node_mask_weights(scores)
    hits = 0
    for seed in range(200):
        idx = sample_node_mask(10, 0.3, weights, np.random.default_rng(seed))
        hits += int(9 in idx)
    assert hits < 10


def test_sample_node_mask_errors():
    with pytest.raises(DataError):
        sample_node_mask(5, 0.5, np.ones(4), np.random.default_rng(0))


def test_apply_feature_mask():
    x = np.arange(6.0).reshape(3, 2)
    token = np.array([-1.0, -2.0])
    out = apply_feature_mask(x, token, np.array([0, 2]))
    np.testing.assert_array_equal(out, [[-1.0, -2.0], [2.0, 3.0], [-1.0, -2.0]])
    np.testing.assert_array_equal(x, np.arange(6.0).reshape(3, 2))


def test_augment_config_validation():
    AugmentConfig().validate()
    with pytest.raises(ConfigError):
        AugmentConfig(strategy="blend").validate()
    with pytest.raises(ConfigError):
        AugmentConfig(p_min=0.5, p_max=0.2).validate()
    with pytest.raises(ConfigError):
        AugmentConfig(p_max=1.5).validate()
    with pytest.raises(ConfigError):
        AugmentConfig(mask_ratio=0.0).validate()
