"""Diffusion-guided augmentation: scored drops and feature masking.

Importance scores come from the diffused features (nodes) and the enhanced
adjacency (edges / hyperedges).  High-score elements get low drop
probabilities, so augmented views preserve what diffusion marks as
structurally central.  A "random" strategy keeps the exact same sampling
budget but flattens every score, which makes guided-vs-random comparisons a
one-flag switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .graphs import (
    Graph,
    Hypergraph,
    Structure,
    edge_list,
    graph_from_edges,
    hyperedge_members,
    hypergraph_from_memberships,
)
from .sparse import SparseMatrix

AUGMENT_STRATEGIES = ("diffusion", "random")

# keeps zero-score nodes selectable by the masking draw
_MASK_WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class AugmentConfig:
    strategy: str = "diffusion"
    p_min: float = 0.1
    p_max: float = 0.4
    mask_ratio: float = 0.3

    def validate(self) -> None:
        if self.strategy not in AUGMENT_STRATEGIES:
            raise ConfigError(f"unknown augment strategy {self.strategy!r}")
        if not (0.0 <= self.p_min <= self.p_max <= 1.0):
            raise ConfigError(
                f"need 0 <= p_min <= p_max <= 1, got ({self.p_min}, {self.p_max})"
            )
        if not (0.0 < self.mask_ratio <= 1.0):
            raise ConfigError(f"mask_ratio must be in (0, 1], got {self.mask_ratio}")


@dataclass(frozen=True)
class DropPlan:
    """Per-element drop probabilities for one structure."""

    node_probs: np.ndarray
    struct_probs: np.ndarray


@dataclass(frozen=True)
class AugmentedView:
    """A dropped-down copy of a structure carrying diffused features."""

    structure: Structure
    node_indices: np.ndarray  # original ids of the surviving nodes


def node_scores(x_diff: np.ndarray) -> np.ndarray:
    """Row l2 norms of the diffused features."""
    x_diff = np.asarray(x_diff, dtype=np.float64)
    if x_diff.ndim != 2:
        raise DataError(f"diffused features must be 2-d, got shape {x_diff.shape}")
    return np.sqrt(np.sum(x_diff * x_diff, axis=1))


def edge_scores(enhanced: SparseMatrix, graph: Graph) -> np.ndarray:
    """Enhanced-adjacency mass on each canonical (i < j) edge."""
    rows, cols, _ = edge_list(graph)
    return enhanced.get_pairs(rows, cols)


def hyperedge_scores(enhanced: SparseMatrix, hg: Hypergraph) -> np.ndarray:
    """u_m^T A~ u_m per hyperedge, with u_m its membership indicator."""
    inc = hg.incidence
    prod = enhanced.matmul(inc)
    rows = np.repeat(np.arange(inc.n_rows), np.diff(inc.row_offsets))
    cols = inc.col_indices
    contrib = prod.get_pairs(rows, cols)
    return np.bincount(cols, weights=contrib, minlength=hg.n_hyperedges)


def min_max_normalize(scores: np.ndarray) -> np.ndarray:
    """Scale into [0, 1]; constant score vectors map to 0.5 everywhere."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return scores.copy()
    lo, hi = float(np.min(scores)), float(np.max(scores))
    if hi - lo <= 0.0:
        return np.full(scores.shape, 0.5)
    return (scores - lo) / (hi - lo)


def drop_probabilities(scores: np.ndarray, p_min: float, p_max: float) -> np.ndarray:
    """p = p_min + (p_max - p_min) (1 - s_hat), monotone decreasing in score."""
    s_hat = min_max_normalize(scores)
    return p_min + (p_max - p_min) * (1.0 - s_hat)


def drop_plan(
    structure: Structure,
    enhanced: SparseMatrix,
    x_diff: np.ndarray,
    config: AugmentConfig,
) -> DropPlan:
    """Drop probabilities for nodes and structural elements.

    The random strategy ignores the scores and pins every probability to the
    midpoint (p_min + p_max) / 2, matching the guided strategy's draw budget.
    """
    config.validate()
    if isinstance(structure, Graph):
        n_struct = edge_list(structure)[0].size
    else:
        n_struct = structure.n_hyperedges
    if config.strategy == "random":
        mid = 0.5 * (config.p_min + config.p_max)
        return DropPlan(
            node_probs=np.full(structure.n_nodes, mid),
            struct_probs=np.full(n_struct, mid),
        )
    n_scores = node_scores(x_diff)
    if isinstance(structure, Graph):
        s_scores = edge_scores(enhanced, structure)
    else:
        s_scores = hyperedge_scores(enhanced, structure)
    return DropPlan(
        node_probs=drop_probabilities(n_scores, config.p_min, config.p_max),
        struct_probs=drop_probabilities(s_scores, config.p_min, config.p_max),
    )


def sample_keep(probs: np.ndarray, rng: np.random.Generator, force_keep_one: bool = False) -> np.ndarray:
    """Independent Bernoulli keep draws: keep element i iff u_i >= p_i."""
    keep = rng.random(probs.size) >= probs
    if force_keep_one and probs.size and not keep.any():
        keep[int(np.argmin(probs))] = True
    return keep


def apply_drop(
    structure: Structure,
    node_keep: np.ndarray,
    struct_keep: np.ndarray,
    x_diff: np.ndarray,
) -> AugmentedView:
    """Materialize the view induced by the keep masks.

    Graph edges survive when both endpoints and the edge itself are kept.
    Hyperedges survive when the hyperedge is kept and at least two members
    remain after node drops; surviving hyperedges lose dropped members.
    """
    node_keep = np.asarray(node_keep, dtype=bool)
    struct_keep = np.asarray(struct_keep, dtype=bool)
    if node_keep.shape != (structure.n_nodes,):
        raise DataError(f"node keep mask must have length {structure.n_nodes}")
    if not node_keep.any():
        raise DataError("a view must keep at least one node")
    kept = np.flatnonzero(node_keep)
    relabel = -np.ones(structure.n_nodes, dtype=np.int64)
    relabel[kept] = np.arange(kept.size)
    features = np.asarray(x_diff, dtype=np.float64)[kept]

    if isinstance(structure, Graph):
        rows, cols, weights = edge_list(structure)
        if struct_keep.shape != (rows.size,):
            raise DataError(f"edge keep mask must have length {rows.size}")
        alive = struct_keep & node_keep[rows] & node_keep[cols]
        pairs = np.column_stack([relabel[rows[alive]], relabel[cols[alive]]])
        view = graph_from_edges(kept.size, pairs, weights[alive], features)
        return AugmentedView(structure=view, node_indices=kept)

    if struct_keep.shape != (structure.n_hyperedges,):
        raise DataError(f"hyperedge keep mask must have length {structure.n_hyperedges}")
    members = hyperedge_members(structure)
    new_members: list[np.ndarray] = []
    new_weights: list[float] = []
    for m in np.flatnonzero(struct_keep):
        pruned = members[m][node_keep[members[m]]]
        if pruned.size >= 2:
            new_members.append(relabel[pruned])
            new_weights.append(float(structure.hyperedge_weights[m]))
    view = hypergraph_from_memberships(
        kept.size, new_members, np.asarray(new_weights, dtype=np.float64), features
    )
    return AugmentedView(structure=view, node_indices=kept)


def sample_view(
    structure: Structure,
    plan: DropPlan,
    x_diff: np.ndarray,
    rng: np.random.Generator,
) -> AugmentedView:
    """One augmented view: node draws first, then structural draws."""
    node_keep = sample_keep(plan.node_probs, rng, force_keep_one=True)
    struct_keep = sample_keep(plan.struct_probs, rng)
    return apply_drop(structure, node_keep, struct_keep, x_diff)


def scaled_count(n: int, ratio: float) -> int:
    """ceil(ratio * n) with a 1e-9 snap to the nearest integer for float fuzz."""
    x = ratio * n
    nearest = round(x)
    if abs(x - nearest) <= 1e-9:
        return int(nearest)
    return int(math.ceil(x))


def mask_count(n_nodes: int, ratio: float) -> int:
    return scaled_count(n_nodes, ratio)


def node_mask_weights(scores: np.ndarray, strategy: str = "diffusion") -> np.ndarray:
    """Sampling weights favoring low-score nodes; random strategy is uniform."""
    scores = np.asarray(scores, dtype=np.float64)
    if strategy == "random":
        return np.ones(scores.shape)
    return (1.0 - min_max_normalize(scores)) + _MASK_WEIGHT_FLOOR


def sample_node_mask(
    n_nodes: int, ratio: float, weights: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Sorted indices of ceil(ratio * N) nodes drawn without replacement."""
    count = mask_count(n_nodes, ratio)
    if count > n_nodes:
        raise DataError(f"cannot mask {count} of {n_nodes} nodes")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n_nodes,):
        raise DataError(f"mask weights must have length {n_nodes}")
    picked = rng.choice(n_nodes, size=count, replace=False, p=weights / np.sum(weights))
    return np.sort(picked)


def apply_feature_mask(
    x: np.ndarray, token: np.ndarray, mask_idx: np.ndarray
) -> np.ndarray:
    """Copy of x with masked rows replaced by the token."""
    out = np.asarray(x, dtype=np.float64).copy()
    out[np.asarray(mask_idx, dtype=np.int64)] = np.asarray(token, dtype=np.float64)
    return out
