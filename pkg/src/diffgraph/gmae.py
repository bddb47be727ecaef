"""Masked-autoencoder pretraining with diffusion-consistent structure targets.

Per instance: replace a diffusion-scored node subset with the mask token,
diffuse the corrupted features, encode, diffuse the embeddings, and decode
the masked rows back to the clean features.  The structural head predicts
enhanced-adjacency mass on edges touching masked nodes (graphs) or mean
intra-hyperedge mass (hypergraphs).  One Adam step per instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .augment import (
    AUGMENT_STRATEGIES,
    node_mask_weights,
    node_scores,
    sample_node_mask,
    scaled_count,
)
from .diffusion import DiffusionConfig, build_kernel, diffuse_features, enhanced_adjacency
from .encoder import (
    EncoderConfig,
    ParameterStore,
    collect_gradients,
    encode_tape,
    decode_tape,
    init_encoder,
    make_leaves,
    optimizer_step,
    propagation_operator,
)
from .errors import ConfigError, DataError, TrainingDivergedError
from .graphs import (
    Graph,
    Hypergraph,
    Structure,
    edge_list,
    structure_adjacency,
)
from .parallel import ordered_map
from .rng import stream_rng
from .sparse import SparseMatrix

_CLIP = 1e-7


@dataclass(frozen=True)
class GmaeConfig:
    mask_ratio: float = 0.3
    structure_loss_weight: float = 1.0
    structure_reconstruction: bool = True
    negative_ratio: float = 1.0
    epochs: int = 20
    lr: float = 1e-3
    strategy: str = "diffusion"
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)

    def validate(self) -> None:
        if not (0.0 <= self.mask_ratio <= 1.0):
            raise ConfigError(f"mask_ratio must be in [0, 1], got {self.mask_ratio}")
        if not (self.structure_loss_weight >= 0.0) or not np.isfinite(self.structure_loss_weight):
            raise ConfigError(
                f"structure_loss_weight must be >= 0, got {self.structure_loss_weight}"
            )
        if not (self.negative_ratio >= 0.0) or not np.isfinite(self.negative_ratio):
            raise ConfigError(f"negative_ratio must be >= 0, got {self.negative_ratio}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs must be a non-negative integer, got {self.epochs}")
        if not (self.lr > 0.0) or not np.isfinite(self.lr):
            raise ConfigError(f"lr must be positive and finite, got {self.lr}")
        if self.strategy not in AUGMENT_STRATEGIES:
            raise ConfigError(f"unknown mask strategy {self.strategy!r}")
        self.diffusion.validate()


# -- plain numpy loss pieces ---------------------------------------------------


def node_loss(x: np.ndarray, x_hat_masked: np.ndarray, mask_idx: np.ndarray) -> float:
    """Mean squared l2 row error over the masked set; 0 when nothing is masked."""
    mask_idx = np.asarray(mask_idx, dtype=np.int64)
    if mask_idx.size == 0:
        return 0.0
    x_hat_masked = np.asarray(x_hat_masked, dtype=np.float64)
    if x_hat_masked.shape[0] != mask_idx.size:
        raise DataError("need one reconstruction per masked node")
    diff = np.asarray(x, dtype=np.float64)[mask_idx] - x_hat_masked
    return float(np.mean(np.sum(diff * diff, axis=1)))


def edge_logits(z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """sigma(z_i . z_j) per pair."""
    z = np.asarray(z, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    scores = np.sum(z[pairs[:, 0]] * z[pairs[:, 1]], axis=1)
    return 1.0 / (1.0 + np.exp(-scores))


def edge_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    """Soft-target BCE with probabilities clipped to [1e-7, 1 - 1e-7]."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise DataError("probabilities and targets must align")
    if probs.size == 0:
        return 0.0
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise DataError("edge targets must lie in [0, 1]")
    p = np.clip(probs, _CLIP, 1.0 - _CLIP)
    return float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)))


def hyper_loss(pred: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over hyperedges; 0 when there are none."""
    pred = np.asarray(pred, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if pred.shape != targets.shape:
        raise DataError("predictions and targets must align")
    if pred.size == 0:
        return 0.0
    return float(np.mean((pred - targets) ** 2))


def total_gmae_loss(node: float, struct: float, eta: float) -> float:
    return float(node + eta * struct)


def select_masked_edges(
    graph: Graph, mask_idx: np.ndarray, negative_ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Edge pairs entering the structural BCE: positives then sampled negatives.

    Positives are every stored edge with at least one masked endpoint.
    Negatives are ceil(ratio * positives) non-adjacent pairs with at least
    one masked endpoint, drawn uniformly without replacement from the full
    candidate set; if fewer candidates exist, all of them are used.
    """
    n = graph.n_nodes
    masked = np.zeros(n, dtype=bool)
    masked[np.asarray(mask_idx, dtype=np.int64)] = True
    if not masked.any():
        return np.empty((0, 2), dtype=np.int64)
    rows, cols, _ = edge_list(graph)
    touched = masked[rows] | masked[cols]
    positives = np.column_stack([rows[touched], cols[touched]])

    adj = np.zeros((n, n), dtype=bool)
    adj[rows, cols] = True
    iu, ju = np.triu_indices(n, k=1)
    candidate = ~adj[iu, ju] & (masked[iu] | masked[ju])
    cand_i, cand_j = iu[candidate], ju[candidate]
    n_neg = min(scaled_count(positives.shape[0], negative_ratio), cand_i.size)
    if n_neg > 0:
        picked = np.sort(rng.choice(cand_i.size, size=n_neg, replace=False))
        negatives = np.column_stack([cand_i[picked], cand_j[picked]])
    else:
        negatives = np.empty((0, 2), dtype=np.int64)
    return np.vstack([positives, negatives]).astype(np.int64)


def hyperedge_targets(enhanced: SparseMatrix, hg: Hypergraph) -> np.ndarray:
    """Mean off-diagonal enhanced-adjacency mass inside each hyperedge.

    s_m = (u_m^T A~ u_m - sum_{i in e_m} A~_ii) / (|e_m| (|e_m| - 1)); a
    single-member hyperedge falls back to its node's diagonal entry.
    """
    inc = hg.incidence
    rows = np.repeat(np.arange(inc.n_rows), np.diff(inc.row_offsets))
    cols = inc.col_indices
    m = hg.n_hyperedges
    quad = enhanced.matmul(inc)
    full = np.bincount(cols, weights=quad.get_pairs(rows, cols), minlength=m)
    diag = enhanced.diagonal()
    diag_sum = np.bincount(cols, weights=diag[rows], minlength=m)
    sizes = np.bincount(cols, minlength=m).astype(np.float64)
    targets = np.zeros(m)
    multi = sizes > 1.0
    targets[multi] = (full[multi] - diag_sum[multi]) / (sizes[multi] * (sizes[multi] - 1.0))
    single = ~multi
    targets[single] = diag_sum[single]
    return targets


def hyperedge_pred(z: np.ndarray, agg: SparseMatrix, weight: np.ndarray, bias: float) -> np.ndarray:
    """sigma(w . mean(z_i : i in e_m) + b) per hyperedge."""
    pooled = agg.dense_matmul(np.asarray(z, dtype=np.float64))
    scores = pooled @ np.asarray(weight, dtype=np.float64) + float(bias)
    return 1.0 / (1.0 + np.exp(-scores))


def mean_aggregation(hg: Hypergraph) -> SparseMatrix:
    """Constant M x N matrix averaging node rows within each hyperedge."""
    t = hg.incidence.transpose()
    sizes = np.maximum(t.row_sums(), 1.0)
    return t.scale_rows(1.0 / sizes)


# -- training ------------------------------------------------------------------


@dataclass
class GmaeInstanceCache:
    """Parameter-independent per-instance state."""

    structure: Structure
    kernel: SparseMatrix
    operator: SparseMatrix
    mask_weights: np.ndarray
    enhanced: SparseMatrix
    agg: SparseMatrix | None = None
    hyper_targets: np.ndarray | None = None


def prepare_gmae_instance(structure: Structure, config: GmaeConfig) -> GmaeInstanceCache:
    kernel = build_kernel(structure, config.diffusion)
    x_diff = diffuse_features(kernel, structure.features)
    enhanced = enhanced_adjacency(kernel, structure_adjacency(structure)).matrix
    weights = node_mask_weights(node_scores(x_diff), strategy=config.strategy)
    cache = GmaeInstanceCache(
        structure=structure,
        kernel=kernel.matrix,
        operator=propagation_operator(structure),
        mask_weights=weights,
        enhanced=enhanced,
    )
    if isinstance(structure, Hypergraph):
        cache.agg = mean_aggregation(structure)
        cache.hyper_targets = hyperedge_targets(enhanced, structure)
    return cache


def gmae_forward(
    leaves: dict[str, ad.Tensor],
    structure: Structure,
    operator: SparseMatrix,
    kernel: SparseMatrix,
    mask_idx: np.ndarray,
    encoder_config: EncoderConfig,
):
    """Tape forward pass: (x_hat over the mask, z, z_hat)."""
    mask_idx = np.asarray(mask_idx, dtype=np.int64)
    mask_bool = np.zeros(structure.n_nodes, dtype=bool)
    mask_bool[mask_idx] = True
    x_tilde = ad.row_mix(structure.features, leaves["mask_token"], mask_bool)
    x_tilde_diff = ad.spmm(kernel, x_tilde)
    z = encode_tape(leaves, x_tilde_diff, operator, encoder_config)
    z_hat = ad.spmm(kernel, z)
    x_hat = decode_tape(leaves, ad.gather_rows(z_hat, mask_idx)) if mask_idx.size else None
    return x_hat, z, z_hat


def _edge_loss_tape(z: ad.Tensor, pairs: np.ndarray, targets: np.ndarray) -> ad.Tensor:
    zi = ad.gather_rows(z, pairs[:, 0])
    zj = ad.gather_rows(z, pairs[:, 1])
    p = ad.clip(ad.sigmoid(ad.tsum(zi * zj, axis=1)), _CLIP, 1.0 - _CLIP)
    y = ad.constant(targets)
    term = y * ad.log(p) + (1.0 - y) * ad.log(1.0 - p)
    return -ad.tmean(term)


def _hyper_loss_tape(leaves, z: ad.Tensor, agg: SparseMatrix, targets: np.ndarray) -> ad.Tensor:
    pooled = ad.spmm(agg, z)
    scores = pooled @ leaves["structure_head.weight"] + leaves["structure_head.bias"]
    diff = ad.sigmoid(scores) - ad.constant(targets)
    return ad.tmean(diff * diff)


def gmae_instance_loss(
    store: ParameterStore,
    cache: GmaeInstanceCache,
    mask_idx: np.ndarray,
    pairs: np.ndarray | None,
    config: GmaeConfig,
):
    """Combined loss tape for one instance: (total, node_value, struct_value, leaves)."""
    leaves = make_leaves(store)
    x_hat, z, _ = gmae_forward(
        leaves, cache.structure, cache.operator, cache.kernel, mask_idx, store.config
    )
    if x_hat is not None:
        clean = cache.structure.features[mask_idx]
        diff = x_hat - ad.constant(clean)
        node_term = ad.tsum(diff * diff) * (1.0 / mask_idx.size)
    else:
        node_term = ad.constant(0.0)

    struct_term = None
    if config.structure_reconstruction:
        if isinstance(cache.structure, Graph):
            if pairs is not None and pairs.shape[0] > 0:
                targets = cache.enhanced.get_pairs(pairs[:, 0], pairs[:, 1])
                struct_term = _edge_loss_tape(z, pairs, targets)
        else:
            if cache.structure.n_hyperedges > 0:
                struct_term = _hyper_loss_tape(leaves, z, cache.agg, cache.hyper_targets)

    if struct_term is None:
        total = node_term
        struct_value = 0.0
    else:
        total = node_term + struct_term * config.structure_loss_weight
        struct_value = float(struct_term.data)
    return total, float(node_term.data), struct_value, leaves


def gmae_instance_step(
    store: ParameterStore,
    cache: GmaeInstanceCache,
    mask_idx: np.ndarray,
    pairs: np.ndarray | None,
    config: GmaeConfig,
) -> tuple[float, float, float]:
    """Forward, combined loss, backward, one Adam step.

    Returns (total, node, struct) loss values for this instance.
    """
    total, node_value, struct_value, leaves = gmae_instance_loss(
        store, cache, mask_idx, pairs, config
    )
    ad.backward(total)
    optimizer_step(store, collect_gradients(leaves, store), lr=config.lr)
    return (
        total_gmae_loss(node_value, struct_value, config.structure_loss_weight),
        node_value,
        struct_value,
    )


def train_gmae(
    instances: list[Structure],
    encoder_config: EncoderConfig,
    config: GmaeConfig,
    seed: int,
    workers: int = 1,
) -> tuple[ParameterStore, list[dict]]:
    """Masked-autoencoder pretraining loop.

    Per epoch, every instance gets a fresh mask and negative draw from the
    (seed, "gmae", epoch, instance) stream and one optimizer step, in
    instance order.  Returns the trained store and per-epoch telemetry.
    """
    config.validate()
    encoder_config.validate()
    if not instances:
        raise DataError("need at least one training instance")
    for k, structure in enumerate(instances):
        if structure.feature_dim != encoder_config.feature_dim:
            raise DataError(
                f"instance {k} has feature_dim {structure.feature_dim}, "
                f"encoder expects {encoder_config.feature_dim}"
            )
    caches = ordered_map(
        lambda s: prepare_gmae_instance(s, config), instances, workers=workers
    )
    store = init_encoder(encoder_config, seed)
    telemetry: list[dict] = []

    def draw(args):
        epoch, idx = args
        rng = stream_rng(seed, "gmae", epoch, int(idx))
        cache = caches[idx]
        mask_idx = sample_node_mask(
            cache.structure.n_nodes, config.mask_ratio, cache.mask_weights, rng
        )
        pairs = None
        if config.structure_reconstruction and isinstance(cache.structure, Graph):
            pairs = select_masked_edges(cache.structure, mask_idx, config.negative_ratio, rng)
        return mask_idx, pairs

    n = len(instances)
    for epoch in range(config.epochs):
        draws = ordered_map(draw, [(epoch, idx) for idx in range(n)], workers=workers)
        total_sum = node_sum = struct_sum = 0.0
        for idx in range(n):
            mask_idx, pairs = draws[idx]
            total, node, struct = gmae_instance_step(store, caches[idx], mask_idx, pairs, config)
            if not np.isfinite(total):
                raise TrainingDivergedError(f"non-finite loss in epoch {epoch}")
            total_sum += total
            node_sum += node
            struct_sum += struct
        telemetry.append(
            {
                "epoch": epoch + 1,
                "total_loss": total_sum / n,
                "node_loss": node_sum / n,
                "struct_loss": struct_sum / n,
            }
        )
        store.rng_state["epochs_completed"] = epoch + 1
    return store, telemetry
