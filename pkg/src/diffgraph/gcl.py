"""Contrastive pretraining over augmented structure views.

Each instance yields two diffusion-guided views per epoch; the encoder plus
a readout maps each view to one embedding, and a temperature-scaled NT-Xent
loss pulls the two views of an instance together while pushing apart all
other views in the batch.  The loss gradient with respect to the stacked
embeddings is analytic; it then flows through each instance's own tape into
the shared parameter store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .augment import AugmentConfig, AugmentedView, DropPlan, drop_plan, sample_view
from .diffusion import DiffusionConfig, build_kernel, diffuse_features, enhanced_adjacency
from .encoder import (
    EncoderConfig,
    ParameterStore,
    accumulate_gradients,
    collect_gradients,
    encode_tape,
    init_encoder,
    make_leaves,
    optimizer_step,
    propagation_operator,
)
from .errors import ConfigError, DataError, TrainingDivergedError
from .graphs import Structure, structure_adjacency
from .parallel import ordered_map
from .readout import ReadoutConfig, apply_readout
from .rng import stream_rng


@dataclass(frozen=True)
class GclConfig:
    tau: float = 0.5
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 8
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)

    def validate(self) -> None:
        if not (self.tau > 0.0) or not np.isfinite(self.tau):
            raise ConfigError(f"tau must be positive and finite, got {self.tau}")
        if not (self.lr > 0.0) or not np.isfinite(self.lr):
            raise ConfigError(f"lr must be positive and finite, got {self.lr}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs must be a non-negative integer, got {self.epochs}")
        if not isinstance(self.batch_size, int) or self.batch_size < 2:
            raise ConfigError(f"batch_size must be an integer >= 2, got {self.batch_size}")
        self.diffusion.validate()
        self.augment.validate()
        self.readout.validate()


def ntxent_loss(g1: np.ndarray, g2: np.ndarray, tau: float):
    """NT-Xent loss and its analytic gradients.

    Stacks the two view embeddings into 2B rows, cosine-normalizes them, and
    treats row a and row (a + B) mod 2B as the positive pair.  Returns
    (loss, d_g1, d_g2) with gradients of the mean per-anchor loss.
    """
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if g1.ndim != 2 or g1.shape != g2.shape:
        raise ConfigError(f"view embeddings must share a (B, d) shape, got {g1.shape} and {g2.shape}")
    if g1.shape[0] < 2:
        raise ConfigError("contrastive batches need at least 2 instances")
    if not (tau > 0.0):
        raise ConfigError(f"tau must be positive, got {tau}")
    b = g1.shape[0]
    u0 = np.vstack([g1, g2])
    norms = np.linalg.norm(u0, axis=1)
    if not np.all(np.isfinite(u0)) or np.any(norms == 0.0):
        raise TrainingDivergedError("degenerate embedding in contrastive batch")
    u = u0 / norms[:, None]
    s = (u @ u.T) / tau
    np.fill_diagonal(s, -np.inf)
    anchors = np.arange(2 * b)
    pos = (anchors + b) % (2 * b)
    row_max = np.max(s, axis=1)
    z = np.exp(s - row_max[:, None])  # diagonal becomes exp(-inf) = 0
    denom = np.sum(z, axis=1)
    log_prob = s[anchors, pos] - (row_max + np.log(denom))
    loss = float(-np.mean(log_prob))

    grad_s = z / denom[:, None]
    grad_s[anchors, pos] -= 1.0
    grad_s /= 2.0 * b
    du = (grad_s + grad_s.T) @ u / tau
    de = (du - np.sum(du * u, axis=1)[:, None] * u) / norms[:, None]
    return loss, de[:b], de[b:]


def alignment_stats(g1: np.ndarray, g2: np.ndarray) -> tuple[float, float]:
    """Mean cosine similarity of positive pairs and of all negative pairs."""
    u0 = np.vstack([np.asarray(g1, dtype=np.float64), np.asarray(g2, dtype=np.float64)])
    u = u0 / np.linalg.norm(u0, axis=1)[:, None]
    sims = u @ u.T
    n = u0.shape[0]
    b = n // 2
    anchors = np.arange(n)
    pos = (anchors + b) % n
    pos_align = float(np.mean(sims[anchors, pos]))
    mask = np.ones((n, n), dtype=bool)
    mask[anchors, anchors] = False
    mask[anchors, pos] = False
    neg_align = float(np.mean(sims[mask]))
    return pos_align, neg_align


@dataclass
class InstanceCache:
    """Parameter-independent per-instance state, computed once per run."""

    structure: Structure
    x_diff: np.ndarray
    plan: DropPlan


def prepare_instance(structure: Structure, diffusion: DiffusionConfig, augment: AugmentConfig) -> InstanceCache:
    kernel = build_kernel(structure, diffusion)
    x_diff = diffuse_features(kernel, structure.features)
    enhanced = enhanced_adjacency(kernel, structure_adjacency(structure))
    plan = drop_plan(structure, enhanced.matrix, x_diff, augment)
    return InstanceCache(structure=structure, x_diff=x_diff, plan=plan)


def _check_instances(instances, encoder_config: EncoderConfig) -> None:
    if not instances:
        raise DataError("need at least one training instance")
    for k, structure in enumerate(instances):
        if structure.feature_dim != encoder_config.feature_dim:
            raise DataError(
                f"instance {k} has feature_dim {structure.feature_dim}, "
                f"encoder expects {encoder_config.feature_dim}"
            )


def _view_embedding(leaves, view: AugmentedView, config: GclConfig, encoder_config: EncoderConfig):
    operator = propagation_operator(view.structure)
    z = encode_tape(leaves, ad.constant(view.structure.features), operator, encoder_config)
    return apply_readout(
        config.readout,
        z,
        structure=view.structure,
        attention_weights=leaves["readout.attention"],
    )


def gcl_batch_gradients(
    store: ParameterStore,
    caches: list[InstanceCache],
    batch: np.ndarray,
    config: GclConfig,
    encoder_config: EncoderConfig,
    seed: int,
    epoch: int,
) -> tuple[float, float, float, dict]:
    """Loss, alignment stats, and parameter gradients for one batch, no update.

    View sampling uses the (seed, "gcl", epoch, instance) stream, so a given
    instance sees the same draws no matter how batches are formed.
    """
    tapes = []
    for idx in batch:
        cache = caches[idx]
        rng = stream_rng(seed, "gcl", epoch, int(idx))
        view1 = sample_view(cache.structure, cache.plan, cache.x_diff, rng)
        view2 = sample_view(cache.structure, cache.plan, cache.x_diff, rng)
        leaves = make_leaves(store)
        e1 = _view_embedding(leaves, view1, config, encoder_config)
        e2 = _view_embedding(leaves, view2, config, encoder_config)
        tapes.append((leaves, e1, e2))

    g1 = np.stack([e1.data for _, e1, _ in tapes])
    g2 = np.stack([e2.data for _, _, e2 in tapes])
    loss, d_g1, d_g2 = ntxent_loss(g1, g2, config.tau)
    pos_align, neg_align = alignment_stats(g1, g2)

    total: dict[str, np.ndarray] = {}
    for row, (leaves, e1, e2) in enumerate(tapes):
        ad.backward(e1, seed=d_g1[row])
        ad.backward(e2, seed=d_g2[row])
        accumulate_gradients(total, collect_gradients(leaves, store))
    return loss, pos_align, neg_align, total


def gcl_batch_step(
    store: ParameterStore,
    caches: list[InstanceCache],
    batch: np.ndarray,
    config: GclConfig,
    encoder_config: EncoderConfig,
    seed: int,
    epoch: int,
) -> tuple[float, float, float]:
    """Two views per instance, analytic NT-Xent, one Adam step.

    Returns (loss, pos_align, neg_align) for the batch.
    """
    loss, pos_align, neg_align, total = gcl_batch_gradients(
        store, caches, batch, config, encoder_config, seed, epoch
    )
    optimizer_step(store, total, lr=config.lr)
    return loss, pos_align, neg_align


def train_gcl(
    instances: list[Structure],
    encoder_config: EncoderConfig,
    config: GclConfig,
    seed: int,
    workers: int = 1,
) -> tuple[ParameterStore, list[dict]]:
    """Contrastive pretraining loop.

    Instances are shuffled each epoch via the (seed, "shuffle", epoch)
    stream and cut into batches of config.batch_size; a trailing batch with
    fewer than 2 instances is skipped.  Returns the trained store and one
    telemetry row per epoch.
    """
    config.validate()
    encoder_config.validate()
    _check_instances(instances, encoder_config)

    caches = ordered_map(
        lambda s: prepare_instance(s, config.diffusion, config.augment),
        instances,
        workers=workers,
    )
    store = init_encoder(encoder_config, seed)
    telemetry: list[dict] = []
    n = len(instances)
    for epoch in range(config.epochs):
        order = stream_rng(seed, "shuffle", epoch).permutation(n)
        loss_sum = pos_sum = neg_sum = 0.0
        weight = 0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            if batch.size < 2:
                continue
            loss, pos_align, neg_align = gcl_batch_step(
                store, caches, batch, config, encoder_config, seed, epoch
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite contrastive loss in epoch {epoch}")
            loss_sum += loss * batch.size
            pos_sum += pos_align * batch.size
            neg_sum += neg_align * batch.size
            weight += int(batch.size)
        if weight == 0:
            raise DataError("every batch was smaller than 2 instances; add data or shrink batch_size")
        telemetry.append(
            {
                "epoch": epoch + 1,
                "loss": loss_sum / weight,
                "pos_align": pos_sum / weight,
                "neg_align": neg_sum / weight,
            }
        )
        store.rng_state["epochs_completed"] = epoch + 1
    return store, telemetry
