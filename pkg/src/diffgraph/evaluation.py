"""Frozen-encoder embedding and linear-probe evaluation.

The probe is a multinomial logistic regression trained full-batch from a
zero initialization, so given the split it is fully deterministic; the only
randomness is the stratified train/test shuffle, one stream per probe seed.
Metric conventions: AUC is the Mann-Whitney statistic with average-rank tie
credit, macro-F1 counts a class with neither true nor predicted instances
as 0 and flags it, multiclass AUC is the unweighted one-vs-rest mean over
classes present in the test split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import ParameterStore, encode
from .errors import ConfigError, DataError
from .graphs import Structure
from .parallel import ordered_map
from .readout import ReadoutConfig, apply_readout
from .rng import stream_rng


# -- embedding -------------------------------------------------------------------


def embed_dataset(
    store: ParameterStore,
    instances: list[Structure],
    readout: ReadoutConfig,
    workers: int = 1,
) -> np.ndarray:
    """Encode + readout every instance with frozen parameters; rows align."""
    readout.validate()
    if not instances:
        raise DataError("cannot embed an empty dataset")

    def one(structure: Structure) -> np.ndarray:
        z = encode(store, structure.features, structure)
        return apply_readout(
            readout, z, structure=structure,
            attention_weights=store.tensors["readout.attention"],
        )

    return np.stack(ordered_map(one, instances, workers=workers))


# -- metrics ---------------------------------------------------------------------


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC: ties between a positive and a negative count 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be aligned vectors")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("auc labels must be 0 or 1")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("auc needs both classes present")
    ranks = _average_ranks(scores)
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg)


def multiclass_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Unweighted one-vs-rest mean over the classes present in labels."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise DataError("probs must have one row per label")
    present = np.unique(labels)
    if present.size < 2:
        raise DataError("auc needs at least two classes present")
    per_class = [
        auc(probs[:, int(c)], (labels == c).astype(np.int64)) for c in present
    ]
    return float(np.mean(per_class))


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1 or labels.size == 0:
        raise DataError("predictions and labels must be aligned non-empty vectors")
    return float(np.mean(predictions == labels))


def macro_f1(
    predictions: np.ndarray, labels: np.ndarray, n_classes: int | None = None
) -> tuple[float, list[int]]:
    """Unweighted per-class F1 mean.

    A class with neither true nor predicted instances contributes 0 and is
    returned in the degenerate list rather than silently skipped.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1 or labels.size == 0:
        raise DataError("predictions and labels must be aligned non-empty vectors")
    if n_classes is None:
        n_classes = int(max(predictions.max(), labels.max())) + 1
    scores, degenerate = [], []
    for c in range(n_classes):
        tp = int(np.sum((predictions == c) & (labels == c)))
        fp = int(np.sum((predictions == c) & (labels != c)))
        fn = int(np.sum((predictions != c) & (labels == c)))
        if tp + fp + fn == 0:
            degenerate.append(c)
            scores.append(0.0)
        else:
            scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores)), degenerate


# -- linear probe ----------------------------------------------------------------


@dataclass(frozen=True)
class MetricSummary:
    per_seed: tuple
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {
            "per_seed": [float(v) for v in self.per_seed],
            "mean": float(self.mean),
            "std": float(self.std),
        }


@dataclass(frozen=True)
class ProbeResult:
    accuracy: MetricSummary
    macro_f1: MetricSummary
    auc: MetricSummary
    degenerate_f1_seeds: tuple

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy.to_dict(),
            "macro_f1": self.macro_f1.to_dict(),
            "auc": self.auc.to_dict(),
            "degenerate_f1_seeds": [int(s) for s in self.degenerate_f1_seeds],
        }


def _summarize(values: list[float]) -> MetricSummary:
    arr = np.asarray(values, dtype=np.float64)
    return MetricSummary(
        per_seed=tuple(float(v) for v in values),
        mean=float(arr.mean()),
        std=float(arr.std()),  # population std
    )


def stratified_split(
    labels: np.ndarray, split_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffle, floor split (at least one train instance per class)."""
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.nonzero(labels == c)[0])
        n_train = max(1, int(np.floor(split_fraction * idx.size)))
        train.append(idx[:n_train])
        test.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test)) if any(t.size for t in test) else np.array([], dtype=np.int64)
    if np.unique(labels[train_idx]).size < 2:
        raise DataError("train split contains a single class")
    if test_idx.size == 0:
        raise DataError("test split is empty; lower split_fraction")
    return train_idx, test_idx


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train_softmax_regression(
    x: np.ndarray, y: np.ndarray, n_classes: int, epochs: int, lr: float
) -> np.ndarray:
    """Full-batch gradient descent from zero weights; bias via appended column."""
    xb = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    w = np.zeros((xb.shape[1], n_classes))
    onehot = np.zeros((x.shape[0], n_classes))
    onehot[np.arange(x.shape[0]), y] = 1.0
    for _ in range(epochs):
        probs = _softmax_rows(xb @ w)
        w -= lr * (xb.T @ (probs - onehot)) / x.shape[0]
    return w


def predict_softmax_regression(w: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xb = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    probs = _softmax_rows(xb @ w)
    return np.argmax(probs, axis=1), probs


def probe_once(
    embeddings: np.ndarray,
    labels: np.ndarray,
    split_fraction: float,
    rng: np.random.Generator,
    epochs: int,
    lr: float,
) -> tuple[float, float, float, bool]:
    n_classes = int(np.max(labels)) + 1
    train_idx, test_idx = stratified_split(labels, split_fraction, rng)
    w = train_softmax_regression(
        embeddings[train_idx], labels[train_idx], n_classes, epochs, lr
    )
    predictions, probs = predict_softmax_regression(w, embeddings[test_idx])
    test_labels = labels[test_idx]
    acc = accuracy(predictions, test_labels)
    f1, degenerate = macro_f1(predictions, test_labels, n_classes)
    auc_value = multiclass_auc(probs, test_labels)
    return acc, f1, auc_value, bool(degenerate)


def linear_probe(
    embeddings: np.ndarray,
    labels,
    split_fraction: float = 0.8,
    seed: int = 0,
    n_seeds: int = 5,
    epochs: int = 200,
    lr: float = 0.5,
) -> ProbeResult:
    """Repeated stratified-split probing; per-seed metrics plus mean and std."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if embeddings.ndim != 2 or embeddings.shape[0] != labels.shape[0]:
        raise DataError("embeddings must have one row per label")
    if not np.all(np.isfinite(embeddings)):
        raise DataError("embeddings must be finite")
    if labels.size and labels.min() < 0:
        raise DataError("labels must be non-negative")
    if not (0.0 < split_fraction < 1.0):
        raise ConfigError(f"split_fraction must lie in (0, 1), got {split_fraction}")
    if not isinstance(n_seeds, int) or n_seeds < 1:
        raise ConfigError(f"n_seeds must be a positive integer, got {n_seeds}")
    if not isinstance(epochs, int) or epochs < 1:
        raise ConfigError(f"epochs must be a positive integer, got {epochs}")
    if not lr > 0:
        raise ConfigError(f"lr must be positive, got {lr}")
    accs, f1s, aucs, degenerate_seeds = [], [], [], []
    for k in range(n_seeds):
        rng = stream_rng(seed, "probe", k)
        acc, f1, auc_value, flagged = probe_once(
            embeddings, labels, split_fraction, rng, epochs, lr
        )
        accs.append(acc)
        f1s.append(f1)
        aucs.append(auc_value)
        if flagged:
            degenerate_seeds.append(k)
    return ProbeResult(
        accuracy=_summarize(accs),
        macro_f1=_summarize(f1s),
        auc=_summarize(aucs),
        degenerate_f1_seeds=tuple(degenerate_seeds),
    )
