"""Analytical diffusion kernels and the feature/structure products built on them.

Three kernel families share one truncated-series accumulation: a random-walk
series sum_k lam^k P^k, personalized PageRank alpha * sum_k (1-alpha)^k P^k,
and a heat kernel exp(-tL) computed by scaling-and-squaring. Explicit series
weights override the presets and run the plain truncated series on the
kernel's base matrix.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError
from .graphs import Structure, laplacian_matrix, transition_matrix
from .sparse import SparseMatrix

KERNEL_KINDS = ("random_walk", "ppr", "heat")

# Raise the squaring exponent until the Taylor remainder bound drops below
# this; rounding grows with 2^s, so the exponent is also capped.
_HEAT_TARGET = 1e-12
_HEAT_MAX_SQUARINGS = 30


@dataclass(frozen=True)
class DiffusionConfig:
    kind: str = "ppr"
    lam: float = 0.5
    alpha: float = 0.15
    time: float = 1.0
    order: int = 4
    series_weights: tuple[float, ...] | None = None
    sparsify_epsilon: float = 0.0
    sparsify_top_k: int | None = None

    def validate(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if not isinstance(self.order, (int, np.integer)) or self.order < 0:
            raise ConfigError(f"order must be a non-negative integer, got {self.order!r}")
        if self.kind == "random_walk" and not (0.0 < self.lam < 1.0):
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.kind == "ppr" and not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind == "heat" and not self.time > 0.0:
            raise ConfigError(f"time must be positive, got {self.time}")
        if self.series_weights is not None:
            w = np.asarray(self.series_weights, dtype=np.float64)
            if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
                raise ConfigError("series_weights must be a non-empty list of finite reals")
        if self.sparsify_epsilon < 0:
            raise ConfigError("sparsify_epsilon must be non-negative")
        if self.sparsify_top_k is not None and self.sparsify_top_k < 1:
            raise ConfigError("sparsify_top_k must be a positive integer")
        if self.sparsify_epsilon > 0 and self.sparsify_top_k is not None:
            raise ConfigError("set at most one of sparsify_epsilon and sparsify_top_k")


@dataclass(frozen=True)
class DiffusionKernel:
    matrix: SparseMatrix
    config: DiffusionConfig
    source_hash: str


@dataclass(frozen=True)
class EnhancedAdjacency:
    """Diffusion-enhanced connectivity K A K^T: symmetric, entries in [0, 1]."""
    matrix: SparseMatrix


def _digest(*matrices: SparseMatrix, extra: np.ndarray | None = None) -> str:
    h = hashlib.blake2s(digest_size=16)
    for m in matrices:
        h.update(np.int64([m.n_rows, m.n_cols]).tobytes())
        h.update(m.row_offsets.tobytes())
        h.update(m.col_indices.tobytes())
        h.update(m.values.tobytes())
    if extra is not None:
        h.update(np.asarray(extra, dtype=np.float64).tobytes())
    return h.hexdigest()


def structure_hash(structure: Structure) -> str:
    from .graphs import Graph

    if isinstance(structure, Graph):
        return _digest(structure.adjacency)
    return _digest(structure.incidence, extra=structure.hyperedge_weights)


def series_kernel(base: SparseMatrix, weights) -> SparseMatrix:
    """Horner accumulation of sum_k weights[k] * base^k."""
    weights = np.asarray(weights, dtype=np.float64)
    if base.n_rows != base.n_cols:
        raise DataError("series base must be square")
    eye = SparseMatrix.identity(base.n_rows)
    acc = eye.scale(weights[-1])
    for k in range(weights.size - 2, -1, -1):
        acc = base.matmul(acc)
        if weights[k] != 0.0:
            acc = acc.add(eye.scale(weights[k]))
    return acc


def rw_kernel(transition: SparseMatrix, lam: float, order: int) -> SparseMatrix:
    if not (0.0 < lam < 1.0):
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    return series_kernel(transition, lam ** np.arange(order + 1))


def ppr_kernel(transition: SparseMatrix, alpha: float, order: int) -> SparseMatrix:
    if not (0.0 < alpha <= 1.0):
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    return series_kernel(transition, alpha * (1.0 - alpha) ** np.arange(order + 1))


def heat_kernel(laplacian: SparseMatrix, time: float, order: int) -> SparseMatrix:
    """exp(-t L) by scaling-and-squaring around an order-`order` Taylor core."""
    if not time > 0.0:
        raise ConfigError(f"time must be positive, got {time}")
    if order == 0:
        # the truncated series degenerates to the identity
        return SparseMatrix.identity(laplacian.n_rows)
    norm1 = float(laplacian.col_abs_sums().max()) if laplacian.nnz else 0.0
    scale = time * norm1
    if scale == 0.0:
        return SparseMatrix.identity(laplacian.n_rows)
    # smallest s with theta <= 0.5, then tighten until the remainder bound
    # 2^s * theta^(order+1) / (order+1)! meets the target
    s = max(0, math.ceil(math.log2(scale / 0.5)))
    fact = float(math.factorial(order + 1))
    while s < _HEAT_MAX_SQUARINGS:
        theta = scale / (2.0 ** s)
        if (2.0 ** s) * theta ** (order + 1) / fact <= _HEAT_TARGET:
            break
        s += 1
    tau = time / (2.0 ** s)
    coeffs = np.array(
        [(-tau) ** k / math.factorial(k) for k in range(order + 1)], dtype=np.float64
    )
    acc = series_kernel(laplacian, coeffs)
    for _ in range(s):
        acc = acc.matmul(acc)
    return acc


def build_kernel(structure: Structure, config: DiffusionConfig) -> DiffusionKernel:
    """Materialize the configured kernel for a graph or hypergraph."""
    config.validate()
    if config.series_weights is not None:
        base = (
            laplacian_matrix(structure) if config.kind == "heat"
            else transition_matrix(structure)
        )
        matrix = series_kernel(base, np.asarray(config.series_weights, dtype=np.float64))
    elif config.kind == "random_walk":
        matrix = rw_kernel(transition_matrix(structure), config.lam, config.order)
    elif config.kind == "ppr":
        matrix = ppr_kernel(transition_matrix(structure), config.alpha, config.order)
    else:
        matrix = heat_kernel(laplacian_matrix(structure), config.time, config.order)
    if config.sparsify_epsilon > 0:
        matrix = _sparsify_matrix(matrix, epsilon=config.sparsify_epsilon)
    elif config.sparsify_top_k is not None:
        matrix = _sparsify_matrix(matrix, top_k=config.sparsify_top_k)
    if not np.all(np.isfinite(matrix.values)):
        raise DataError("kernel entries must be finite")
    return DiffusionKernel(matrix, config, structure_hash(structure))


def _sparsify_matrix(m: SparseMatrix, epsilon=None, top_k=None) -> SparseMatrix:
    offs, cols, vals = m.row_offsets, m.col_indices, m.values
    if m.nnz == 0:
        return m
    rows = np.repeat(np.arange(m.n_rows), np.diff(offs))
    absv = np.abs(vals)
    if epsilon is not None:
        keep = absv >= epsilon
    else:
        order = np.lexsort((cols, -absv, rows))
        rr = rows[order]
        starts = np.flatnonzero(np.r_[True, rr[1:] != rr[:-1]])
        grp = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, rr.size]))
        rank_in_row = np.arange(rr.size) - starts[grp]
        keep = np.zeros(vals.size, dtype=bool)
        keep[order[rank_in_row < top_k]] = True
    original = m.row_sums()
    # a fully emptied row whose sum mattered keeps its dominant entry
    kept_count = np.bincount(rows[keep], minlength=m.n_rows)
    for i in np.flatnonzero((kept_count == 0) & (original != 0.0)):
        seg = slice(offs[i], offs[i + 1])
        if offs[i + 1] > offs[i]:
            keep[offs[i] + int(np.argmax(absv[seg]))] = True
    kept_rows, kept_cols, kept_vals = rows[keep], cols[keep], vals[keep]
    kept_sum = np.bincount(kept_rows, weights=kept_vals, minlength=m.n_rows)
    factor = np.where(kept_sum != 0.0, original / np.where(kept_sum == 0.0, 1.0, kept_sum), 1.0)
    return SparseMatrix.from_triplets(
        kept_rows, kept_cols, kept_vals * factor[kept_rows], m.n_rows, m.n_cols
    )


def sparsify_kernel(kernel: DiffusionKernel, epsilon=None, top_k=None) -> DiffusionKernel:
    """Drop small entries (or keep per-row top-k), then rescale rows to the
    original row sums. Exactly one criterion must be given."""
    if (epsilon is None) == (top_k is None):
        raise ConfigError("pass exactly one of epsilon and top_k")
    if epsilon is not None and epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    if top_k is not None and top_k < 1:
        raise ConfigError("top_k must be a positive integer")
    matrix = _sparsify_matrix(kernel.matrix, epsilon=epsilon, top_k=top_k)
    config = replace(kernel.config, sparsify_epsilon=epsilon or 0.0, sparsify_top_k=top_k)
    return DiffusionKernel(matrix, config, kernel.source_hash)


def _kernel_matrix(kernel) -> SparseMatrix:
    return kernel.matrix if isinstance(kernel, DiffusionKernel) else kernel


def diffuse_features(kernel, features: np.ndarray) -> np.ndarray:
    """X_diff = K X."""
    matrix = _kernel_matrix(kernel)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != matrix.n_cols:
        raise DataError(
            f"features must be ({matrix.n_cols}, d) to diffuse, got {features.shape}"
        )
    return matrix.dense_matmul(features)


def enhanced_adjacency(kernel, adjacency: SparseMatrix) -> EnhancedAdjacency:
    """K A K^T, symmetrized, max-normalized, clipped to [0, 1]."""
    k = _kernel_matrix(kernel)
    if adjacency.n_rows != adjacency.n_cols or adjacency.n_rows != k.n_rows:
        raise DataError("adjacency shape must match the kernel")
    raw = k.matmul(adjacency).matmul(k.transpose())
    sym = raw.add(raw.transpose()).scale(0.5)
    if sym.nnz:
        top = float(sym.values.max())
        if top > 0:
            sym = sym.scale(1.0 / top)
        clipped = np.clip(sym.values, 0.0, 1.0)
        rows = np.repeat(np.arange(sym.n_rows), np.diff(sym.row_offsets))
        sym = SparseMatrix.from_triplets(rows, sym.col_indices, clipped, sym.n_rows, sym.n_cols)
    return EnhancedAdjacency(sym)
