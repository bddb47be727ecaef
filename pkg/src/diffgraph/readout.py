"""Graph-level readouts over node embeddings.

Every readout accepts either a plain ndarray or an autodiff Tensor and
returns the matching type, so the same code serves frozen evaluation and
tape-based training.  The diffusion readout averages kernel-smoothed
embeddings, recomputing the kernel from whatever structure it is handed
(typically an augmented view).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .diffusion import DiffusionConfig, build_kernel
from .errors import ConfigError
from .graphs import Structure

READOUT_KINDS = ("mean", "max", "attention", "diffusion")


@dataclass(frozen=True)
class ReadoutConfig:
    kind: str = "mean"
    diffusion: DiffusionConfig | None = None

    def validate(self) -> None:
        if self.kind not in READOUT_KINDS:
            raise ConfigError(f"unknown readout kind {self.kind!r}")
        if self.kind == "diffusion":
            if self.diffusion is None:
                raise ConfigError("diffusion readout needs a diffusion config")
            self.diffusion.validate()
        elif self.diffusion is not None:
            raise ConfigError(f"readout kind {self.kind!r} takes no diffusion config")


def _is_tensor(z) -> bool:
    return isinstance(z, Tensor)


def mean_readout(z):
    if _is_tensor(z):
        return ad.tmean(z, axis=0)
    return np.mean(np.asarray(z, dtype=np.float64), axis=0)


def max_readout(z):
    """Columnwise max; gradient flows to the first maximal row per column."""
    if _is_tensor(z):
        return ad.max_rows(z)
    return np.max(np.asarray(z, dtype=np.float64), axis=0)


def attention_readout(z, weights):
    """Softmax(z @ w) attention over nodes; returns the weighted embedding sum."""
    if _is_tensor(z) or _is_tensor(weights):
        z = z if _is_tensor(z) else ad.constant(np.asarray(z, dtype=np.float64))
        weights = weights if _is_tensor(weights) else ad.constant(np.asarray(weights, dtype=np.float64))
        scores = ad.softmax_vec(z @ weights)
        return scores @ z
    z = np.asarray(z, dtype=np.float64)
    logits = z @ np.asarray(weights, dtype=np.float64)
    logits = logits - np.max(logits)
    scores = np.exp(logits)
    scores = scores / np.sum(scores)
    return scores @ z


def diffusion_readout(z, structure: Structure, config: DiffusionConfig):
    """Mean of kernel-diffused embeddings: (1/N) 1^T K Z."""
    kernel = build_kernel(structure, config)
    if _is_tensor(z):
        return ad.tmean(ad.spmm(kernel.matrix, z), axis=0)
    return np.mean(kernel.matrix.dense_matmul(np.asarray(z, dtype=np.float64)), axis=0)


def apply_readout(
    config: ReadoutConfig,
    z,
    structure: Structure | None = None,
    attention_weights=None,
):
    """Dispatch on config.kind; structure is only needed for diffusion."""
    config.validate()
    if config.kind == "mean":
        return mean_readout(z)
    if config.kind == "max":
        return max_readout(z)
    if config.kind == "attention":
        if attention_weights is None:
            raise ConfigError("attention readout needs attention weights")
        return attention_readout(z, attention_weights)
    if structure is None:
        raise ConfigError("diffusion readout needs the structure")
    return diffusion_readout(z, structure, config.diffusion)
