"""Deterministic named RNG streams.

Every random draw in the package flows from one top-level seed through a
named stream, so any single component's randomness is reproducible in
isolation and independent of execution order or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError

_MASK64 = (1 << 64) - 1


def _label_key(label) -> int:
    # Stable across platforms and processes; Python's hash() is salted, so
    # string labels go through blake2s instead.
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    if isinstance(label, str):
        digest = hashlib.blake2s(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"stream labels must be int or str, got {type(label).__name__}")


def stream_rng(seed: int, *labels) -> np.random.Generator:
    """Generator for the stream identified by (seed, *labels)."""
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    key = tuple(_label_key(lbl) for lbl in labels)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
