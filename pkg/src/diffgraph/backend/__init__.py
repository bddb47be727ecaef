"""Backend selection for the CSR hot kernels.

Default is the numba-jitted path when numba imports cleanly; the env var
DIFFGRAPH_BACKEND={numba,numpy} forces a choice, and use_backend() switches
in-process (tests, benchmarks). Both paths are bit-identical.
"""
from __future__ import annotations

import os

from ..errors import ConfigError
from . import numpy_ops

_modules = {"numpy": numpy_ops}
_active: str | None = None


def _load_numba():
    if "numba" not in _modules:
        from . import numba_ops  # deferred: importing numba is slow

        _modules["numba"] = numba_ops
    return _modules["numba"]


def use_backend(name: str) -> None:
    global _active
    if name not in ("numpy", "numba"):
        raise ConfigError(f"unknown backend {name!r}; expected 'numpy' or 'numba'")
    if name == "numba":
        try:
            _load_numba()
        except ImportError as exc:
            raise ConfigError(f"numba backend requested but numba is unavailable: {exc}") from exc
    _active = name


def active_backend() -> str:
    global _active
    if _active is None:
        env = os.environ.get("DIFFGRAPH_BACKEND", "").strip().lower()
        if env:
            use_backend(env)
        else:
            try:
                _load_numba()
                _active = "numba"
            except ImportError:
                _active = "numpy"
    return _active


def _ops():
    return _modules[active_backend()]


def spmm(indptr, indices, data, dense):
    return _ops().spmm(indptr, indices, data, dense)


def spgemm(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows, n_cols):
    return _ops().spgemm(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows, n_cols)


def transpose(indptr, indices, data, n_rows, n_cols):
    return _ops().transpose(indptr, indices, data, n_rows, n_cols)


def add(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows):
    return _ops().add(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows)
