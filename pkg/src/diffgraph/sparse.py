"""Immutable CSR sparse matrices.

Storage invariants: row_offsets is non-decreasing with row_offsets[0] == 0 and
row_offsets[-1] == nnz; col_indices are strictly increasing within each row;
values are float64 and never explicitly zero after construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .backend.numpy_ops import coalesce
from .errors import DataError


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SparseMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_triplets(rows, cols, vals, n_rows: int, n_cols: int) -> "SparseMatrix":
        """Build from COO triplets; duplicates summed, exact zeros dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise DataError("triplet arrays must share one length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise DataError(f"row index out of range for shape ({n_rows}, {n_cols})")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise DataError(f"column index out of range for shape ({n_rows}, {n_cols})")
        indptr, indices, data = coalesce(rows, cols, vals, n_rows)
        return _from_csr_pruned(n_rows, n_cols, indptr, indices, data)

    @staticmethod
    def from_dense(mat) -> "SparseMatrix":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2:
            raise DataError("dense input must be 2-D")
        rows, cols = np.nonzero(mat)
        return SparseMatrix.from_triplets(rows, cols, mat[rows, cols], mat.shape[0], mat.shape[1])

    @staticmethod
    def identity(n: int) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return SparseMatrix(
            n, n,
            _freeze(np.arange(n + 1, dtype=np.int64)),
            _freeze(idx),
            _freeze(np.ones(n, dtype=np.float64)),
        )

    @staticmethod
    def zeros(n_rows: int, n_cols: int) -> "SparseMatrix":
        return SparseMatrix(
            n_rows, n_cols,
            _freeze(np.zeros(n_rows + 1, dtype=np.int64)),
            _freeze(np.zeros(0, dtype=np.int64)),
            _freeze(np.zeros(0, dtype=np.float64)),
        )

    # -- basic queries -----------------------------------------------------

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    def row_sums(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        return np.bincount(rows, weights=self.values, minlength=self.n_rows)

    def col_abs_sums(self) -> np.ndarray:
        return np.bincount(self.col_indices, weights=np.abs(self.values), minlength=self.n_cols)

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(min(self.n_rows, self.n_cols), dtype=np.float64)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        hit = rows == self.col_indices
        diag[rows[hit]] = self.values[hit]
        return diag

    def get_pairs(self, rows, cols) -> np.ndarray:
        """Stored value at each (row, col) query, 0.0 where absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        out = np.zeros(rows.shape[0], dtype=np.float64)
        if self.nnz == 0:
            return out
        # keys are globally sorted because rows ascend and columns ascend within rows
        keys = np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))
        keys = keys * self.n_cols + self.col_indices
        queries = rows * self.n_cols + cols
        pos = np.searchsorted(keys, queries)
        inside = pos < keys.shape[0]
        hit = inside & (keys[np.minimum(pos, keys.shape[0] - 1)] == queries)
        out[hit] = self.values[pos[hit]]
        return out

    # -- algebra (hot paths dispatch to the backend kernels) ----------------

    def transpose(self) -> "SparseMatrix":
        indptr, indices, data = backend.transpose(
            self.row_offsets, self.col_indices, self.values, self.n_rows, self.n_cols
        )
        return SparseMatrix(
            self.n_cols, self.n_rows, _freeze(indptr), _freeze(indices), _freeze(data)
        )

    def matmul(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.n_cols != other.n_rows:
            raise DataError(
                f"matmul shape mismatch: ({self.n_rows},{self.n_cols}) @ "
                f"({other.n_rows},{other.n_cols})"
            )
        indptr, indices, data = backend.spgemm(
            self.row_offsets, self.col_indices, self.values,
            other.row_offsets, other.col_indices, other.values,
            self.n_rows, other.n_cols,
        )
        return _from_csr_pruned(self.n_rows, other.n_cols, indptr, indices, data)

    def dense_matmul(self, dense: np.ndarray) -> np.ndarray:
        dense = np.asarray(dense, dtype=np.float64)
        squeeze = dense.ndim == 1
        if squeeze:
            dense = dense[:, None]
        if dense.shape[0] != self.n_cols:
            raise DataError(
                f"dense_matmul shape mismatch: ({self.n_rows},{self.n_cols}) @ {dense.shape}"
            )
        out = backend.spmm(self.row_offsets, self.col_indices, self.values, dense)
        return out[:, 0] if squeeze else out

    def add(self, other: "SparseMatrix") -> "SparseMatrix":
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols):
            raise DataError("add requires matching shapes")
        indptr, indices, data = backend.add(
            self.row_offsets, self.col_indices, self.values,
            other.row_offsets, other.col_indices, other.values,
            self.n_rows,
        )
        return _from_csr_pruned(self.n_rows, self.n_cols, indptr, indices, data)

    def scale(self, factor: float) -> "SparseMatrix":
        return _from_csr_pruned(
            self.n_rows, self.n_cols,
            self.row_offsets.copy(), self.col_indices.copy(), self.values * float(factor),
        )

    def scale_rows(self, diag: np.ndarray) -> "SparseMatrix":
        diag = np.asarray(diag, dtype=np.float64)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        return _from_csr_pruned(
            self.n_rows, self.n_cols,
            self.row_offsets.copy(), self.col_indices.copy(), self.values * diag[rows],
        )

    def scale_cols(self, diag: np.ndarray) -> "SparseMatrix":
        diag = np.asarray(diag, dtype=np.float64)
        return _from_csr_pruned(
            self.n_rows, self.n_cols,
            self.row_offsets.copy(), self.col_indices.copy(), self.values * diag[self.col_indices],
        )

    def max_abs_diff(self, other: "SparseMatrix") -> float:
        delta = self.add(other.scale(-1.0))
        return float(np.max(np.abs(delta.values))) if delta.nnz else 0.0

    def validate(self) -> None:
        offs, cols, vals = self.row_offsets, self.col_indices, self.values
        if offs.shape != (self.n_rows + 1,) or offs[0] != 0 or offs[-1] != vals.shape[0]:
            raise DataError("row_offsets inconsistent with nnz")
        if np.any(np.diff(offs) < 0):
            raise DataError("row_offsets must be non-decreasing")
        if cols.shape != vals.shape:
            raise DataError("col_indices and values must align")
        if cols.size:
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise DataError("column index out of range")
            rows = np.repeat(np.arange(self.n_rows), np.diff(offs))
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (np.diff(cols) <= 0)):
                raise DataError("col_indices must strictly increase within each row")
        if np.any(vals == 0.0):
            raise DataError("explicit zeros are not stored")
        if not np.all(np.isfinite(vals)):
            raise DataError("values must be finite")


def _from_csr_pruned(n_rows, n_cols, indptr, indices, data) -> SparseMatrix:
    """Wrap raw CSR arrays, dropping entries that summed to exactly zero."""
    zero = data == 0.0
    if np.any(zero):
        keep = ~zero
        rows = np.repeat(np.arange(n_rows), np.diff(indptr))[keep]
        indices = indices[keep]
        data = data[keep]
        indptr = np.zeros(n_rows + 1, np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
    return SparseMatrix(
        int(n_rows), int(n_cols), _freeze(indptr), _freeze(indices), _freeze(data)
    )
