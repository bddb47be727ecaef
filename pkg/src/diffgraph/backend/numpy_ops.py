"""Pure-numpy CSR kernels.

Reference semantics for the numba backend. Accumulation order matches the
jitted loops (entry order within each row), so both backends produce
bit-identical results.
"""
from __future__ import annotations

import numpy as np

# Cap on intermediate expansion size; bounds worst-case memory on dense-ish products.
_CHUNK = 1 << 22


def _expand_rows(indptr: np.ndarray) -> np.ndarray:
    n_rows = indptr.shape[0] - 1
    return np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))


def coalesce(rows, cols, vals, n_rows):
    """Sort COO triplets row-major and sum duplicates (stable: input order kept)."""
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    if r.shape[0] == 0:
        return np.zeros(n_rows + 1, np.int64), c.astype(np.int64), v.astype(np.float64)
    new = np.empty(r.shape[0], dtype=bool)
    new[0] = True
    new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(new)
    # sequential unbuffered accumulation: bit-identical to the jitted loops
    # (reduceat would sum long groups pairwise)
    group = np.cumsum(new) - 1
    sums = np.zeros(starts.shape[0], dtype=np.float64)
    np.add.at(sums, group, v)
    indptr = np.zeros(n_rows + 1, np.int64)
    np.add.at(indptr, r[starts] + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, c[starts].astype(np.int64), sums


def spmm(indptr, indices, data, dense):
    """CSR @ dense -> dense."""
    n_rows = indptr.shape[0] - 1
    out = np.zeros((n_rows, dense.shape[1]), dtype=np.float64)
    nnz = indices.shape[0]
    if nnz == 0:
        return out
    rows = _expand_rows(indptr)
    step = max(1, _CHUNK // max(1, dense.shape[1]))
    for lo in range(0, nnz, step):
        hi = min(nnz, lo + step)
        np.add.at(out, rows[lo:hi], data[lo:hi, None] * dense[indices[lo:hi]])
    return out


def spgemm(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows, n_cols):
    """CSR @ CSR -> CSR. Output columns sorted; duplicates summed in k order."""
    lens_b = b_indptr[1:] - b_indptr[:-1]
    a_lens = np.diff(a_indptr)
    # cumulative expansion cost per A row, used to chunk the row range
    row_cost = np.zeros(n_rows + 1, dtype=np.int64)
    if a_indices.shape[0]:
        np.add.at(row_cost, _expand_rows(a_indptr) + 1, lens_b[a_indices])
    np.cumsum(row_cost, out=row_cost)

    parts_r, parts_c, parts_v = [], [], []
    row_start = 0
    while row_start < n_rows:
        row_end = int(np.searchsorted(row_cost, row_cost[row_start] + _CHUNK, side="right")) - 1
        row_end = max(row_end, row_start + 1)
        s, e = a_indptr[row_start], a_indptr[row_end]
        cols_a = a_indices[s:e]
        seg_len = lens_b[cols_a]
        total = int(seg_len.sum())
        if total:
            bounds = np.cumsum(seg_len)
            offs = np.repeat(bounds - seg_len, seg_len)
            pos = np.arange(total, dtype=np.int64) - offs + np.repeat(b_indptr[cols_a], seg_len)
            a_rows = np.repeat(
                np.arange(row_start, row_end, dtype=np.int64), a_lens[row_start:row_end]
            )
            parts_r.append(np.repeat(a_rows, seg_len))
            parts_c.append(b_indices[pos])
            parts_v.append(np.repeat(a_data[s:e], seg_len) * b_data[pos])
        row_start = row_end

    if not parts_r:
        empty = np.zeros(0, np.int64)
        return np.zeros(n_rows + 1, np.int64), empty, np.zeros(0, np.float64)
    return coalesce(
        np.concatenate(parts_r), np.concatenate(parts_c), np.concatenate(parts_v), n_rows
    )


def transpose(indptr, indices, data, n_rows, n_cols):
    rows = _expand_rows(indptr)
    order = np.lexsort((rows, indices))
    t_indptr = np.zeros(n_cols + 1, np.int64)
    np.add.at(t_indptr, indices + 1, 1)
    np.cumsum(t_indptr, out=t_indptr)
    return t_indptr, rows[order], data[order]


def add(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows):
    rows = np.concatenate([_expand_rows(a_indptr), _expand_rows(b_indptr)])
    cols = np.concatenate([a_indices, b_indices])
    vals = np.concatenate([a_data, b_data])
    return coalesce(rows, cols, vals, n_rows)
