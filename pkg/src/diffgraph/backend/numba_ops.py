"""JIT-compiled CSR kernels. Same contracts and accumulation order as numpy_ops."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def spmm(indptr, indices, data, dense):
    n_rows = indptr.shape[0] - 1
    d = dense.shape[1]
    out = np.zeros((n_rows, d), dtype=np.float64)
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            v = data[p]
            j = indices[p]
            for k in range(d):
                out[i, k] += v * dense[j, k]
    return out


@njit(cache=True, nogil=True)
def spgemm(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows, n_cols):
    # Gustavson with a dense per-row accumulator; partial sums run in k order.
    marker = np.full(n_cols, -1, np.int64)
    indptr = np.zeros(n_rows + 1, np.int64)
    for i in range(n_rows):
        cnt = 0
        for pa in range(a_indptr[i], a_indptr[i + 1]):
            k = a_indices[pa]
            for pb in range(b_indptr[k], b_indptr[k + 1]):
                j = b_indices[pb]
                if marker[j] != i:
                    marker[j] = i
                    cnt += 1
        indptr[i + 1] = indptr[i] + cnt

    nnz = indptr[n_rows]
    out_indices = np.empty(nnz, np.int64)
    out_data = np.empty(nnz, np.float64)
    acc = np.zeros(n_cols, np.float64)
    touched = np.empty(n_cols, np.int64)
    marker[:] = -1
    for i in range(n_rows):
        ntouch = 0
        for pa in range(a_indptr[i], a_indptr[i + 1]):
            k = a_indices[pa]
            va = a_data[pa]
            for pb in range(b_indptr[k], b_indptr[k + 1]):
                j = b_indices[pb]
                if marker[j] != i:
                    marker[j] = i
                    acc[j] = 0.0
                    touched[ntouch] = j
                    ntouch += 1
                acc[j] += va * b_data[pb]
        cols = np.sort(touched[:ntouch])
        base = indptr[i]
        for q in range(ntouch):
            j = cols[q]
            out_indices[base + q] = j
            out_data[base + q] = acc[j]
    return indptr, out_indices, out_data


@njit(cache=True, nogil=True)
def transpose(indptr, indices, data, n_rows, n_cols):
    nnz = indices.shape[0]
    t_indptr = np.zeros(n_cols + 1, np.int64)
    for p in range(nnz):
        t_indptr[indices[p] + 1] += 1
    for j in range(n_cols):
        t_indptr[j + 1] += t_indptr[j]
    t_indices = np.empty(nnz, np.int64)
    t_data = np.empty(nnz, np.float64)
    nextpos = t_indptr[:-1].copy()
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            q = nextpos[j]
            t_indices[q] = i
            t_data[q] = data[p]
            nextpos[j] = q + 1
    return t_indptr, t_indices, t_data


@njit(cache=True, nogil=True)
def add(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_rows):
    cap = a_indices.shape[0] + b_indices.shape[0]
    out_indptr = np.zeros(n_rows + 1, np.int64)
    out_indices = np.empty(cap, np.int64)
    out_data = np.empty(cap, np.float64)
    pos = 0
    for i in range(n_rows):
        pa, ea = a_indptr[i], a_indptr[i + 1]
        pb, eb = b_indptr[i], b_indptr[i + 1]
        while pa < ea or pb < eb:
            if pb >= eb or (pa < ea and a_indices[pa] < b_indices[pb]):
                out_indices[pos] = a_indices[pa]
                out_data[pos] = a_data[pa]
                pa += 1
            elif pa >= ea or b_indices[pb] < a_indices[pa]:
                out_indices[pos] = b_indices[pb]
                out_data[pos] = b_data[pb]
                pb += 1
            else:
                out_indices[pos] = a_indices[pa]
                out_data[pos] = a_data[pa] + b_data[pb]
                pa += 1
                pb += 1
            pos += 1
        out_indptr[i + 1] = pos
    return out_indptr, out_indices[:pos].copy(), out_data[:pos].copy()
