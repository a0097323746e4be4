"""Compiled grouped-reduction kernels.

Same contract as ``doobkit._kernels._py``; per-block accumulation runs in
atom order so both backends produce bit-identical sums.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def group_sum(values, const cnp.int64_t[::1] block_of, Py_ssize_t block_count):
    if values.ndim == 1:
        return _group_sum_1d(values, block_of, block_count)
    return _group_sum_2d(values, block_of, block_count)


def _group_sum_1d(const double[::1] values, const cnp.int64_t[::1] block_of, Py_ssize_t block_count):
    out_arr = np.zeros(block_count, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, n = values.shape[0]
    for i in range(n):
        out[block_of[i]] += values[i]
    return out_arr


def _group_sum_2d(const double[:, ::1] values, const cnp.int64_t[::1] block_of, Py_ssize_t block_count):
    out_arr = np.zeros((block_count, values.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, b, n = values.shape[0], m = values.shape[1]
    for i in range(n):
        b = block_of[i]
        for j in range(m):
            out[b, j] += values[i, j]
    return out_arr


def group_mean_expand(values, weights, const cnp.int64_t[::1] block_of, Py_ssize_t block_count):
    if values.ndim == 1:
        return _group_mean_expand_1d(values, weights, block_of, block_count)
    return _group_mean_expand_2d(values, weights, block_of, block_count)


def _group_mean_expand_1d(
    const double[::1] values,
    const double[::1] weights,
    const cnp.int64_t[::1] block_of,
    Py_ssize_t block_count,
):
    cdef cnp.ndarray wsum_arr = np.zeros(block_count, dtype=np.float64)
    cdef cnp.ndarray wval_arr = np.zeros(block_count, dtype=np.float64)
    cdef double[::1] wsum = wsum_arr
    cdef double[::1] wval = wval_arr
    cdef Py_ssize_t i, b, n = values.shape[0]
    for i in range(n):
        b = block_of[i]
        wsum[b] += weights[i]
        wval[b] += weights[i] * values[i]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = wval[block_of[i]] / wsum[block_of[i]]
    return out_arr


def _group_mean_expand_2d(
    const double[:, ::1] values,
    const double[::1] weights,
    const cnp.int64_t[::1] block_of,
    Py_ssize_t block_count,
):
    cdef Py_ssize_t i, j, b, n = values.shape[0], m = values.shape[1]
    cdef cnp.ndarray wsum_arr = np.zeros(block_count, dtype=np.float64)
    cdef cnp.ndarray wval_arr = np.zeros((block_count, m), dtype=np.float64)
    cdef double[::1] wsum = wsum_arr
    cdef double[:, ::1] wval = wval_arr
    for i in range(n):
        b = block_of[i]
        wsum[b] += weights[i]
        for j in range(m):
            wval[b, j] += weights[i] * values[i, j]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        b = block_of[i]
        for j in range(m):
            out[i, j] = wval[b, j] / wsum[b]
    return out_arr


def group_min_max(const double[::1] values, const cnp.int64_t[::1] block_of, Py_ssize_t block_count):
    lo_arr = np.full(block_count, np.inf, dtype=np.float64)
    hi_arr = np.full(block_count, -np.inf, dtype=np.float64)
    cdef double[::1] lo = lo_arr
    cdef double[::1] hi = hi_arr
    cdef Py_ssize_t i, b, n = values.shape[0]
    for i in range(n):
        b = block_of[i]
        if values[i] < lo[b]:
            lo[b] = values[i]
        if values[i] > hi[b]:
            hi[b] = values[i]
    return lo_arr, hi_arr


def crossing_indices(const double[:, ::1] matrix, double level):
    cdef Py_ssize_t t = matrix.shape[0], n = matrix.shape[1]
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t i, j
    for j in range(t):
        for i in range(n):
            if matrix[j, i] <= level:
                counts[i] += 1
    out = counts_arr - 1
    np.maximum(out, 0, out=out)
    return out
