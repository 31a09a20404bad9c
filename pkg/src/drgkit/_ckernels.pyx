# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
from libc.stdlib cimport malloc, free


def levenshtein(str a, str b):
    cdef Py_ssize_t n, m, i, j
    cdef Py_UCS4 ca
    cdef Py_ssize_t *row
    cdef Py_ssize_t prev_diag, tmp, best
    if len(a) < len(b):
        a, b = b, a
    n = len(a)
    m = len(b)
    if m == 0:
        return n
    row = <Py_ssize_t *> malloc((m + 1) * sizeof(Py_ssize_t))
    if row == NULL:
        raise MemoryError()
    try:
        for j in range(m + 1):
            row[j] = j
        for i in range(1, n + 1):
            ca = a[i - 1]
            prev_diag = row[0]
            row[0] = i
            for j in range(1, m + 1):
                tmp = row[j]
                best = prev_diag + (0 if ca == b[j - 1] else 1)
                if row[j] + 1 < best:
                    best = row[j] + 1
                if row[j - 1] + 1 < best:
                    best = row[j - 1] + 1
                row[j] = best
                prev_diag = tmp
        return row[m]
    finally:
        free(row)


def sparse_matmul(const long long[::1] indptr, const int[::1] indices,
                  const double[::1] data, const double[:, ::1] weight):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t c_dim = weight.shape[0]
    cdef Py_ssize_t i, c, k
    cdef double acc
    out = np.zeros((n, c_dim), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for c in range(c_dim):
                acc = 0.0
                for k in range(indptr[i], indptr[i + 1]):
                    acc = acc + weight[c, indices[k]] * data[k]
                o[i, c] = acc
    return out


def sparse_grad_accumulate(const long long[::1] indptr, const int[::1] indices,
                           const double[::1] data, const double[:, ::1] grad_out,
                           double[:, ::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t c_dim = out.shape[0]
    cdef Py_ssize_t i, c, k, col
    cdef double v
    with nogil:
        for i in range(n):
            for k in range(indptr[i], indptr[i + 1]):
                col = indices[k]
                v = data[k]
                for c in range(c_dim):
                    out[c, col] += grad_out[i, c] * v
