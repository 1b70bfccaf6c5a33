# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel primitives; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def spmm(const i64[::1] indptr, const i64[::1] indices, const double[::1] data, const double[:, ::1] xt):
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t B = xt.shape[1]
    out_np = np.zeros((nrows, B), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t r, e, b, col
    cdef double w
    with nogil:
        for r in range(nrows):
            for e in range(indptr[r], indptr[r + 1]):
                col = indices[e]
                w = data[e]
                for b in range(B):
                    out[r, b] += w * xt[col, b]
    return out_np


def scatter_rows(double[:, ::1] out, const i64[::1] rows, const i64[::1] gidx, const double[:, ::1] G, double coef):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t B = out.shape[1]
    cdef Py_ssize_t i, b, r, g
    with nogil:
        for i in range(m):
            r = rows[i]
            g = gidx[i]
            for b in range(B):
                out[r, b] += coef * G[g, b]
