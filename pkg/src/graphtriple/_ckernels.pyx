# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; mirrors ``_pykernels`` function for function."""

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Largest magnitude we let an int64 walk count reach before bailing out.
cdef double _COUNT_LIMIT = 4.0e18


def resolvent_partial_sum(double[::1] head, double tail, double negative,
                          long long n_terms):
    cdef Py_ssize_t h = head.shape[0]
    cdef long long k
    cdef double total = 0.0
    cdef double w, t
    for k in range(n_terms + 1):
        w = 1.0 / sqrt(1.0 + <double>k * <double>k)
        if k < h:
            t = head[k]
        else:
            t = tail
        total += t * w
        if k > 0:
            total += negative * w
    return total


def walk_counts(cnp.int64_t[:, ::1] adj, int steps, bint incoming):
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t s, v, w
    cdef cnp.int64_t total, a
    cdef double estimate
    out_arr = np.zeros((steps + 1, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for v in range(n):
        out[0, v] = 1
    for s in range(1, steps + 1):
        for v in range(n):
            total = 0
            estimate = 0.0
            for w in range(n):
                if incoming:
                    a = adj[w, v]
                else:
                    a = adj[v, w]
                if a:
                    estimate += <double>a * <double>out[s - 1, w]
                    if estimate > _COUNT_LIMIT:
                        raise OverflowError("walk count exceeds int64 range")
                    total += a * out[s - 1, w]
            out[s, v] = total
    return out_arr
