# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise kernel sums: the O(M^2) hot loops of nonlocal assembly.

All routines evaluate the radial interaction scale * |p - q|**(-power) over
node pairs; coincident pairs contribute zero (the principal-value self-cell
drop).  Row reduction order is a fixed left-to-right sweep so results are
bit-identical across runs.
"""

import numpy as np

cimport cython
from libc.math cimport pow as cpow


def radial_offdiag(const double[:, ::1] pts, double power, double scale):
    """Dense symmetric matrix of pair interactions with a zero diagonal."""
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t dim = pts.shape[1]
    out_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double d2, diff, val
    for i in range(m):
        for j in range(i + 1, m):
            d2 = 0.0
            for d in range(dim):
                diff = pts[i, d] - pts[j, d]
                d2 += diff * diff
            val = scale * cpow(d2, -0.5 * power)
            out[i, j] = val
            out[j, i] = val
    return out_arr


def radial_rowsums(const double[:, ::1] pa, const double[:, ::1] pb, double power, double scale):
    """For each point of ``pa``: sum of interactions with every ``pb`` point.

    Coincident points (squared distance below 1e-30) are skipped, which
    drops the self-pair when ``pa`` is a subset of ``pb``.
    """
    cdef Py_ssize_t ma = pa.shape[0]
    cdef Py_ssize_t mb = pb.shape[0]
    cdef Py_ssize_t dim = pa.shape[1]
    out_arr = np.zeros(ma, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double d2, diff, acc
    for i in range(ma):
        acc = 0.0
        for j in range(mb):
            d2 = 0.0
            for d in range(dim):
                diff = pa[i, d] - pb[j, d]
                d2 += diff * diff
            if d2 > 1e-30:
                acc += scale * cpow(d2, -0.5 * power)
        out[i] = acc
    return out_arr


def radial_apply(const double[:, ::1] pts, double power, double scale, const double[::1] u):
    """Off-diagonal action: out_i = sum_{j != i} k(|p_i - p_j|) u_j."""
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t dim = pts.shape[1]
    out_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double d2, diff, val
    for i in range(m):
        for j in range(i + 1, m):
            d2 = 0.0
            for d in range(dim):
                diff = pts[i, d] - pts[j, d]
                d2 += diff * diff
            val = scale * cpow(d2, -0.5 * power)
            out[i] += val * u[j]
            out[j] += val * u[i]
    return out_arr
