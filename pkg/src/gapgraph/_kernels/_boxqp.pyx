# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic coordinate descent for a box-constrained quadratic.

Same contract as :func:`gapgraph._kernels._boxqp_py.box_qp_cd`.
"""

import numpy as np

from libc.math cimport fabs


def box_qp_cd(Q, x, lo, hi, double tol, int max_cycles):
    cdef double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[::1] l = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] h = np.ascontiguousarray(hi, dtype=np.float64)
    out = np.clip(np.array(x, dtype=np.float64), lo, hi)
    cdef double[::1] xv = out
    cdef Py_ssize_t n = xv.shape[0]
    g_arr = np.asarray(Q, dtype=np.float64) @ out
    cdef double[::1] g = g_arr
    cdef Py_ssize_t k, m
    cdef double z, d, xk, change = np.inf
    cdef int cycles = 0
    # q is symmetric, so row k stands in for column k
    with nogil:
        while cycles < max_cycles:
            cycles += 1
            change = 0.0
            for k in range(n):
                xk = xv[k]
                z = xk - g[k] / q[k, k]
                if z < l[k]:
                    z = l[k]
                elif z > h[k]:
                    z = h[k]
                d = z - xk
                if d != 0.0:
                    xv[k] = z
                    for m in range(n):
                        g[m] += d * q[k, m]
                    if fabs(d) > change:
                        change = fabs(d)
            if change <= tol:
                break
    return out, cycles, change
