"""Pure-Python cyclic coordinate descent for a box-constrained quadratic."""

import numpy as np


def box_qp_cd(Q, x, lo, hi, tol, max_cycles):
    """Minimise ``x^T Q x`` subject to ``lo <= x <= hi`` by coordinate descent.

    ``Q`` must be symmetric positive definite.  ``x`` is the start point and
    is clipped into the box first.  Each coordinate is minimised in closed
    form and clipped.  Stops when a full cycle moves no coordinate by more
    than ``tol``.

    Returns ``(x, cycles, last_change)``; ``cycles > max_cycles`` is never
    returned, the caller compares ``last_change`` with ``tol``.
    """
    Q = np.ascontiguousarray(Q, dtype=float)
    lo = np.ascontiguousarray(lo, dtype=float)
    hi = np.ascontiguousarray(hi, dtype=float)
    x = np.clip(np.array(x, dtype=float), lo, hi)
    n = x.size
    g = Q @ x
    diag = np.diag(Q).copy()
    change = np.inf
    cycles = 0
    while cycles < max_cycles:
        cycles += 1
        change = 0.0
        for k in range(n):
            qkk = diag[k]
            xk = x[k]
            z = xk - g[k] / qkk
            if z < lo[k]:
                z = lo[k]
            elif z > hi[k]:
                z = hi[k]
            d = z - xk
            if d != 0.0:
                x[k] = z
                g += d * Q[:, k]
                if abs(d) > change:
                    change = abs(d)
        if change <= tol:
            break
    return x, cycles, change
