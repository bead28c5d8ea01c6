# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels.

Same contracts as randpursuit._kernels._fallback; see that module for the
full docstrings.  All loops run without the GIL-level numpy dispatch that
dominates the fallback's cost on small dimensions.
"""

import numpy as np

from libc.math cimport sqrt


cdef int _chol_lower(double[:, ::1] b, double[:, ::1] low) noexcept nogil:
    """Lower Cholesky factor of b into low; returns -1 on a non-PD pivot."""
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    for k in range(n):
        s = b[k, k]
        for j in range(k):
            s -= low[k, j] * low[k, j]
        if s <= 0.0:
            return -1
        low[k, k] = sqrt(s)
        for i in range(k + 1, n):
            s = b[i, k]
            for j in range(k):
                s -= low[i, j] * low[k, j]
            low[i, k] = s / low[k, k]
    return 0


cdef int _refactor_inverse(double[:, ::1] b, double[:, ::1] b_inv,
                           double[:, ::1] low, double[::1] col) noexcept nogil:
    """Recompute b_inv = b^-1 from scratch; low and col are scratch buffers."""
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    if _chol_lower(b, low) != 0:
        return -1
    for j in range(n):
        # forward solve L y = e_j
        for i in range(n):
            s = 1.0 if i == j else 0.0
            for k in range(i):
                s -= low[i, k] * col[k]
            col[i] = s / low[i, i]
        # back solve L^T x = y
        for i in range(n - 1, -1, -1):
            s = col[i]
            for k in range(i + 1, n):
                s -= low[k, i] * col[k]
            col[i] = s / low[i, i]
        for i in range(n):
            b_inv[i, j] = col[i]
    # enforce exact symmetry against round-off
    for i in range(n):
        for j in range(i):
            s = 0.5 * (b_inv[i, j] + b_inv[j, i])
            b_inv[i, j] = s
            b_inv[j, i] = s
    return 0


def rhe_ensemble_steps(double[:, :, ::1] x, double[:, :, ::1] z,
                       double[:, ::1] frob_out, double[:, ::1] trace_out):
    cdef Py_ssize_t runs = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t steps = z.shape[1]
    cdef Py_ssize_t r, t, i, j
    cdef double nz, c, s, fr, tr
    u_arr = np.empty(n)
    cdef double[::1] u = u_arr
    with nogil:
        for r in range(runs):
            for t in range(steps):
                nz = 0.0
                for i in range(n):
                    nz += z[r, t, i] * z[r, t, i]
                nz = sqrt(nz)
                if nz == 0.0:
                    continue
                for i in range(n):
                    u[i] = z[r, t, i] / nz
                c = 0.0
                for i in range(n):
                    s = 0.0
                    for j in range(n):
                        s += x[r, i, j] * u[j]
                    c += u[i] * s
                fr = 0.0
                tr = 0.0
                for i in range(n):
                    for j in range(n):
                        x[r, i, j] -= c * u[i] * u[j]
                        fr += x[r, i, j] * x[r, i, j]
                    tr += x[r, i, i]
                frob_out[r, t] = fr
                trace_out[r, t] = tr


def reuse_sweep(double[:, ::1] b, double[:, ::1] b_inv,
                double[:, ::1] dirs, double[::1] curvs, long[::1] order,
                double margin, long since_refactor, long refactor_every):
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t p, i, j, idx
    cdef long applied = 0
    cdef long since = since_refactor
    cdef double t, denom, sw, q
    cdef int status = 0
    w_arr = np.empty(n)
    low_arr = np.empty((n, n))
    col_arr = np.empty(n)
    cdef double[::1] w = w_arr
    cdef double[:, ::1] low = low_arr
    cdef double[::1] col = col_arr
    with nogil:
        for p in range(m):
            idx = order[p]
            # t = q - s^T B s and w = B^-1 s, sw = s^T w in one pass
            t = curvs[idx]
            sw = 0.0
            for i in range(n):
                q = 0.0
                denom = 0.0
                for j in range(n):
                    q += b[i, j] * dirs[idx, j]
                    denom += b_inv[i, j] * dirs[idx, j]
                t -= dirs[idx, i] * q
                w[i] = denom
                sw += dirs[idx, i] * denom
            denom = 1.0 + t * sw
            if denom > margin:
                for i in range(n):
                    for j in range(n):
                        b[i, j] += t * dirs[idx, i] * dirs[idx, j]
                        b_inv[i, j] -= (t / denom) * w[i] * w[j]
                applied += 1
                since += 1
                if since >= refactor_every:
                    status = _refactor_inverse(b, b_inv, low, col)
                    if status != 0:
                        break
                    since = 0
    if status != 0:
        raise np.linalg.LinAlgError("re-factorization failed: matrix lost positive definiteness")
    return int(applied), int(since)


def frp_quadratic(double[::1] d, double[::1] y0, g, double[:, ::1] z,
                  double target_gap, long max_iters):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double nz, a, bcoef, h, gap
    cdef bint has_g = g is not None
    cdef double[:, ::1] gm
    if has_g:
        gm = np.ascontiguousarray(g, dtype=np.float64)
    else:
        gm = np.empty((1, 1))
    y_arr = np.array(y0, dtype=np.float64)
    gaps_arr = np.empty(max_iters)
    w_arr = np.empty(n)
    cdef double[::1] y = y_arr
    cdef double[::1] gaps = gaps_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t iters = 0
    with nogil:
        for k in range(max_iters):
            nz = 0.0
            for i in range(n):
                nz += z[k, i] * z[k, i]
            nz = sqrt(nz)
            if nz == 0.0:
                for i in range(n):
                    w[i] = 0.0
            elif has_g:
                for i in range(n):
                    a = 0.0
                    for j in range(n):
                        a += gm[i, j] * z[k, j]
                    w[i] = a / nz
            else:
                for i in range(n):
                    w[i] = z[k, i] / nz
            a = 0.0
            bcoef = 0.0
            for i in range(n):
                a += d[i] * w[i] * w[i]
                bcoef += d[i] * y[i] * w[i]
            if a > 0.0:
                h = -bcoef / a
                for i in range(n):
                    y[i] += h * w[i]
            gap = 0.0
            for i in range(n):
                gap += d[i] * y[i] * y[i]
            gap *= 0.5
            gaps[k] = gap
            iters = k + 1
            if gap <= target_gap:
                break
    return gaps_arr[:iters], y_arr, int(iters)
