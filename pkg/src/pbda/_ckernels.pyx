# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see _pykernels for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _matvec(const int[:, ::1] nb, const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k, n = x.shape[0]
    cdef double acc
    cdef int j
    for i in range(n):
        acc = 4.0 * x[i]
        for k in range(4):
            j = nb[i, k]
            if j >= 0:
                acc -= x[j]
        out[i] = acc


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def stencil_matvec(neighbors, x):
    cdef const int[:, ::1] nb = np.ascontiguousarray(neighbors, dtype=np.int32)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        _matvec(nb, xv, ov)
    return out


def cg_solve(neighbors, b, double tol, Py_ssize_t max_iter):
    cdef const int[:, ::1] nb = np.ascontiguousarray(neighbors, dtype=np.int32)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = bv.shape[0]
    x_arr = np.zeros(n, dtype=np.float64)
    r_arr = np.empty(n, dtype=np.float64)
    p_arr = np.empty(n, dtype=np.float64)
    ap_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] r = r_arr
    cdef double[::1] p = p_arr
    cdef double[::1] ap = ap_arr
    cdef Py_ssize_t i, it = 0
    cdef double bb, thresh, rr, rr_new, rr_true, pap, alpha, beta
    cdef bint done = False

    with nogil:
        bb = _dot(bv, bv)
        if bb == 0.0:
            done = True
        else:
            thresh = tol * tol * bb
            for i in range(n):
                r[i] = bv[i]
                p[i] = bv[i]
            rr = bb
            while True:
                if rr <= thresh:
                    _matvec(nb, x, ap)
                    rr_true = 0.0
                    for i in range(n):
                        ap[i] = bv[i] - ap[i]
                        rr_true += ap[i] * ap[i]
                    if rr_true <= thresh:
                        done = True
                        break
                    for i in range(n):
                        r[i] = ap[i]
                        p[i] = ap[i]
                    rr = rr_true
                if it >= max_iter:
                    break
                _matvec(nb, p, ap)
                pap = _dot(p, ap)
                if pap <= 0.0:
                    break
                alpha = rr / pap
                for i in range(n):
                    x[i] += alpha * p[i]
                    r[i] -= alpha * ap[i]
                rr_new = _dot(r, r)
                beta = rr_new / rr
                for i in range(n):
                    p[i] = r[i] + beta * p[i]
                rr = rr_new
                it += 1
    if bb == 0.0:
        return x_arr, 0, 0.0
    if done:
        return x_arr, it, sqrt(rr_true / bb)
    with nogil:
        _matvec(nb, x, ap)
        rr_true = 0.0
        for i in range(n):
            ap[i] = bv[i] - ap[i]
            rr_true += ap[i] * ap[i]
    return x_arr, it, sqrt(rr_true / bb)


def roi_scores(target, src_border, offsets, ys, xs):
    cdef const double[:, :, ::1] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef const double[:, ::1] sb = np.ascontiguousarray(src_border, dtype=np.float64)
    cdef const long[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const long[::1] yv = np.ascontiguousarray(ys, dtype=np.int64)
    cdef const long[::1] xv = np.ascontiguousarray(xs, dtype=np.int64)
    cdef Py_ssize_t ny = yv.shape[0], nx = xv.shape[0], m = sb.shape[0]
    out = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t a, c, j, py, px
    cdef double acc, d0, d1, d2
    with nogil:
        for a in range(ny):
            for c in range(nx):
                acc = 0.0
                for j in range(m):
                    py = yv[a] + off[j, 0]
                    px = xv[c] + off[j, 1]
                    d0 = t[py, px, 0] - sb[j, 0]
                    d1 = t[py, px, 1] - sb[j, 1]
                    d2 = t[py, px, 2] - sb[j, 2]
                    acc += sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                o[a, c] = acc / m
    return out
