# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Must stay operation-for-operation in step with _pykernels.py."""

import numpy as np

from libc.math cimport sqrt, isfinite

from .errors import NumericalDivergence

NAME = "native"


cdef inline double _scale(const double* y, Py_ssize_t p, double radius) noexcept nogil:
    cdef double sq = y[0] * y[0]
    cdef Py_ssize_t c
    for c in range(1, p):
        sq = sq + y[c] * y[c]
    cdef double nrm = sqrt(sq)
    if nrm > radius:
        return radius / nrm
    return 1.0


cdef void _gradient(const double[:, ::1] w,
                    const Py_ssize_t[::1] edge_i, const Py_ssize_t[::1] edge_j,
                    const double[::1] d,
                    const Py_ssize_t[::1] pair_node, const double[:, ::1] pair_pos,
                    const double[::1] r,
                    double twolam, const double[:, ::1] xt,
                    double[:, ::1] acc_e, double[:, ::1] acc_a,
                    double[:, ::1] g) noexcept nogil:
    cdef Py_ssize_t n = w.shape[0], p = w.shape[1]
    cdef Py_ssize_t E = edge_i.shape[0], V = pair_node.shape[0]
    cdef Py_ssize_t e, v, i, j, c
    cdef double y[3]
    cdef double s, res
    for i in range(n):
        for c in range(p):
            acc_e[i, c] = 0.0
            acc_a[i, c] = 0.0
    for e in range(E):
        i = edge_i[e]
        j = edge_j[e]
        for c in range(p):
            y[c] = w[i, c] - w[j, c]
        s = _scale(y, p, d[e])
        for c in range(p):
            res = y[c] - y[c] * s
            acc_e[i, c] = acc_e[i, c] + res
            acc_e[j, c] = acc_e[j, c] - res
    for v in range(V):
        i = pair_node[v]
        for c in range(p):
            y[c] = w[i, c] - pair_pos[v, c]
        s = _scale(y, p, r[v])
        for c in range(p):
            acc_a[i, c] = acc_a[i, c] + (y[c] - y[c] * s)
    for i in range(n):
        for c in range(p):
            g[i, c] = acc_e[i, c] + acc_a[i, c] + twolam * (w[i, c] - xt[i, c])


def gradient(w, edge_i, edge_j, d, pair_node, pair_pos, r, double lam, xt):
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, p = w.shape
    g = np.empty((n, p))
    _gradient(w, edge_i, edge_j, d, pair_node, pair_pos, r, 2.0 * lam,
              np.ascontiguousarray(xt, dtype=np.float64),
              np.empty((n, p)), np.empty((n, p)), g)
    return g


def rms(g):
    cdef const double[::1] flat = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double s = 0.0
    cdef Py_ssize_t k
    for k in range(flat.shape[0]):
        s = s + flat[k] * flat[k]
    return sqrt(s / flat.shape[0])


def nesterov(x0, const Py_ssize_t[::1] edge_i, const Py_ssize_t[::1] edge_j, const double[::1] d,
             const Py_ssize_t[::1] pair_node, const double[:, ::1] pair_pos, const double[::1] r,
             double lam, xt_in, double step, double beta, bint fista, int max_iters, double tol,
             record=None):
    cdef double[:, ::1] x = np.array(x0, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1]
    cdef double[:, ::1] x_prev = np.array(x, copy=True)
    cdef double[:, ::1] w = np.empty((n, p))
    cdef double[:, ::1] g = np.empty((n, p))
    cdef double[:, ::1] acc_e = np.empty((n, p))
    cdef double[:, ::1] acc_a = np.empty((n, p))
    cdef const double[:, ::1] xt = np.ascontiguousarray(xt_in, dtype=np.float64)
    cdef double[:, :, ::1] rec
    cdef bint recording = record is not None
    cdef double twolam = 2.0 * lam
    cdef double b, s, gn = float("nan"), xk
    cdef int kappa = 0
    cdef Py_ssize_t i, c, size = n * p
    if recording:
        rec = record
        rec[0, :, :] = x
    with nogil:
        for kappa in range(1, max_iters + 1):
            if fista:
                b = (kappa - 1.0) / (kappa + 2.0)
            else:
                b = beta
            for i in range(n):
                for c in range(p):
                    w[i, c] = x[i, c] + b * (x[i, c] - x_prev[i, c])
            _gradient(w, edge_i, edge_j, d, pair_node, pair_pos, r, twolam, xt, acc_e, acc_a, g)
            s = 0.0
            for i in range(n):
                for c in range(p):
                    s = s + g[i, c] * g[i, c]
                    xk = x[i, c]
                    x[i, c] = w[i, c] - step * g[i, c]
                    x_prev[i, c] = xk
            gn = sqrt(s / size)
            if not isfinite(gn):
                break
            if recording:
                for i in range(n):
                    for c in range(p):
                        rec[kappa, i, c] = x[i, c]
            if gn <= tol:
                break
    if not isfinite(gn) and max_iters > 0:
        raise NumericalDivergence(f"non-finite gradient at iteration {kappa}")
    return np.asarray(x), kappa, gn
