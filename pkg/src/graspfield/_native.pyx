# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot numerical kernels.

Mirrors ``graspfield._kernels_numpy`` function for function; the loops are
fused so no (M, N) temporaries are materialized.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND_NAME = "native"


cdef inline double _sqdist3(const double* a, const double* b) nogil:
    cdef double d0 = a[0] - b[0]
    cdef double d1 = a[1] - b[1]
    cdef double d2 = a[2] - b[2]
    return d0 * d0 + d1 * d1 + d2 * d2


def sqdist_matrix(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _sqdist3(&a[i, 0], &b[j, 0])
    return out_arr


def gaussian_kernel(const double[:, ::1] a, const double[:, ::1] b, double beta):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double inv = -1.0 / (2.0 * beta * beta)
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = exp(inv * _sqdist3(&a[i, 0], &b[j, 0]))
    return out_arr


def cpd_estep(const double[:, ::1] t, const double[:, ::1] x,
              double sigma2, double uniform_c):
    cdef Py_ssize_t m = t.shape[0], n = x.shape[0], i, j
    cdef double inv = -1.0 / (2.0 * sigma2)
    cdef double den, ksum, w
    p1_arr = np.zeros(m, dtype=np.float64)
    pt1_arr = np.empty(n, dtype=np.float64)
    px_arr = np.zeros((m, 3), dtype=np.float64)
    kcol_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] p1 = p1_arr
    cdef double[::1] pt1 = pt1_arr
    cdef double[:, ::1] px = px_arr
    cdef double[::1] kcol = kcol_arr
    with nogil:
        for j in range(n):
            ksum = 0.0
            for i in range(m):
                kcol[i] = exp(inv * _sqdist3(&t[i, 0], &x[j, 0]))
                ksum += kcol[i]
            den = ksum + uniform_c
            if den <= 0.0:
                pt1[j] = 0.0
                continue
            pt1[j] = ksum / den
            for i in range(m):
                w = kcol[i] / den
                p1[i] += w
                px[i, 0] += w * x[j, 0]
                px[i, 1] += w * x[j, 1]
                px[i, 2] += w * x[j, 2]
    return p1_arr, pt1_arr, px_arr


cdef double _softmin(const double[:, ::1] tc, const double[:, ::1] obs,
                     double sigma, double[:, ::1] grad, bint want_grad) nogil:
    cdef Py_ssize_t m = tc.shape[0], n = obs.shape[0], i, j
    cdef double inv = -1.0 / (2.0 * sigma * sigma)
    cdef double inv_s2 = 1.0 / (sigma * sigma)
    cdef double energy = 0.0
    cdef double amax, a, s, w, wx, wy, wz
    for i in range(m):
        amax = inv * _sqdist3(&tc[i, 0], &obs[0, 0])
        for j in range(1, n):
            a = inv * _sqdist3(&tc[i, 0], &obs[j, 0])
            if a > amax:
                amax = a
        s = 0.0
        wx = 0.0
        wy = 0.0
        wz = 0.0
        for j in range(n):
            w = exp(inv * _sqdist3(&tc[i, 0], &obs[j, 0]) - amax)
            s += w
            if want_grad:
                wx += w * obs[j, 0]
                wy += w * obs[j, 1]
                wz += w * obs[j, 2]
        energy -= amax + log(s)
        if want_grad:
            grad[i, 0] = (tc[i, 0] - wx / s) * inv_s2
            grad[i, 1] = (tc[i, 1] - wy / s) * inv_s2
            grad[i, 2] = (tc[i, 2] - wz / s) * inv_s2
    return energy


def softmin_energy(const double[:, ::1] tc, const double[:, ::1] obs, double sigma):
    cdef double[:, ::1] dummy = np.empty((1, 3), dtype=np.float64)
    cdef double e
    with nogil:
        e = _softmin(tc, obs, sigma, dummy, 0)
    return e


def softmin_energy_grad(const double[:, ::1] tc, const double[:, ::1] obs, double sigma):
    grad_arr = np.empty((tc.shape[0], 3), dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    cdef double e
    with nogil:
        e = _softmin(tc, obs, sigma, grad, 1)
    return e, grad_arr


def chamfer(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double acc_ab = 0.0, acc_ba = 0.0
    cdef double best, d
    min_b_arr = np.full(m, np.inf)
    cdef double[::1] min_b = min_b_arr
    with nogil:
        for i in range(n):
            best = _sqdist3(&a[i, 0], &b[0, 0])
            if best < min_b[0]:
                min_b[0] = best
            for j in range(1, m):
                d = _sqdist3(&a[i, 0], &b[j, 0])
                if d < best:
                    best = d
                if d < min_b[j]:
                    min_b[j] = d
            acc_ab += sqrt(best)
        for j in range(m):
            acc_ba += sqrt(min_b[j])
    return 0.5 * (acc_ab / n + acc_ba / m)


def fps_indices(const double[:, ::1] points, Py_ssize_t k, Py_ssize_t start):
    cdef Py_ssize_t n = points.shape[0], i, j, nxt
    cdef double d, best
    chosen_arr = np.empty(k, dtype=np.int64)
    d2_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] chosen = chosen_arr
    cdef double[::1] d2 = d2_arr
    chosen[0] = start
    with nogil:
        for j in range(n):
            d2[j] = _sqdist3(&points[j, 0], &points[start, 0])
        for i in range(1, k):
            nxt = 0
            best = d2[0]
            for j in range(1, n):
                if d2[j] > best:
                    best = d2[j]
                    nxt = j
            chosen[i] = nxt
            for j in range(n):
                d = _sqdist3(&points[j, 0], &points[nxt, 0])
                if d < d2[j]:
                    d2[j] = d
    return chosen_arr
