# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for Gaussian primitive evaluation and farthest-point sampling.

Every routine here has a numpy twin in ``_pykernels`` with the same signature.
Per-query work is independent and summed in primitive order, so output does
not depend on ``num_threads``.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport exp, pow, sqrt


cdef inline double _mahalanobis2(const double* x, const double* mu,
                                 const double* prec, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    cdef double vi, row
    for i in range(d):
        vi = x[i] - mu[i]
        row = 0.0
        for j in range(d):
            row = row + prec[i * d + j] * (x[j] - mu[j])
        acc = acc + vi * row
    return acc


cdef inline double _dist2(const double* x, const double* y, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    cdef double t
    for i in range(d):
        t = x[i] - y[i]
        acc = acc + t * t
    return acc


def basis_matrix(const double[:, ::1] x, const double[:, ::1] mu,
                 const double[:, :, ::1] prec, int num_threads=1):
    cdef Py_ssize_t Q = x.shape[0], K = mu.shape[0], d = x.shape[1]
    cdef Py_ssize_t q, k
    out = np.empty((Q, K), dtype=np.float64)
    cdef double[:, ::1] o = out
    for q in prange(Q, nogil=True, num_threads=num_threads, schedule="static"):
        for k in range(K):
            o[q, k] = exp(-0.5 * _mahalanobis2(&x[q, 0], &mu[k, 0], &prec[k, 0, 0], d))
    return out


def shepard_eval(const double[:, ::1] x, const double[:, ::1] mu,
                 const double[:, :, ::1] prec, const double[::1] w,
                 const double[:, ::1] amp, double floor, int num_threads=1):
    cdef Py_ssize_t Q = x.shape[0], K = mu.shape[0], d = x.shape[1], C = amp.shape[1]
    cdef Py_ssize_t q, k, c
    cdef double wphi, m, denom
    values = np.zeros((Q, C), dtype=np.float64)
    mass = np.empty(Q, dtype=np.float64)
    cdef double[:, ::1] v = values
    cdef double[::1] ms = mass
    for q in prange(Q, nogil=True, num_threads=num_threads, schedule="static"):
        m = 0.0
        for k in range(K):
            wphi = w[k] * exp(-0.5 * _mahalanobis2(&x[q, 0], &mu[k, 0], &prec[k, 0, 0], d))
            m = m + wphi
            for c in range(C):
                v[q, c] = v[q, c] + wphi * amp[k, c]
        ms[q] = m
        denom = m + floor
        for c in range(C):
            v[q, c] = v[q, c] / denom
    return values, mass


def shepard_weight_sums(const double[:, ::1] x, const double[:, ::1] mu,
                        const double[:, :, ::1] prec, const double[::1] w,
                        double floor, int num_threads=1):
    """Return (sum_k psi_k(x), mass) per query."""
    cdef Py_ssize_t Q = x.shape[0], K = mu.shape[0], d = x.shape[1]
    cdef Py_ssize_t q, k
    cdef double m, s, denom
    total = np.empty(Q, dtype=np.float64)
    mass = np.empty(Q, dtype=np.float64)
    cdef double[::1] t = total
    cdef double[::1] ms = mass
    for q in prange(Q, nogil=True, num_threads=num_threads, schedule="static"):
        m = 0.0
        for k in range(K):
            m = m + w[k] * exp(-0.5 * _mahalanobis2(&x[q, 0], &mu[k, 0], &prec[k, 0, 0], d))
        denom = m + floor
        s = 0.0
        for k in range(K):
            s = s + w[k] * exp(-0.5 * _mahalanobis2(&x[q, 0], &mu[k, 0], &prec[k, 0, 0], d)) / denom
        t[q] = s
        ms[q] = m
    return total, mass


def moment_sum(const double[:, ::1] x, const double[:, ::1] mu,
               const double[:, :, ::1] prec, const double[::1] w,
               double order, double floor, int num_threads=1):
    cdef Py_ssize_t Q = x.shape[0], K = mu.shape[0], d = x.shape[1]
    cdef Py_ssize_t q, k
    cdef double wphi, m, acc, r
    moments = np.empty(Q, dtype=np.float64)
    mass = np.empty(Q, dtype=np.float64)
    cdef double[::1] mo = moments
    cdef double[::1] ms = mass
    for q in prange(Q, nogil=True, num_threads=num_threads, schedule="static"):
        m = 0.0
        acc = 0.0
        for k in range(K):
            wphi = w[k] * exp(-0.5 * _mahalanobis2(&x[q, 0], &mu[k, 0], &prec[k, 0, 0], d))
            m = m + wphi
            r = sqrt(_dist2(&x[q, 0], &mu[k, 0], d))
            if order == 0.0:
                acc = acc + wphi
            else:
                acc = acc + wphi * pow(r, order)
        ms[q] = m
        mo[q] = acc / (m + floor)
    return moments, mass


def farthest_point_indices(const double[:, ::1] pts, Py_ssize_t K,
                           const double[::1] anchor):
    """Greedy max-min selection; the first pick is the point nearest ``anchor``.

    Ties resolve to the lowest index because comparisons are strict.
    """
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1]
    cdef Py_ssize_t i, j, best
    cdef double bestval, t
    idx = np.empty(K, dtype=np.intp)
    cdef Py_ssize_t[::1] out = idx
    mind = np.empty(n, dtype=np.float64)
    cdef double[::1] md = mind
    if K == 0:
        return idx
    best = 0
    bestval = _dist2(&pts[0, 0], &anchor[0], d)
    for i in range(1, n):
        t = _dist2(&pts[i, 0], &anchor[0], d)
        if t < bestval:
            bestval = t
            best = i
    out[0] = best
    with nogil:
        for i in range(n):
            md[i] = _dist2(&pts[i, 0], &pts[best, 0], d)
        for j in range(1, K):
            best = 0
            bestval = md[0]
            for i in range(1, n):
                if md[i] > bestval:
                    bestval = md[i]
                    best = i
            out[j] = best
            for i in range(n):
                t = _dist2(&pts[i, 0], &pts[best, 0], d)
                if t < md[i]:
                    md[i] = t
    return idx
