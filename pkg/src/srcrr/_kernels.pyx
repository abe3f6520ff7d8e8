# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch evaluators for single-auxiliary candidates.

Each candidate is a channel q[s, a] from the source to the auxiliary. Both
evaluators return I(S;A|U), I(S;A|V) and the expected distortion, using
the Markov chain A - S - (U,V): I(S;A|U) = H(A,U) - H(U) - H(A|S).
"""

import numpy as np
from libc.math cimport log2

cdef double POSITIVE = 1e-15


cdef inline double plogp(double x) nogil:
    if x > 0.0:
        return -x * log2(x)
    return 0.0


cdef void _rates(const double[:, :, ::1] Q, Py_ssize_t n,
                 const double[::1] pS, const double[:, ::1] pSU,
                 const double[:, ::1] pSV, double hU, double hV,
                 double* ra, double* rb) nogil:
    cdef Py_ssize_t S = Q.shape[1], K = Q.shape[2]
    cdef Py_ssize_t nu = pSU.shape[1], nv = pSV.shape[1]
    cdef Py_ssize_t s, a, u
    cdef double h_a_s = 0.0, h_au = 0.0, h_av = 0.0, acc
    for s in range(S):
        for a in range(K):
            h_a_s += pS[s] * plogp(Q[n, s, a])
    for a in range(K):
        for u in range(nu):
            acc = 0.0
            for s in range(S):
                acc += Q[n, s, a] * pSU[s, u]
            h_au += plogp(acc)
        for u in range(nv):
            acc = 0.0
            for s in range(S):
                acc += Q[n, s, a] * pSV[s, u]
            h_av += plogp(acc)
    ra[0] = h_au - hU - h_a_s
    rb[0] = h_av - hV - h_a_s
    if ra[0] < 0.0:
        ra[0] = 0.0
    if rb[0] < 0.0:
        rb[0] = 0.0


def star_batch(const double[:, :, ::1] Q, const double[::1] pS,
               const double[:, ::1] pSU, const double[:, ::1] pSV,
               double hU, double hV, const double[:, ::1] dmat,
               const double[:, :, ::1] W, const long[::1] ncomp):
    """Rates and GK-Bayes distortion for a batch of auxiliary channels."""
    cdef Py_ssize_t N = Q.shape[0], S = Q.shape[1], K = Q.shape[2]
    cdef Py_ssize_t H = dmat.shape[1]
    out_a = np.empty(N)
    out_b = np.empty(N)
    out_d = np.empty(N)
    cdef double[::1] oa = out_a, ob = out_b, od = out_d
    cdef Py_ssize_t n, s, a, c, h
    cdef long mask
    cdef double dist, best, cost, w
    with nogil:
        for n in range(N):
            _rates(Q, n, pS, pSU, pSV, hU, hV, &oa[n], &ob[n])
            dist = 0.0
            for a in range(K):
                mask = 0
                for s in range(S):
                    if Q[n, s, a] > POSITIVE and pS[s] > POSITIVE:
                        mask |= (<long>1) << s
                if mask == 0:
                    continue
                for c in range(ncomp[mask]):
                    best = 1e300
                    for h in range(H):
                        cost = 0.0
                        for s in range(S):
                            w = Q[n, s, a] * W[mask, s, c]
                            if w != 0.0:
                                cost += w * dmat[s, h]
                        if cost < best:
                            best = cost
                    dist += best
            od[n] = dist
    return out_a, out_b, out_d


def qb_batch(const double[:, :, ::1] Q, const double[::1] pS,
             const double[:, ::1] pSU, const double[:, ::1] pSV,
             double hU, double hV, const double[:, ::1] dmat):
    """Rates and direct distortion when the auxiliary is the reconstruction."""
    cdef Py_ssize_t N = Q.shape[0], S = Q.shape[1], K = Q.shape[2]
    out_a = np.empty(N)
    out_b = np.empty(N)
    out_d = np.empty(N)
    cdef double[::1] oa = out_a, ob = out_b, od = out_d
    cdef Py_ssize_t n, s, a
    cdef double dist
    with nogil:
        for n in range(N):
            _rates(Q, n, pS, pSU, pSV, hU, hV, &oa[n], &ob[n])
            dist = 0.0
            for s in range(S):
                for a in range(K):
                    dist += pS[s] * Q[n, s, a] * dmat[s, a]
            od[n] = dist
    return out_a, out_b, out_d
