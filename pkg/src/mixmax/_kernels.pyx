# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-cube kernels: Luxemburg bisection, compensated sums, minima."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, log, sqrt, fabs, INFINITY

cnp.import_array()

cdef enum:
    POWER = 0
    LLOGL = 1
    SPLICED = 2
    POWERED = 3


cdef inline double fpow(double x, double p) noexcept nogil:
    if p == 1.0:
        return x
    if p == 2.0:
        return x * x
    return pow(x, p)


cdef double phi_eval(int node, double t, const int* kinds, const double* par,
                     const int* left, const int* right) noexcept nogil:
    cdef int kind = kinds[node]
    cdef double lg, base
    if t == 0.0:
        return 0.0
    if kind == POWER:
        return fpow(t, par[3 * node])
    if kind == LLOGL:
        if par[3 * node + 1] == 0.0:
            return fpow(t, par[3 * node])
        lg = par[3 * node + 2] * log(t)
        if lg < 0.0:
            lg = 0.0
        return fpow(t, par[3 * node]) * fpow(1.0 + lg, par[3 * node + 1])
    if kind == SPLICED:
        if t <= par[3 * node]:
            return phi_eval(left[node], t, kinds, par, left, right)
        return phi_eval(right[node], t, kinds, par, left, right)
    base = phi_eval(left[node], t, kinds, par, left, right)
    return fpow(base, par[3 * node])


cdef double neumaier(const double* vals, const long* cells, const double* ew,
                     long a, long b) noexcept nogil:
    cdef double s = 0.0, c = 0.0, x, t
    cdef long j
    for j in range(a, b):
        x = vals[cells[j]] * ew[j]
        t = s + x
        if fabs(s) >= fabs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


cdef double g_avg(double lam, const double* vals, const long* cells, const double* ew,
                  long a, long b, double den, const int* kinds, const double* par,
                  const int* left, const int* right) noexcept nogil:
    cdef double s = 0.0, c = 0.0, x, t
    cdef long j
    for j in range(a, b):
        x = phi_eval(0, vals[cells[j]] / lam, kinds, par, left, right) * ew[j]
        t = s + x
        if fabs(s) >= fabs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return (s + c) / den


def lux_norms(const double[::1] vals, const long[::1] cells, const double[::1] ew,
              const long[::1] indptr, const double[::1] den,
              const int[::1] kinds, const double[::1] par,
              const int[::1] left, const int[::1] right,
              double s1, double tol, bint identity, long q0, long q1,
              double[::1] norms, long[::1] iters, double[::1] resid):
    """Fill ``norms[q]`` for cubes ``q0 <= q < q1``; releases the GIL."""
    cdef long q, a, b, j, it
    cdef double mx, mean, lo, hi, mid, glo, ghi, gm
    with nogil:
        for q in range(q0, q1):
            a = indptr[q]
            b = indptr[q + 1]
            mean = neumaier(&vals[0], &cells[0], &ew[0], a, b) / den[q]
            if mean <= 0.0 or b == a:
                norms[q] = 0.0
                iters[q] = 0
                resid[q] = 0.0
                continue
            if identity:
                norms[q] = mean
                iters[q] = 0
                resid[q] = 1.0
                continue
            mx = 0.0
            for j in range(a, b):
                if vals[cells[j]] > mx and ew[j] > 0.0:
                    mx = vals[cells[j]]
            hi = mx / s1
            lo = mean / s1 * (1.0 - 1e-9)
            it = 0
            ghi = g_avg(hi, &vals[0], &cells[0], &ew[0], a, b, den[q],
                        &kinds[0], &par[0], &left[0], &right[0])
            while ghi > 1.0:
                lo = hi
                hi *= 2.0
                it += 1
                ghi = g_avg(hi, &vals[0], &cells[0], &ew[0], a, b, den[q],
                            &kinds[0], &par[0], &left[0], &right[0])
            if lo > hi:
                lo = hi * 0.5
            glo = g_avg(lo, &vals[0], &cells[0], &ew[0], a, b, den[q],
                        &kinds[0], &par[0], &left[0], &right[0])
            while glo <= 1.0 and lo > 0.0:
                hi = lo
                ghi = glo
                lo *= 0.5
                it += 1
                glo = g_avg(lo, &vals[0], &cells[0], &ew[0], a, b, den[q],
                            &kinds[0], &par[0], &left[0], &right[0])
            while hi - lo > tol * hi:
                mid = sqrt(lo * hi)
                if not (mid > lo and mid < hi):
                    mid = 0.5 * (lo + hi)
                    if not (mid > lo and mid < hi):
                        break
                gm = g_avg(mid, &vals[0], &cells[0], &ew[0], a, b, den[q],
                           &kinds[0], &par[0], &left[0], &right[0])
                it += 1
                if gm <= 1.0:
                    hi = mid
                    ghi = gm
                else:
                    lo = mid
            norms[q] = hi
            iters[q] = it
            resid[q] = ghi


def cube_sums(const double[::1] vals, const long[::1] cells, const double[::1] ew,
              const long[::1] indptr):
    cdef long nq = indptr.shape[0] - 1, q
    out = np.empty(nq)
    cdef double[::1] o = out
    with nogil:
        for q in range(nq):
            o[q] = neumaier(&vals[0], &cells[0], &ew[0], indptr[q], indptr[q + 1])
    return out


def cube_mins(const double[::1] vals, const long[::1] cells, const long[::1] indptr):
    cdef long nq = indptr.shape[0] - 1, q, j
    cdef double m
    out = np.empty(nq)
    cdef double[::1] o = out
    with nogil:
        for q in range(nq):
            m = INFINITY
            for j in range(indptr[q], indptr[q + 1]):
                if vals[cells[j]] < m:
                    m = vals[cells[j]]
            o[q] = m
    return out


def scatter_max(long n_out, const long[::1] centers, const long[::1] c_indptr,
                const double[::1] cube_vals):
    cdef long nq = c_indptr.shape[0] - 1, q, j
    cdef double v
    out = np.zeros(n_out)
    cdef double[::1] o = out
    with nogil:
        for q in range(nq):
            v = cube_vals[q]
            for j in range(c_indptr[q], c_indptr[q + 1]):
                if v > o[centers[j]]:
                    o[centers[j]] = v
    return out
