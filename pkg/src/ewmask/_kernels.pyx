# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled filter and likelihood loops.

Every function here has a twin in ``_kernels_py`` with the same signature and
the same floating-point results up to summation order. ``ewmask.kernels``
picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs

cnp.import_array()

cdef double HALF_LOG_2PI = 0.91893853320467274178
cdef double LOG_G_FLOOR = -345.38776394910684  # log(1e-150)
cdef double G_FLOOR = 1e-150

PENALTY = -1e10


cdef inline double _shortfall(double v, double floor) nogil:
    if v < 1e-300:
        v = 1e-300
    return log(floor / v)


def riskmetrics_variance(const double[::1] eps, double lam, double init_variance):
    cdef Py_ssize_t n = eps.shape[0], t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] v = out
    cdef double w = 1.0 - lam
    if n == 0:
        return out
    v[0] = init_variance
    for t in range(1, n):
        v[t] = lam * v[t - 1] + w * eps[t - 1] * eps[t - 1]
    return out


def garch_variance(const double[::1] eps, double omega, double alpha, double beta,
                   double init_variance):
    cdef Py_ssize_t n = eps.shape[0], t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] v = out
    if n == 0:
        return out
    v[0] = init_variance
    for t in range(1, n):
        v[t] = omega + alpha * eps[t - 1] * eps[t - 1] + beta * v[t - 1]
    return out


def garch_loglik(const double[::1] eps, double omega, double alpha, double beta,
                 double init_variance, double floor):
    cdef Py_ssize_t n = eps.shape[0], t
    cdef double v = init_variance, e, total = 0.0, short = 0.0
    cdef bint breached = False
    with nogil:
        for t in range(n):
            if t > 0:
                e = eps[t - 1]
                v = omega + alpha * e * e + beta * v
            if v < floor:
                breached = True
                short += _shortfall(v, floor)
                continue
            e = eps[t]
            total += -HALF_LOG_2PI - 0.5 * log(v) - 0.5 * e * e / v
    if breached:
        return PENALTY - short
    return total


def ewma_sk_path(const double[::1] eps, double lam1, double lam2, double lam3,
                 double init_variance, double init_third, double init_fourth):
    cdef Py_ssize_t n = eps.shape[0], t
    var_out = np.empty(n, dtype=np.float64)
    third_out = np.empty(n, dtype=np.float64)
    fourth_out = np.empty(n, dtype=np.float64)
    eta_out = np.empty(n, dtype=np.float64)
    cdef double[::1] v = var_out, s = third_out, k = fourth_out, z = eta_out
    cdef double e, eta, eta2
    if n == 0:
        return var_out, third_out, fourth_out, eta_out
    v[0] = init_variance
    s[0] = init_third
    k[0] = init_fourth
    z[0] = eps[0] / sqrt(init_variance)
    with nogil:
        for t in range(1, n):
            e = eps[t - 1]
            eta = z[t - 1]
            eta2 = eta * eta
            v[t] = lam1 * v[t - 1] + (1.0 - lam1) * e * e
            s[t] = lam2 * s[t - 1] + (1.0 - lam2) * eta2 * eta
            k[t] = lam3 * k[t - 1] + (1.0 - lam3) * eta2 * eta2
            z[t] = eps[t] / sqrt(v[t])
    return var_out, third_out, fourth_out, eta_out


def ewma_sk_loglik(const double[::1] eps, double lam1, double lam2, double lam3,
                   double init_variance, double init_third, double init_fourth,
                   double floor):
    cdef Py_ssize_t n = eps.shape[0], t
    cdef double v = init_variance, s = init_third, k = init_fourth
    cdef double e, eta = 0.0, eta2, g, h, ag, ex, total = 0.0, short = 0.0
    cdef bint breached = False
    with nogil:
        for t in range(n):
            if t > 0:
                e = eps[t - 1]
                eta2 = eta * eta
                v = lam1 * v + (1.0 - lam1) * e * e
                s = lam2 * s + (1.0 - lam2) * eta2 * eta
                k = lam3 * k + (1.0 - lam3) * eta2 * eta2
            if v < floor:
                breached = True
                short += _shortfall(v, floor)
                eta = 0.0
                continue
            eta = eps[t] / sqrt(v)
            eta2 = eta * eta
            ex = k - 3.0
            g = (1.0 + (s / 6.0) * (eta2 * eta - 3.0 * eta)
                 + (ex / 24.0) * (eta2 * eta2 - 6.0 * eta2 + 3.0))
            h = 1.0 + s * s / 6.0 + ex * ex / 24.0
            ag = fabs(g)
            total += -HALF_LOG_2PI - 0.5 * log(v) - 0.5 * eta2 - log(h)
            if ag < G_FLOOR:
                total += 2.0 * LOG_G_FLOOR
            else:
                total += 2.0 * log(ag)
    if breached:
        return PENALTY - short
    return total
