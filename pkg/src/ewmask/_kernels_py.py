"""NumPy implementations of the filter and likelihood kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``EWMASK_PURE_PYTHON=1`` is set. The linear recursions run through
``scipy.signal.lfilter``; the likelihoods are vectorized over the filtered path.
"""

import numpy as np
from scipy.signal import lfilter

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
G_FLOOR = 1e-150
LOG_G_FLOOR = np.log(G_FLOOR)
PENALTY = -1e10


def _ewma(x, lam, init):
    """y[0] = init, y[t] = lam*y[t-1] + (1-lam)*x[t-1]."""
    out = np.empty(x.shape[0], dtype=np.float64)
    if out.shape[0] == 0:
        return out
    out[0] = init
    if out.shape[0] > 1:
        out[1:] = lfilter([1.0 - lam], [1.0, -lam], x[:-1], zi=[lam * init])[0]
    return out


def _penalty(v, floor):
    bad = v < floor
    short = np.log(floor / np.maximum(v[bad], 1e-300))
    return PENALTY - float(np.sum(short))


def riskmetrics_variance(eps, lam, init_variance):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    return _ewma(eps * eps, lam, init_variance)


def garch_variance(eps, omega, alpha, beta, init_variance):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    out = np.empty(eps.shape[0], dtype=np.float64)
    if out.shape[0] == 0:
        return out
    out[0] = init_variance
    if out.shape[0] > 1:
        drive = omega + alpha * eps[:-1] * eps[:-1]
        out[1:] = lfilter([1.0], [1.0, -beta], drive, zi=[beta * init_variance])[0]
    return out


def garch_loglik(eps, omega, alpha, beta, init_variance, floor):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    v = garch_variance(eps, omega, alpha, beta, init_variance)
    if np.any(v < floor):
        return _penalty(v, floor)
    return float(np.sum(-HALF_LOG_2PI - 0.5 * np.log(v) - 0.5 * eps * eps / v))


def ewma_sk_path(eps, lam1, lam2, lam3, init_variance, init_third, init_fourth):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    v = _ewma(eps * eps, lam1, init_variance)
    eta = eps / np.sqrt(v)
    eta2 = eta * eta
    s = _ewma(eta2 * eta, lam2, init_third)
    k = _ewma(eta2 * eta2, lam3, init_fourth)
    return v, s, k, eta


def ewma_sk_loglik(eps, lam1, lam2, lam3, init_variance, init_third, init_fourth, floor):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    v = _ewma(eps * eps, lam1, init_variance)
    if np.any(v < floor):
        return _penalty(v, floor)
    eta = eps / np.sqrt(v)
    eta2 = eta * eta
    s = _ewma(eta2 * eta, lam2, init_third)
    k = _ewma(eta2 * eta2, lam3, init_fourth)
    ex = k - 3.0
    g = 1.0 + (s / 6.0) * (eta2 * eta - 3.0 * eta) + (ex / 24.0) * (eta2 * eta2 - 6.0 * eta2 + 3.0)
    h = 1.0 + s * s / 6.0 + ex * ex / 24.0
    ag = np.abs(g)
    log_g = np.where(ag < G_FLOOR, LOG_G_FLOOR, np.log(np.maximum(ag, G_FLOOR)))
    terms = -HALF_LOG_2PI - 0.5 * np.log(v) - 0.5 * eta2 + 2.0 * log_g - np.log(h)
    return float(np.sum(terms))
