"""Quasi-Newton maximum-likelihood driver with numerical derivatives.

Objectives are maximized. They must be pure functions of the parameter vector
and must return a finite value everywhere they are probed; invalid regions
should return the documented penalty (``kernels.PENALTY`` minus a nonnegative
distance term) rather than raising.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4
WOLFE_C2 = 0.9
STEP_STALL = 1e-12
MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class OptimizationProblem:
    objective: Callable[[np.ndarray], float]
    initial_point: Sequence[float]
    parameter_names: Sequence[str] = ()


@dataclass(frozen=True)
class OptimizationResult:
    point: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    standard_errors: np.ndarray
    hessian: np.ndarray | None = None
    message: str = ""
    evaluations: int = 0
    names: tuple = field(default=())


def _fd_steps(x):
    return np.maximum(1e-6, 1e-7 * np.abs(x))


def numerical_gradient(f, x, steps=None):
    """Central-difference gradient."""
    x = np.asarray(x, dtype=np.float64)
    h = _fd_steps(x) if steps is None else np.broadcast_to(steps, x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def numerical_hessian(objective, point, step=None):
    """Symmetric central-difference Hessian.

    ``step`` may be a scalar or per-coordinate array; the default is
    ``1e-4 * max(1, |x_i|)``.
    """
    x = np.asarray(point, dtype=np.float64)
    n = x.size
    if step is None:
        h = 1e-4 * np.maximum(1.0, np.abs(x))
    else:
        h = np.broadcast_to(np.asarray(step, dtype=np.float64), x.shape).copy()
    f0 = objective(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (objective(x + ei) - 2.0 * f0 + objective(x - ei)) / (h[i] * h[i])
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            v = (
                objective(x + ei + ej)
                - objective(x + ei - ej)
                - objective(x - ei + ej)
                + objective(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def covariance_from_hessian(H):
    """Inverse of the negative Hessian, or None if it is not positive definite."""
    H = np.asarray(H, dtype=np.float64)
    if not np.all(np.isfinite(H)):
        return None
    neg = -0.5 * (H + H.T)
    try:
        L = np.linalg.cholesky(neg)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L)
    if d.min() <= 0 or (d.max() / d.min()) ** 2 > 1e14:
        return None
    inv_l = np.linalg.inv(L)
    return inv_l.T @ inv_l


def standard_errors(H):
    """Square roots of diag(-H^-1); all-NaN when unavailable."""
    cov = covariance_from_hessian(H)
    if cov is None:
        return np.full(np.asarray(H).shape[0], np.nan)
    return np.sqrt(np.diag(cov))


class _Counted:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        v = float(self.f(x))
        return v if np.isfinite(v) else -np.inf


def _line_search(phi, x, fx, g, d, slope):
    """Weak-Wolfe search on phi along d. Returns (t, f_t, grad_t) or None.

    Sufficient decrease of phi (i.e. sufficient increase of the objective) is
    always required; the curvature condition keeps BFGS updates well defined.
    """
    lo, hi = 0.0, np.inf
    t = 1.0
    for _ in range(MAX_BACKTRACKS):
        ft = phi(x + t * d)
        if not (np.isfinite(ft) and ft <= fx + ARMIJO_C1 * t * slope):
            hi = t
            if np.isfinite(ft):
                denom = 2.0 * (ft - fx - slope * t)
                t_new = -slope * t * t / denom if denom > 0 else 0.5 * (lo + t)
            else:
                t_new = lo + 0.1 * (t - lo)
            # stay inside the bracket, away from its ends
            t = min(max(t_new, lo + 0.1 * (hi - lo)), lo + 0.5 * (hi - lo))
            continue
        # quadratic refinement, exact on quadratic objectives
        denom = 2.0 * (ft - fx - slope * t)
        if denom > 0:
            tq = -slope * t * t / denom
            if 0.0 < tq < min(10.0 * t, hi) and abs(tq - t) > 1e-3 * t:
                fq = phi(x + tq * d)
                if np.isfinite(fq) and fq < ft and fq <= fx + ARMIJO_C1 * tq * slope:
                    t, ft = tq, fq
        gt = numerical_gradient(phi, x + t * d)
        if float(gt @ d) >= WOLFE_C2 * slope or np.max(np.abs(t * d)) < STEP_STALL:
            return t, ft, gt
        lo = t
        t = 2.0 * t if hi == np.inf else 0.5 * (lo + hi)
    return None


def _bfgs(f, x0, tolerance, max_iterations):
    """Minimize -f. Returns (x, fx, grad, iterations, converged, message)."""
    phi = lambda z: -f(z)
    x = np.array(x0, dtype=np.float64)
    fx = phi(x)
    g = numerical_gradient(phi, x)
    n = x.size
    Hinv = np.eye(n)
    first = True
    message = "iteration limit reached"
    it = 0
    for it in range(1, max_iterations + 1):
        if np.max(np.abs(g)) <= tolerance:
            return x, fx, g, it - 1, True, "gradient below tolerance"
        d = -Hinv @ g
        slope = float(g @ d)
        if not slope < 0:
            Hinv = np.eye(n)
            d = -g
            slope = float(g @ d)
        found = _line_search(phi, x, fx, g, d, slope)
        if found is None:
            message = "line search failed to find an increase"
            break
        t, ft, g_new = found
        s = t * d
        y = g_new - g
        x, fx, g = x + s, ft, g_new
        if np.max(np.abs(s)) < STEP_STALL:
            message = "step size stalled"
            break
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                Hinv = np.eye(n) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
    else:
        it = max_iterations
    converged = bool(np.max(np.abs(g)) <= tolerance)
    if converged:
        message = "gradient below tolerance"
    return x, fx, g, it, converged, message


def maximize(problem: OptimizationProblem, tolerance: float = 1e-6, max_iterations: int = 500,
             compute_standard_errors: bool = True) -> OptimizationResult:
    """Maximize ``problem.objective`` by BFGS with central-difference gradients.

    If the first run does not converge, one restart is made from the initial
    point perturbed by +10% elementwise (+0.1 for zero entries); the better of
    the two runs is returned.
    """
    f = _Counted(problem.objective)
    x0 = np.asarray(problem.initial_point, dtype=np.float64)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial point must be finite")
    if not np.isfinite(f(x0)):
        raise ValueError("objective is not finite at the initial point")

    best = _bfgs(f, x0, tolerance, max_iterations)
    iterations = best[3]
    if not best[4]:
        logger.info("no convergence from initial point (%s); restarting", best[5])
        x1 = np.where(x0 == 0.0, 0.1, x0 * 1.1)
        if np.isfinite(f(x1)):
            alt = _bfgs(f, x1, tolerance, max_iterations)
            iterations += alt[3]
            if (alt[4] and not best[4]) or (alt[4] == best[4] and alt[1] < best[1]):
                best = alt

    x, fx, g, _, converged, message = best
    H = numerical_hessian(f, x) if compute_standard_errors else None
    se = standard_errors(H) if H is not None else np.full(x.size, np.nan)
    return OptimizationResult(
        point=x,
        value=-fx,
        gradient_norm=float(np.max(np.abs(g))),
        iterations=iterations,
        converged=converged,
        standard_errors=se,
        hessian=H,
        message=message,
        evaluations=f.calls,
        names=tuple(problem.parameter_names),
    )
