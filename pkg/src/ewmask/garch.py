"""GARCH(1,1) with Gaussian innovations: recursion, likelihood and estimation.

    sigma2_t = omega + alpha * eps_{t-1}**2 + beta * sigma2_{t-1},  eps_t = r_t - mu

Estimation runs unconstrained over (mu, log omega, logit(alpha+beta),
logit(alpha/(alpha+beta))), which keeps the optimum stationary and interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from . import kernels
from .errors import EstimationError
from .ingest import ReturnSeries
from .mle import OptimizationProblem, covariance_from_hessian, maximize, numerical_hessian

_NAN4 = (float("nan"),) * 4


@dataclass(frozen=True)
class GarchParams:
    mu: float
    omega: float
    alpha: float
    beta: float
    log_likelihood: float = float("nan")
    t_stats: tuple = _NAN4
    std_errors: tuple = _NAN4
    converged: bool = True
    iterations: int = 0
    nobs: int = 0
    init_variance: float = float("nan")

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not (self.alpha >= 0 and self.beta >= 0):
            raise ValueError(f"alpha and beta must be nonnegative, got {self.alpha}, {self.beta}")
        if not self.alpha + self.beta < 1:
            raise ValueError(f"alpha + beta must be below 1, got {self.alpha + self.beta}")

    @property
    def persistence(self):
        return self.alpha + self.beta

    @property
    def unconditional_variance(self):
        return self.omega / (1.0 - self.alpha - self.beta)

    def to_dict(self):
        names = ("mu", "omega", "alpha", "beta")
        return {
            "model": "GARCH(1,1)-N",
            "mu": self.mu,
            "omega": self.omega,
            "alpha": self.alpha,
            "beta": self.beta,
            "log_likelihood": self.log_likelihood,
            "t_stats": dict(zip(names, self.t_stats)),
            "std_errors": dict(zip(names, self.std_errors)),
            "converged": self.converged,
            "iterations": self.iterations,
            "nobs": self.nobs,
            "init_variance": self.init_variance,
        }


def garch_step(prev_variance, prev_residual, params: GarchParams):
    if not prev_variance > 0:
        raise ValueError("prev_variance must be positive")
    return params.omega + params.alpha * prev_residual * prev_residual + params.beta * prev_variance


def _in_sample(returns):
    if isinstance(returns, ReturnSeries):
        return np.ascontiguousarray(returns.in_sample, dtype=np.float64)
    return np.ascontiguousarray(returns, dtype=np.float64)


def garch_loglik(returns, params: GarchParams, init_variance) -> float:
    """Gaussian log-likelihood over the in-sample period (or a plain array)."""
    x = _in_sample(returns)
    if x.shape[0] < 1:
        raise ValueError("need at least one observation")
    return kernels.garch_loglik(x - params.mu, params.omega, params.alpha, params.beta,
                                float(init_variance), kernels.VARIANCE_FLOOR)


def garch_filter(returns, params: GarchParams, init_variance=None):
    """Conditional variance over every observation; returns (dates, variance, std_residual)."""
    if isinstance(returns, ReturnSeries):
        dates, r = returns.dates, np.asarray(returns.returns, dtype=np.float64)
    else:
        r = np.asarray(returns, dtype=np.float64)
        dates = np.arange(r.shape[0]).astype("datetime64[D]")
    if init_variance is None:
        init_variance = params.init_variance if np.isfinite(params.init_variance) else float(np.var(_in_sample(returns)))
    eps = np.ascontiguousarray(r - params.mu)
    v = kernels.garch_variance(eps, params.omega, params.alpha, params.beta, float(init_variance))
    return dates, v, eps / np.sqrt(v)


def garch_forecast(next_variance, params: GarchParams, horizon):
    """Expected variance for steps 1..horizon ahead, starting from ``next_variance``."""
    out = np.empty(horizon)
    v = float(next_variance)
    for j in range(horizon):
        out[j] = v
        v = params.omega + params.persistence * v
    return out


def _natural(theta):
    mu, log_omega, a, b = theta
    p = expit(a)
    q = expit(b)
    return mu, float(np.exp(log_omega)), p * q, p * (1.0 - q)


def _jacobian(theta):
    _, log_omega, a, b = theta
    p, q = expit(a), expit(b)
    dp = p * (1.0 - p)
    dq = q * (1.0 - q)
    J = np.zeros((4, 4))
    J[0, 0] = 1.0
    J[1, 1] = np.exp(log_omega)
    J[2, 2], J[2, 3] = dp * q, p * dq
    J[3, 2], J[3, 3] = dp * (1.0 - q), -p * dq
    return J


def estimate_garch(returns: ReturnSeries, *, tolerance=1e-6, max_iterations=500) -> GarchParams:
    """Maximum-likelihood GARCH(1,1)-N fit on the in-sample period."""
    x = _in_sample(returns)
    n = x.shape[0]
    if n < 100:
        raise EstimationError(f"GARCH estimation needs >= 100 in-sample observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise EstimationError("in-sample returns contain non-finite values")
    var0 = float(np.var(x))
    if not var0 > 1e-12:
        raise EstimationError("zero variance in the in-sample returns", diagnostic="zero variance")
    alpha0, beta0 = 0.05, 0.90
    theta0 = np.array([np.mean(x), np.log(0.05 * var0), logit(alpha0 + beta0), logit(alpha0 / (alpha0 + beta0))])

    def objective(theta):
        mu, omega, alpha, beta = _natural(theta)
        if not (omega > 0 and np.isfinite(omega)):
            return kernels.PENALTY
        return kernels.garch_loglik(x - mu, omega, alpha, beta, var0, kernels.VARIANCE_FLOOR) / n

    names = ("mu", "log_omega", "logit_persistence", "logit_alpha_share")
    result = maximize(OptimizationProblem(objective, theta0, names), tolerance=tolerance,
                      max_iterations=max_iterations, compute_standard_errors=False)
    mu, omega, alpha, beta = _natural(result.point)
    if not result.converged:
        raise EstimationError(
            f"GARCH likelihood maximization did not converge: {result.message}",
            best_point={"mu": mu, "omega": omega, "alpha": alpha, "beta": beta,
                        "log_likelihood": result.value * n},
            diagnostic=f"{result.message}; gradient inf-norm {result.gradient_norm:.3g} "
                       f"after {result.iterations} iterations",
        )
    cov = covariance_from_hessian(n * numerical_hessian(objective, result.point))
    if cov is None:
        se = t = _NAN4
    else:
        J = _jacobian(result.point)
        se_arr = np.sqrt(np.maximum(np.diag(J @ cov @ J.T), 0.0))
        se = tuple(float(v) for v in se_arr)
        t = tuple(float(v / s) if s > 0 else float("nan") for v, s in zip((mu, omega, alpha, beta), se_arr))
    return GarchParams(mu=float(mu), omega=omega, alpha=float(alpha), beta=float(beta),
                       log_likelihood=result.value * n, t_stats=t, std_errors=se, converged=True,
                       iterations=result.iterations, nobs=n, init_variance=var0)
