"""RiskMetrics EWMA and the EWMA-SK filter (variance, skewness, kurtosis).

Timing convention: the state dated t is built from residuals up to t-1, so
it is the one-step-ahead forecast for date t. The standardized residual at t
uses the variance dated t.

EWMA-SK recursions, with eps = r - mu and eta = eps / sigma:

    var_t    = lam1 * var_{t-1}    + (1 - lam1) * eps_{t-1}**2
    third_t  = lam2 * third_{t-1}  + (1 - lam2) * eta_{t-1}**3
    fourth_t = lam3 * fourth_{t-1} + (1 - lam3) * eta_{t-1}**4

``third`` and ``fourth`` are the conditional third and fourth moments of eta
and enter the Gram-Charlier density as (skew, kurt) unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from . import kernels
from .errors import EstimationError, InputError
from .ingest import ReturnSeries
from .mle import OptimizationProblem, covariance_from_hessian, maximize, numerical_hessian

RISKMETRICS_LAMBDA = 0.94
_THETA_CLIP = 35.0


@dataclass(frozen=True)
class MomentState:
    variance: float
    third: float = 0.0
    fourth: float = 3.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not self.fourth > 0:
            raise ValueError(f"fourth moment state must be positive, got {self.fourth}")


@dataclass(frozen=True)
class MomentPath:
    """Filtered states and standardized residuals, one row per date."""

    dates: np.ndarray
    variance: np.ndarray
    third: np.ndarray
    fourth: np.ndarray
    std_residual: np.ndarray

    def __len__(self):
        return self.variance.shape[0]

    def state(self, i) -> MomentState:
        return MomentState(float(self.variance[i]), float(self.third[i]), float(self.fourth[i]))

    def rows(self):
        for i in range(len(self)):
            yield (str(self.dates[i]), float(self.variance[i]), float(self.third[i]),
                   float(self.fourth[i]), float(self.std_residual[i]))

    def to_dict(self):
        return {
            "date": [str(d) for d in self.dates],
            "variance": self.variance.tolist(),
            "skew_state": self.third.tolist(),
            "kurt_state": self.fourth.tolist(),
            "std_residual": self.std_residual.tolist(),
        }


@dataclass(frozen=True)
class DecayParams:
    lambda1: float
    lambda2: float
    lambda3: float
    mu: float
    log_likelihood: float = float("nan")
    t_stats: tuple = (float("nan"),) * 3
    std_errors: tuple = (float("nan"),) * 4
    converged: bool = True
    iterations: int = 0
    nobs: int = 0
    mu_pinned: bool = False
    init: MomentState | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            lam = getattr(self, name)
            if not 0.0 < lam < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {lam}")

    @property
    def lambdas(self):
        return (self.lambda1, self.lambda2, self.lambda3)

    def to_dict(self):
        d = {
            "model": "EWMA-SK",
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "mu": self.mu,
            "log_likelihood": self.log_likelihood,
            "t_stats": {"lambda1": self.t_stats[0], "lambda2": self.t_stats[1], "lambda3": self.t_stats[2]},
            "std_errors": dict(zip(("lambda1", "lambda2", "lambda3", "mu"), self.std_errors)),
            "converged": self.converged,
            "iterations": self.iterations,
            "nobs": self.nobs,
            "mu_pinned": self.mu_pinned,
        }
        if self.init is not None:
            d["init"] = {"variance": self.init.variance, "third": self.init.third, "fourth": self.init.fourth}
        return d


def _check_lambda(lam, name="lambda"):
    if not 0.0 < lam < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {lam}")


def _as_arrays(returns):
    if isinstance(returns, ReturnSeries):
        return returns.dates, np.asarray(returns.returns, dtype=np.float64)
    r = np.asarray(returns, dtype=np.float64)
    return np.arange(r.shape[0]).astype("datetime64[D]"), r


def riskmetrics_step(prev_variance, prev_residual, lam):
    _check_lambda(lam)
    if not prev_variance > 0:
        raise ValueError("prev_variance must be positive")
    return lam * prev_variance + (1.0 - lam) * prev_residual * prev_residual


def riskmetrics_filter(returns, lam=RISKMETRICS_LAMBDA, mu=0.0, init_variance=None) -> MomentPath:
    """RiskMetrics variance path over every observation of ``returns``.

    ``init_variance`` defaults to the in-sample variance. The shape states are
    held at the Gaussian values (0, 3).
    """
    _check_lambda(lam)
    dates, r = _as_arrays(returns)
    if r.shape[0] < 2:
        raise InputError("RiskMetrics filter needs at least 2 observations")
    if init_variance is None:
        init_variance = initial_variance(returns)
    if not init_variance > 0:
        raise ValueError("init_variance must be positive")
    eps = r - mu
    v = kernels.riskmetrics_variance(np.ascontiguousarray(eps), float(lam), float(init_variance))
    n = r.shape[0]
    return MomentPath(dates, v, np.zeros(n), np.full(n, 3.0), eps / np.sqrt(v))


def initial_variance(returns) -> float:
    """In-sample variance (divisor count) used to start every filter."""
    if isinstance(returns, ReturnSeries):
        x = returns.in_sample if returns.split_index >= 2 else returns.returns
    else:
        x = np.asarray(returns, dtype=np.float64)
    return float(np.var(x))


def ewma_sk_step(state: MomentState, residual, lambdas) -> MomentState:
    lam1, lam2, lam3 = lambdas
    for i, lam in enumerate(lambdas, start=1):
        _check_lambda(lam, f"lambda{i}")
    eta = residual / math.sqrt(state.variance)
    eta2 = eta * eta
    return MomentState(
        variance=lam1 * state.variance + (1.0 - lam1) * residual * residual,
        third=lam2 * state.third + (1.0 - lam2) * eta2 * eta,
        fourth=lam3 * state.fourth + (1.0 - lam3) * eta2 * eta2,
    )


def default_init(returns) -> MomentState:
    return MomentState(initial_variance(returns), 0.0, 3.0)


def ewma_sk_filter(returns, params: DecayParams, init: MomentState | None = None) -> MomentPath:
    """Run the EWMA-SK recursions over every observation of ``returns``."""
    dates, r = _as_arrays(returns)
    if r.shape[0] < 2:
        raise InputError("EWMA-SK filter needs at least 2 observations")
    if init is None:
        init = params.init if params.init is not None else default_init(returns)
    eps = np.ascontiguousarray(r - params.mu)
    v, s, k, eta = kernels.ewma_sk_path(eps, params.lambda1, params.lambda2, params.lambda3,
                                        init.variance, init.third, init.fourth)
    return MomentPath(dates, v, s, k, eta)


def ewma_sk_loglik(returns, lambdas, mu, init: MomentState) -> float:
    """Gram-Charlier log-likelihood of ``returns`` (array) under the EWMA-SK filter."""
    eps = np.ascontiguousarray(np.asarray(returns, dtype=np.float64) - mu)
    lam1, lam2, lam3 = lambdas
    return kernels.ewma_sk_loglik(eps, lam1, lam2, lam3, init.variance, init.third, init.fourth,
                                  kernels.VARIANCE_FLOOR)


def _lambdas_from(theta):
    return expit(np.clip(theta[:3], -_THETA_CLIP, _THETA_CLIP))


# Coarse start grid. The Gram-Charlier likelihood has exact zeros and is
# rugged in the decay factors, so a local optimizer needs a sensible start.
START_GRID_LAMBDA1 = (0.90, 0.94, 0.97, 0.99)
START_GRID_SHAPE = (0.90, 0.97, 0.99, 0.999, 0.9999)


def _grid_start(x, mu, init):
    best, best_ll = None, -np.inf
    for l1 in START_GRID_LAMBDA1:
        for l2 in START_GRID_SHAPE:
            for l3 in START_GRID_SHAPE:
                ll = ewma_sk_loglik(x, (l1, l2, l3), mu, init)
                if ll > best_ll:
                    best, best_ll = (l1, l2, l3), ll
    return best


def estimate_ewma_sk(returns: ReturnSeries, *, pin_mu=False, start=None,
                     tolerance=1e-6, max_iterations=500):
    """Maximum-likelihood decay factors (and mean) on the in-sample period.

    Decay factors are optimized as logits; t-statistics for the natural
    parameters come from the delta method. ``start`` defaults to the best
    point of a coarse grid. Returns ``(DecayParams, MomentPath)`` with the
    path filtered over the whole series.
    """
    if not isinstance(returns, ReturnSeries):
        returns = ReturnSeries(np.arange(len(returns)).astype("datetime64[D]"), returns)
    x = np.ascontiguousarray(returns.in_sample, dtype=np.float64)
    n = x.shape[0]
    if n < 100:
        raise EstimationError(f"EWMA-SK estimation needs >= 100 in-sample observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise EstimationError("in-sample returns contain non-finite values")
    if not float(np.var(x)) > 1e-12:
        raise EstimationError("zero variance in the in-sample returns", diagnostic="zero variance")
    init = default_init(returns)
    mu0 = float(np.mean(x))
    if start is None:
        start = _grid_start(x, mu0, init)

    if pin_mu:
        def unpack(theta):
            return _lambdas_from(theta), mu0
        theta0 = logit(np.asarray(start, dtype=np.float64))
        names = ("logit_lambda1", "logit_lambda2", "logit_lambda3")
    else:
        def unpack(theta):
            return _lambdas_from(theta), theta[3]
        theta0 = np.append(logit(np.asarray(start, dtype=np.float64)), mu0)
        names = ("logit_lambda1", "logit_lambda2", "logit_lambda3", "mu")

    def objective(theta):
        lams, mu = unpack(theta)
        return ewma_sk_loglik(x, lams, mu, init) / n

    result = maximize(OptimizationProblem(objective, theta0, names), tolerance=tolerance,
                      max_iterations=max_iterations, compute_standard_errors=False)
    lams, mu = unpack(result.point)
    best = {"lambda1": float(lams[0]), "lambda2": float(lams[1]), "lambda3": float(lams[2]),
            "mu": float(mu), "log_likelihood": result.value * n}
    if not result.converged:
        raise EstimationError(
            f"EWMA-SK likelihood maximization did not converge: {result.message}",
            best_point=best,
            diagnostic=f"{result.message}; gradient inf-norm {result.gradient_norm:.3g} "
                       f"after {result.iterations} iterations",
        )
    se_nat, t_stats = _delta_method_lambdas(objective, result.point, n, pin_mu)
    params = DecayParams(
        lambda1=best["lambda1"], lambda2=best["lambda2"], lambda3=best["lambda3"], mu=best["mu"],
        log_likelihood=best["log_likelihood"], t_stats=t_stats, std_errors=se_nat,
        converged=True, iterations=result.iterations, nobs=n, mu_pinned=bool(pin_mu), init=init,
    )
    return params, ewma_sk_filter(returns, params, init)


def _delta_method_lambdas(objective, theta, n, pin_mu):
    H = n * numerical_hessian(objective, theta)
    cov = covariance_from_hessian(H)
    k = theta.shape[0]
    if cov is None:
        nan = float("nan")
        return (nan, nan, nan, nan), (nan, nan, nan)
    lams = _lambdas_from(theta)
    jac = np.ones(k)
    jac[:3] = lams * (1.0 - lams)
    se = np.sqrt(np.diag(cov)) * jac
    se_all = tuple(float(v) for v in se) + ((float("nan"),) if pin_mu else ())
    t_stats = tuple(float(l / s) for l, s in zip(lams, se[:3]))
    return se_all, t_stats
