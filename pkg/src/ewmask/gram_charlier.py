"""Hermite polynomials and the positivity-corrected Gram-Charlier density.

The density of a standardized residual x with shape (s, k) is

    f(x) = phi(x) * g(x)**2 / h,
    g(x) = 1 + (s/6) He3(x) + ((k-3)/24) He4(x),
    h    = 1 + s**2/6 + (k-3)**2/24,

which is nonnegative everywhere and integrates to one. Functions accept
scalars or NumPy arrays for ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
# |g| below this is treated as this when taking logs, so the likelihood stays finite
G_FLOOR = 1e-150
LOG_G_FLOOR = math.log(G_FLOOR)

GAUSSIAN_KURTOSIS = 3.0


@dataclass(frozen=True)
class ShapePair:
    """Conditional third and fourth moments of the standardized residual."""

    skew: float
    kurt: float

    def __post_init__(self):
        if not self.kurt > 0:
            raise ValueError(f"kurt must be positive, got {self.kurt}")


GAUSSIAN = ShapePair(0.0, GAUSSIAN_KURTOSIS)


@dataclass(frozen=True)
class GcDensityValue:
    density: float | np.ndarray
    log_density: float | np.ndarray


def hermite_he3(x):
    return x**3 - 3.0 * x


def hermite_he4(x):
    x2 = x * x
    return x2 * x2 - 6.0 * x2 + 3.0


def gc_polynomial(x, shape: ShapePair):
    return 1.0 + (shape.skew / 6.0) * hermite_he3(x) + ((shape.kurt - 3.0) / 24.0) * hermite_he4(x)


def gc_normalizer(shape: ShapePair) -> float:
    return 1.0 + shape.skew**2 / 6.0 + (shape.kurt - 3.0) ** 2 / 24.0


def _log_abs_g(g):
    ag = np.abs(g)
    out = np.log(np.maximum(ag, G_FLOOR))
    return np.where(ag < G_FLOOR, LOG_G_FLOOR, out)


def gc_density(x, shape: ShapePair) -> GcDensityValue:
    x = np.asarray(x, dtype=np.float64)
    g = gc_polynomial(x, shape)
    h = gc_normalizer(shape)
    log_phi = -0.5 * LOG_2PI - 0.5 * x * x
    log_density = log_phi + 2.0 * _log_abs_g(g) - math.log(h)
    density = np.exp(log_phi) * g * g / h
    if density.ndim == 0:
        return GcDensityValue(float(density), float(log_density))
    return GcDensityValue(density, log_density)


def gc_loglik_term(residual, variance, shape: ShapePair):
    """Log-density of a residual with conditional variance ``variance``.

    Sum of the five terms: -log(2 pi)/2 - log(variance)/2 - eta**2/2
    + log g(eta)**2 - log h, with eta = residual / sqrt(variance).
    """
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(~(variance > 0)):
        raise ValueError("variance must be positive")
    eta = np.asarray(residual, dtype=np.float64) / np.sqrt(variance)
    out = (
        -0.5 * LOG_2PI
        - 0.5 * np.log(variance)
        - 0.5 * eta * eta
        + 2.0 * _log_abs_g(gc_polynomial(eta, shape))
        - math.log(gc_normalizer(shape))
    )
    return float(out) if out.ndim == 0 else out


def _gc_expansion_unsquared(x, shape: ShapePair):
    # phi(x) * g(x): the raw truncated expansion. Can go negative; tests only.
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * LOG_2PI - 0.5 * x * x) * gc_polynomial(x, shape)
