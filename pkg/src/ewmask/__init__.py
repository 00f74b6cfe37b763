"""EWMA-SK volatility, skewness and kurtosis filtering with VaR forecasting and backtests."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
