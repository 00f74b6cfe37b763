"""Backend selection for the hot filter/likelihood loops.

The compiled extension is preferred. Set ``EWMASK_PURE_PYTHON=1`` before import
to force the NumPy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("EWMASK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

PENALTY = _kernels_py.PENALTY
VARIANCE_FLOOR = 1e-12

riskmetrics_variance = _impl.riskmetrics_variance
garch_variance = _impl.garch_variance
garch_loglik = _impl.garch_loglik
ewma_sk_path = _impl.ewma_sk_path
ewma_sk_loglik = _impl.ewma_sk_loglik

__all__ = [
    "BACKEND",
    "PENALTY",
    "VARIANCE_FLOOR",
    "riskmetrics_variance",
    "garch_variance",
    "garch_loglik",
    "ewma_sk_path",
    "ewma_sk_loglik",
]
