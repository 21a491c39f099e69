"""Pick the compiled kernels when available, otherwise the NumPy fallback.

Set ``HOMODYNE_ML_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

kernels = _fallback
NAME = "numpy"

if os.environ.get("HOMODYNE_ML_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        kernels = _kernels
        NAME = "cython"

residual_sumsq = kernels.residual_sumsq
loglik = kernels.loglik
loglik_grid = kernels.loglik_grid
