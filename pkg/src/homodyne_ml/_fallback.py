"""NumPy versions of the log-likelihood kernels in ``_kernels.pyx``."""
import math

import numpy as np


def residual_sumsq(x, m, g):
    r = x - g * m
    return float(np.sum(r * r))


def loglik(x, m, g, s_sq):
    return -0.5 * x.shape[0] * math.log(math.pi * s_sq) - residual_sumsq(x, m, g) / s_sq


def loglik_grid(x, m, g, s_sq):
    if g.shape != s_sq.shape:
        raise ValueError("array lengths do not match")
    return np.array([loglik(x, m, gk, sk) for gk, sk in zip(g, s_sq)], dtype=np.float64)
