"""Maximum-likelihood estimation of the medium gains from homodyne data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _backend
from .channel_model import Gains, detection_noise, invert_channel, noise_per_time
from .homodyne import Dataset

__all__ = [
    "DegenerateDatasetError",
    "FitOptions",
    "FitResult",
    "MomentInit",
    "FisherErrors",
    "log_likelihood",
    "moment_init",
    "mle_fit",
    "observed_information",
    "fisher_errors",
    "grid_search_oracle",
]

LOG_FLOOR = 1e-12
MIN_SAMPLES = 4


class DegenerateDatasetError(ValueError):
    """Too few samples to estimate two gains and a noise level."""


@dataclass(frozen=True)
class FitOptions:
    tol_loglik: float = 1e-8
    tol_param: float = 1e-6
    max_iters: int = 2000
    restarts: int = 3

    def __post_init__(self):
        if not (self.tol_loglik > 0 and self.tol_param > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


def _factor_and_width(g1: float, g2: float, time: float, extra: float) -> tuple[float, float]:
    """``(g, s**2)`` for raw gains; ``extra`` is the detector term.

    Same arithmetic as ``derive_channel`` + ``total_variance_param`` without
    building the dataclasses; every likelihood evaluation goes through here.
    """
    q = 0.5 * (g1 - g2)
    g = math.exp(-q * time)
    return g, (g1 + g2) * noise_per_time(q, time) + 0.5 * g * g + extra


def log_likelihood(dataset: Dataset, gains: Gains) -> float:
    """Sum of homodyne log-densities of every sample under ``gains``."""
    g, s_sq = _factor_and_width(gains.g1, gains.g2, dataset.time, detection_noise(dataset.eta))
    return _backend.loglik(dataset.values, dataset.projections, g, s_sq)


def _loglik_many(dataset: Dataset, g1s, g2s) -> np.ndarray:
    extra = detection_noise(dataset.eta)
    pairs = [_factor_and_width(float(a), float(b), dataset.time, extra) for a, b in zip(g1s, g2s)]
    g, s = np.array(pairs, dtype=np.float64).reshape(-1, 2).T.copy()
    return _backend.loglik_grid(dataset.values, dataset.projections, g, s)


@dataclass(frozen=True)
class MomentInit:
    """Method-of-moments starting point and how it was obtained."""

    gains: Gains
    g_obs: float
    s_sq_obs: float
    clamped: tuple[bool, bool] = (False, False)
    nonphysical: bool = False
    weak_probe: bool = False


def moment_init(dataset: Dataset) -> MomentInit:
    """Starting gains from a linear fit of ``x`` on ``(cos phi, sin phi)``.

    The regression coefficients are ``g alpha0``, giving ``g``; the residual
    variance is ``s**2 / 2``. Both are mapped back through
    :func:`invert_channel`. With a (near) vacuum probe ``g`` cannot be read
    from the mean, so ``g = 1`` is assumed and ``weak_probe`` is set.
    """
    n = len(dataset)
    if n < 10:
        raise DegenerateDatasetError(f"moment initializer needs >= 10 samples, got {n}")
    probe = dataset.probe
    a0_sq = probe.alpha_re**2 + probe.alpha_im**2
    x = dataset.values
    design = np.column_stack([np.cos(dataset.phases), np.sin(dataset.phases)])
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    weak = math.sqrt(a0_sq) < 1e-6
    if weak:
        g_obs = 1.0
        resid = x
        dof = n
    else:
        g_obs = (coef[0] * probe.alpha_re + coef[1] * probe.alpha_im) / a0_sq
        resid = x - design @ coef
        dof = n - 2
    # a negative regression slope is noise around g ~ 0
    g_obs = max(g_obs, 1e-6)
    s_sq_obs = 2.0 * float(resid @ resid) / dof
    inv = invert_channel(g_obs, s_sq_obs, dataset.time, dataset.eta)
    return MomentInit(inv.gains, g_obs, s_sq_obs, inv.clamped, inv.nonphysical, weak)


@dataclass(frozen=True)
class FisherErrors:
    """Standard errors from the inverse observed information.

    ``flag`` is ``None`` on success, ``"boundary estimate"`` when a gain is too
    close to zero for central differences, or ``"non-invertible information"``
    when the matrix is not positive definite. Flagged errors are infinite.
    """

    dg1: float
    dg2: float
    flag: str | None = None
    information: np.ndarray | None = field(default=None, compare=False, repr=False)

    def as_pair(self) -> tuple[float, float]:
        return (self.dg1, self.dg2)


def _fd_steps(gains: Gains, h=None) -> tuple[float, float]:
    if h is not None:
        h1, h2 = np.broadcast_to(np.asarray(h, dtype=float), (2,))
        return (float(h1), float(h2))
    return tuple(1e-4 * max(1.0, v) for v in gains.as_tuple())


def observed_information(dataset: Dataset, gains: Gains, h=None) -> np.ndarray:
    """Negative Hessian of the log-likelihood by central finite differences.

    Steps are ``1e-4 * max(1, G)`` per component unless ``h`` (scalar or
    pair) is given.
    """
    h1, h2 = _fd_steps(gains, h)
    a, b = gains.as_tuple()
    pts = [
        (a, b),
        (a + h1, b), (a - h1, b),
        (a, b + h2), (a, b - h2),
        (a + h1, b + h2), (a + h1, b - h2), (a - h1, b + h2), (a - h1, b - h2),
    ]
    f = _loglik_many(dataset, [p[0] for p in pts], [p[1] for p in pts])
    h11 = (f[1] - 2 * f[0] + f[2]) / (h1 * h1)
    h22 = (f[3] - 2 * f[0] + f[4]) / (h2 * h2)
    h12 = (f[5] - f[6] - f[7] + f[8]) / (4 * h1 * h2)
    return -np.array([[h11, h12], [h12, h22]])


def fisher_errors(dataset: Dataset, gains_hat: Gains, h=None) -> FisherErrors:
    h1, h2 = _fd_steps(gains_hat, h)
    if gains_hat.g1 <= 10 * h1 or gains_hat.g2 <= 10 * h2:
        return FisherErrors(math.inf, math.inf, "boundary estimate")
    info = observed_information(dataset, gains_hat, h)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return FisherErrors(math.inf, math.inf, "non-invertible information", info)
    cov = np.linalg.inv(info)
    return FisherErrors(math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]), None, info)


@dataclass(frozen=True)
class FitResult:
    gains_hat: Gains
    err: tuple[float, float]
    loglik: float
    converged: bool
    iters: int
    init: Gains
    clamped: tuple[bool, bool] = (False, False)
    seed: int = 0
    flag: str | None = None
    init_loglik: float = -math.inf

    _KEYS = ("g1_hat", "g2_hat", "dg1", "dg2", "loglik", "converged", "iters", "seed")

    def to_block(self) -> str:
        vals = {
            "g1_hat": repr(self.gains_hat.g1),
            "g2_hat": repr(self.gains_hat.g2),
            "dg1": repr(self.err[0]),
            "dg2": repr(self.err[1]),
            "loglik": repr(self.loglik),
            "converged": str(self.converged).lower(),
            "iters": str(self.iters),
            "seed": str(self.seed),
        }
        return "".join(f"{k}={vals[k]}\n" for k in self._KEYS)

    @staticmethod
    def parse_block(text: str) -> dict:
        out = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                out[k.strip()] = v.strip()
        return out


def _to_log(gains: Gains) -> np.ndarray:
    return np.log(np.array(gains.as_tuple()) + LOG_FLOOR)


def _from_log(z) -> Gains:
    return Gains(max(math.exp(z[0]) - LOG_FLOOR, 0.0), max(math.exp(z[1]) - LOG_FLOOR, 0.0))


_JITTER = ((1.2, 0.8), (0.8, 1.2), (1.2, 1.2), (0.8, 0.8))


def _starts(init: Gains, restarts: int) -> list[Gains]:
    starts = [init]
    for r in range(restarts):
        f1, f2 = _JITTER[r % len(_JITTER)]
        starts.append(Gains(init.g1 * f1, init.g2 * f2))
    return starts


def mle_fit(dataset: Dataset, options: FitOptions | None = None) -> FitResult:
    """Maximize the log-likelihood over ``(g1, g2) >= 0``.

    Nelder-Mead runs in ``log(G + 1e-12)`` coordinates from the moment
    estimate and from ``options.restarts`` jittered copies of it (factors
    0.8/1.2 per component, fixed pattern). The best run is returned with
    observed-information error bars.
    """
    options = options or FitOptions()
    if len(dataset) < MIN_SAMPLES:
        raise DegenerateDatasetError(
            f"degenerate dataset: {len(dataset)} samples, need >= {MIN_SAMPLES}"
        )
    if len(dataset) >= 10:
        mi = moment_init(dataset)
        init, clamped = mi.gains, mi.clamped
    else:
        # too few points for regression; start from a balanced unit medium
        init, clamped = Gains(1.0, 1.0), (False, False)

    x, m = dataset.values, dataset.projections
    time, extra = dataset.time, detection_noise(dataset.eta)

    def negll(z):
        try:
            g1 = max(math.exp(z[0]) - LOG_FLOOR, 0.0)
            g2 = max(math.exp(z[1]) - LOG_FLOOR, 0.0)
            g, s_sq = _factor_and_width(g1, g2, time, extra)
        except OverflowError:
            return math.inf
        if not (math.isfinite(g) and math.isfinite(s_sq)) or s_sq <= 0:
            return math.inf
        val = -_backend.loglik(x, m, g, s_sq)
        return val if math.isfinite(val) else math.inf

    init_ll = -negll(_to_log(init))
    best = None
    for start in _starts(init, options.restarts):
        z0 = _to_log(start)
        simplex = np.array([z0, z0 + [0.25, 0.0], z0 + [0.0, 0.25]])
        res = minimize(
            negll, z0, method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": options.tol_param,
                "fatol": options.tol_loglik,
                "maxiter": options.max_iters,
            },
        )
        if best is None or res.fun < best.fun:
            best = res

    gains_hat = _from_log(best.x)
    loglik = log_likelihood(dataset, gains_hat)
    fe = fisher_errors(dataset, gains_hat)
    return FitResult(
        gains_hat=gains_hat,
        err=fe.as_pair(),
        loglik=loglik,
        converged=bool(best.success),
        iters=int(best.nit),
        init=init,
        clamped=clamped,
        seed=dataset.seed,
        flag=fe.flag,
        init_loglik=init_ll,
    )


def grid_search_oracle(dataset: Dataset, lo: Gains, hi: Gains, steps: int) -> Gains:
    """Brute-force argmax of the log-likelihood on a ``steps x steps`` grid.

    Nodes are ``linspace(lo, hi, steps)`` per component; ties go to the
    smaller ``g1``, then the smaller ``g2``.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not (lo.g1 < hi.g1 and lo.g2 < hi.g2):
        raise ValueError("need lo < hi componentwise")
    a = np.linspace(lo.g1, hi.g1, steps)
    b = np.linspace(lo.g2, hi.g2, steps)
    A, B = np.meshgrid(a, b, indexing="ij")
    ll = _loglik_many(dataset, A.ravel(), B.ravel())
    # argmax returns the first maximum in row-major (g1-major) order
    k = int(np.argmax(ll))
    return Gains(A.ravel()[k], B.ravel()[k])
