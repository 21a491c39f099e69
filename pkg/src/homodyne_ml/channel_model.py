"""Closed-form Gaussian channel for a coherent probe in a linear active medium.

A medium with absorption rate ``g1`` and amplification rate ``g2`` acts on the
Wigner function of the signal mode as a Gaussian convolution: the amplitude is
rescaled by ``g = exp(-Q t)`` with ``Q = (g1 - g2) / 2`` and Gaussian noise of
variance ``delta_sq = (g1 + g2) (1 - g**2) / (4 Q)`` is added.

Quadrature convention
---------------------
``x = Re(alpha)``. A coherent state has quadrature variance 1/4, so its
Wigner function is ``(2/pi) exp(-2 |beta - alpha0|**2)``. Every width in
this package (``s_sq`` etc.) follows this convention; other references
differ by a factor of 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gains",
    "ProbeState",
    "ChannelConfig",
    "DerivedChannel",
    "ChannelInversion",
    "SERIES_THRESHOLD",
    "derive_channel",
    "propagation_gain",
    "gains_from_atoms",
    "output_wigner",
    "invert_channel",
    "detection_noise",
    "noise_per_time",
]

#: Below this value of ``|Q t|`` the noise factor uses its Taylor series.
SERIES_THRESHOLD = 1e-6


def _check_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Gains:
    """Absorption (``g1``) and amplification (``g2``) rates of the medium."""

    g1: float
    g2: float

    def __post_init__(self):
        for name in ("g1", "g2"):
            value = float(getattr(self, name))
            _check_finite(name, value)
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[float, float]:
        return (self.g1, self.g2)


@dataclass(frozen=True)
class ProbeState:
    """Coherent probe with complex amplitude ``alpha_re + i alpha_im``."""

    alpha_re: float
    alpha_im: float = 0.0

    def __post_init__(self):
        for name in ("alpha_re", "alpha_im"):
            value = float(getattr(self, name))
            _check_finite(name, value)
            object.__setattr__(self, name, value)

    @classmethod
    def from_complex(cls, alpha: complex) -> "ProbeState":
        return cls(alpha.real, alpha.imag)

    @property
    def amplitude(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)


@dataclass(frozen=True)
class ChannelConfig:
    """Medium gains plus the known interaction time and detector efficiency."""

    gains: Gains
    time: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        time = float(self.time)
        eta = float(self.eta)
        _check_finite("time", time)
        if time < 0:
            raise ValueError(f"time must be >= 0, got {time!r}")
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "eta", eta)

    def derived(self) -> "DerivedChannel":
        return derive_channel(self.gains, self.time)


@dataclass(frozen=True)
class DerivedChannel:
    """Channel descriptors at a fixed interaction time.

    Attributes
    ----------
    q : float
        Decay rate ``(g1 - g2) / 2``. Positive in the absorbing regime.
    g : float
        Amplitude factor ``exp(-q t)``.
    delta_sq : float
        Variance of the added Gaussian noise.
    s_sq : float
        ``delta_sq + g**2 / 2``, the width parameter of the output Wigner
        function (before detector losses).
    gain_factor : float
        Intensity gain ``exp((g2 - g1) t)``, equal to ``g**2``.
    """

    q: float
    g: float
    delta_sq: float
    s_sq: float
    gain_factor: float


def noise_per_time(q: float, time: float) -> float:
    """Return ``(1 - exp(-2 q t)) / (4 q)``, continuous through ``q = 0``.

    ``delta_sq`` is ``(g1 + g2)`` times this factor.
    """
    x = q * time
    if abs(x) < SERIES_THRESHOLD:
        return 0.5 * time * (1.0 - x + (2.0 / 3.0) * x * x)
    return -math.expm1(-2.0 * x) / (4.0 * q)


def derive_channel(gains: Gains, time: float) -> DerivedChannel:
    """Evaluate ``Q``, ``g``, ``delta_sq`` and the propagation gain."""
    time = float(time)
    if not time >= 0:
        raise ValueError(f"time must be >= 0, got {time!r}")
    q = 0.5 * (gains.g1 - gains.g2)
    g = math.exp(-q * time)
    delta_sq = (gains.g1 + gains.g2) * noise_per_time(q, time)
    return DerivedChannel(
        q=q,
        g=g,
        delta_sq=delta_sq,
        s_sq=delta_sq + 0.5 * g * g,
        gain_factor=math.exp((gains.g2 - gains.g1) * time),
    )


def propagation_gain(gains: Gains, time: float) -> float:
    return math.exp((gains.g2 - gains.g1) * float(time))


def gains_from_atoms(gamma: float, n1: float, n2: float) -> Gains:
    """Gains of a medium of two-level atoms: ``g1 = gamma n1``, ``g2 = gamma n2``.

    ``n1`` and ``n2`` are the populations of the lower and upper level and
    ``gamma`` is a rate of the order of the atomic linewidth.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    if n1 < 0 or n2 < 0:
        raise ValueError("atomic populations must be >= 0")
    return Gains(gamma * n1, gamma * n2)


def output_wigner(probe: ProbeState, channel: DerivedChannel, re, im):
    """Output Wigner function at ``alpha = re + i im``.

    A Gaussian centred at ``g alpha0`` with width parameter ``s_sq``.
    Accepts scalars or broadcastable arrays.
    """
    s_sq = channel.s_sq
    dre = np.asarray(re, dtype=float) - channel.g * probe.alpha_re
    dim = np.asarray(im, dtype=float) - channel.g * probe.alpha_im
    out = np.exp(-(dre * dre + dim * dim) / s_sq) / (math.pi * s_sq)
    return out if out.ndim else float(out)


def detection_noise(eta: float) -> float:
    """Extra width ``(1 - eta) / (2 eta)`` added by a detector of efficiency eta."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    return (1.0 - eta) / (2.0 * eta)


@dataclass(frozen=True)
class ChannelInversion:
    """Gains recovered from observed ``(g, s_sq)`` with boundary-clamp flags."""

    gains: Gains
    delta_sq: float
    clamped_g1: bool = False
    clamped_g2: bool = False
    nonphysical: bool = False

    @property
    def clamped(self) -> tuple[bool, bool]:
        return (self.clamped_g1, self.clamped_g2)


def invert_channel(g_obs: float, s_sq_obs: float, time: float, eta: float) -> ChannelInversion:
    """Map an observed amplitude factor and total width back to gains.

    ``s_sq_obs`` includes the detector term. Moments that imply negative noise
    or negative rates are clamped to the physical boundary and flagged instead
    of raising, so the result is always a usable starting point.
    """
    if not g_obs > 0:
        raise ValueError(f"g_obs must be > 0, got {g_obs!r}")
    if not time > 0:
        raise ValueError(f"time must be > 0, got {time!r}")
    delta_sq = s_sq_obs - 0.5 * g_obs * g_obs - detection_noise(eta)
    nonphysical = delta_sq < 0
    if nonphysical:
        delta_sq = 0.0
    q = -math.log(g_obs) / time
    total = delta_sq / noise_per_time(q, time)
    diff = 2.0 * q
    g1 = 0.5 * (total + diff)
    g2 = 0.5 * (total - diff)
    return ChannelInversion(
        gains=Gains(max(g1, 0.0), max(g2, 0.0)),
        delta_sq=delta_sq,
        clamped_g1=g1 < 0,
        clamped_g2=g2 < 0,
        nonphysical=nonphysical,
    )
