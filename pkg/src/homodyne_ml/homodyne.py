"""Random-phase homodyne statistics of the channel output.

The homodyne outcome ``x`` at local-oscillator phase ``phi`` is Gaussian with
mean ``g Re(alpha0 exp(-i phi))`` and variance ``s**2 / 2``, where
``s**2 = delta_sq + g**2/2 + (1 - eta) / (2 eta)``.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .channel_model import (
    ChannelConfig,
    DerivedChannel,
    Gains,
    ProbeState,
    derive_channel,
    detection_noise,
    output_wigner,
)

__all__ = [
    "GENERATOR_NAME",
    "QuadratureSample",
    "Dataset",
    "DatasetFormatError",
    "QuadratureError",
    "total_variance_param",
    "quadrature_mean",
    "homodyne_pdf",
    "homodyne_logpdf",
    "sample_dataset",
    "wigner_marginal_numeric",
    "write_dataset_csv",
    "read_dataset_csv",
    "format_dataset_csv",
    "parse_dataset_csv",
]

GENERATOR_NAME = "PCG64"


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested accuracy."""


class DatasetFormatError(ValueError):
    """Malformed dataset CSV."""


def total_variance_param(channel: DerivedChannel, eta: float) -> float:
    """Width parameter ``s**2`` of the measured homodyne distribution."""
    return channel.delta_sq + 0.5 * channel.g * channel.g + detection_noise(eta)


def quadrature_mean(phi, probe: ProbeState, g: float):
    """``g Re(alpha0 exp(-i phi))``."""
    phi = np.asarray(phi, dtype=float)
    return g * (probe.alpha_re * np.cos(phi) + probe.alpha_im * np.sin(phi))


def homodyne_logpdf(x, phi, probe: ProbeState, gains: Gains, time: float, eta: float):
    """Log of :func:`homodyne_pdf`, evaluated directly so tails never underflow."""
    ch = derive_channel(gains, time)
    s_sq = total_variance_param(ch, eta)
    r = np.asarray(x, dtype=float) - quadrature_mean(phi, probe, ch.g)
    out = -0.5 * math.log(math.pi * s_sq) - r * r / s_sq
    return out if np.ndim(out) else float(out)


def homodyne_pdf(x, phi, probe: ProbeState, gains: Gains, time: float, eta: float):
    """Probability density of outcome ``x`` at phase ``phi``.

    Parameters
    ----------
    x, phi : float or array_like
        Homodyne outcome and local-oscillator phase (radians); broadcast.
    probe : ProbeState
        Input coherent amplitude.
    gains : Gains
        Medium absorption/amplification rates.
    time, eta : float
        Interaction time and detector quantum efficiency.
    """
    ch = derive_channel(gains, time)
    s_sq = total_variance_param(ch, eta)
    r = np.asarray(x, dtype=float) - quadrature_mean(phi, probe, ch.g)
    out = np.exp(-r * r / s_sq) / math.sqrt(math.pi * s_sq)
    return out if np.ndim(out) else float(out)


class QuadratureSample(NamedTuple):
    phase: float
    value: float


@dataclass(eq=False)
class Dataset:
    """Homodyne record: ``phases[k]`` and outcomes ``values[k]``.

    The medium gains are the unknown, so only the known settings (probe,
    ``time``, ``eta``) travel with the data. ``true_gains`` is kept for
    simulated data but never serialized.
    """

    phases: np.ndarray
    values: np.ndarray
    probe: ProbeState
    time: float
    eta: float
    seed: int = 0
    generator: str = GENERATOR_NAME
    true_gains: Gains | None = field(default=None, compare=False)

    def __post_init__(self):
        phases = np.ascontiguousarray(self.phases, dtype=np.float64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if phases.ndim != 1 or phases.shape != values.shape:
            raise ValueError("phases and values must be 1-D arrays of equal length")
        if phases.size < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(phases))):
            raise ValueError("samples must be finite")
        if np.any(phases < 0) or np.any(phases >= math.pi):
            raise ValueError("phases must lie in [0, pi)")
        # validates time and eta
        ChannelConfig(Gains(0.0, 0.0), self.time, self.eta)
        phases.setflags(write=False)
        values.setflags(write=False)
        self.phases = phases
        self.values = values
        self.time = float(self.time)
        self.eta = float(self.eta)
        self.seed = int(self.seed)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def __iter__(self) -> Iterator[QuadratureSample]:
        for p, v in zip(self.phases.tolist(), self.values.tolist()):
            yield QuadratureSample(p, v)

    @cached_property
    def projections(self) -> np.ndarray:
        """``Re(alpha0 exp(-i phi_k))``; the mean of ``x_k`` is ``g`` times this."""
        m = np.ascontiguousarray(quadrature_mean(self.phases, self.probe, 1.0))
        m.setflags(write=False)
        return m

    def same_settings(self, other: "Dataset") -> bool:
        return (self.probe, self.time, self.eta) == (other.probe, other.time, other.eta)

    def concat(self, other: "Dataset") -> "Dataset":
        if not self.same_settings(other):
            raise ValueError("datasets have different probe/time/eta")
        return Dataset(
            np.concatenate([self.phases, other.phases]),
            np.concatenate([self.values, other.values]),
            self.probe, self.time, self.eta, self.seed, self.generator, self.true_gains,
        )

    def subset(self, index) -> "Dataset":
        return Dataset(
            self.phases[index], self.values[index],
            self.probe, self.time, self.eta, self.seed, self.generator, self.true_gains,
        )


def sample_dataset(
    probe: ProbeState,
    config: ChannelConfig,
    n: int,
    seed: int,
    fixed_phase: float | None = None,
) -> Dataset:
    """Simulate ``n`` homodyne outcomes at i.i.d. uniform phases in ``[0, pi)``.

    Each sample consumes three uniforms from a PCG64 stream seeded with
    ``seed``: one for the phase and two for a Box-Muller normal. No rejection
    step is involved, so the stream position is a fixed function of ``n`` and
    replay is exact. ``fixed_phase`` pins every phase (the uniform is still
    drawn and discarded).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((n, 3))
    if fixed_phase is None:
        phases = math.pi * u[:, 0]
        phases[phases >= math.pi] = np.nextafter(math.pi, 0.0)
    else:
        phases = np.full(n, float(fixed_phase))
    z = np.sqrt(-2.0 * np.log1p(-u[:, 1])) * np.cos(2.0 * math.pi * u[:, 2])
    ch = config.derived()
    s_sq = total_variance_param(ch, config.eta)
    values = quadrature_mean(phases, probe, ch.g) + math.sqrt(0.5 * s_sq) * z
    return Dataset(phases, values, probe, config.time, config.eta, seed, GENERATOR_NAME, config.gains)


# -- quadrature oracle ------------------------------------------------------

_GL_START = 201
_GL_MAX = 201 * 2**4
_GL_CHANGE = 1e-9
_GL_FAIL = 1e-8


def _gauss_legendre(func, a, b, what):
    """Integrate ``func`` (vectorized over nodes) on ``[a, b]``.

    Doubles the node count from 201 until successive results change by less
    than 1e-9. Raises :class:`QuadratureError` if the last change exceeds 1e-8.
    """
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    n = _GL_START
    prev = None
    while True:
        t, w = leggauss(n)
        val = half * np.dot(w, func(mid + half * t))
        if prev is not None:
            change = np.max(np.abs(val - prev))
            if change < _GL_CHANGE:
                return val
            if n >= _GL_MAX:
                if change > _GL_FAIL:
                    raise QuadratureError(f"{what}: change {change:.3g} after {n} nodes")
                return val
        prev = val
        n *= 2


def _lossless_marginal(probe, channel, phi, xs):
    """Integrate the rotated output Wigner function over Im(alpha)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    rot = complex(math.cos(phi), math.sin(phi))
    centre = channel.g * probe.amplitude / rot
    sigma = math.sqrt(0.5 * channel.s_sq)
    lo, hi = centre.imag - 8 * sigma, centre.imag + 8 * sigma

    def integrand(ys):
        alpha = (xs[None, :] + 1j * ys[:, None]) * rot
        return output_wigner(probe, channel, alpha.real, alpha.imag)

    # dot(w, f) contracts over the node axis
    return _gauss_legendre(integrand, lo, hi, "Wigner marginal"), centre.real, sigma


def wigner_marginal_numeric(probe: ProbeState, channel: DerivedChannel, eta: float, phi: float, x: float) -> float:
    """Homodyne density recomputed by quadrature from the output Wigner function.

    The line integral over ``Im(alpha)`` gives the ideal-detector marginal;
    detector inefficiency is then applied as a convolution with a Gaussian of
    variance ``(1 - eta) / (4 eta)``. Independent check of :func:`homodyne_pdf`.
    """
    x = float(x)
    phi = float(phi)
    noise_var = 0.5 * detection_noise(eta)
    if noise_var == 0.0:
        val, _, _ = _lossless_marginal(probe, channel, phi, [x])
        return float(max(val[0], 0.0))

    _, centre, sigma = _lossless_marginal(probe, channel, phi, [x])
    kern_sd = math.sqrt(noise_var)
    lo = max(x - 8 * kern_sd, centre - 8 * sigma)
    hi = min(x + 8 * kern_sd, centre + 8 * sigma)
    if lo >= hi:
        return 0.0

    def integrand(xp):
        marg, _, _ = _lossless_marginal(probe, channel, phi, xp)
        d = x - xp
        return marg * np.exp(-0.5 * d * d / noise_var) / math.sqrt(2 * math.pi * noise_var)

    return float(max(_gauss_legendre(integrand, lo, hi, "detector convolution"), 0.0))


# -- CSV --------------------------------------------------------------------

_META_KEYS = ("alpha_re", "alpha_im", "t", "eta", "n", "seed", "generator")


def format_dataset_csv(dataset: Dataset) -> str:
    meta = {
        "alpha_re": repr(dataset.probe.alpha_re),
        "alpha_im": repr(dataset.probe.alpha_im),
        "t": repr(dataset.time),
        "eta": repr(dataset.eta),
        "n": str(dataset.n),
        "seed": str(dataset.seed),
        "generator": dataset.generator,
    }
    lines = [f"# {k}={meta[k]}" for k in _META_KEYS]
    lines.append("phase,value")
    # repr gives the shortest string that round-trips exactly
    lines.extend(f"{p!r},{v!r}" for p, v in zip(dataset.phases.tolist(), dataset.values.tolist()))
    return "\n".join(lines) + "\n"


def parse_dataset_csv(text: str, source: str = "<string>") -> Dataset:
    meta: dict[str, str] = {}
    phases: list[float] = []
    values: list[float] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header_seen:
                raise DatasetFormatError(f"{source}:{lineno}: metadata after header")
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise DatasetFormatError(f"{source}:{lineno}: expected '# key=value'")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["phase", "value"]:
                raise DatasetFormatError(
                    f"{source}:{lineno}: expected header 'phase,value', got {line!r}"
                )
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise DatasetFormatError(f"{source}:{lineno}: expected 2 columns, got {len(cells)}")
        try:
            phases.append(float(cells[0]))
            values.append(float(cells[1]))
        except ValueError:
            raise DatasetFormatError(f"{source}:{lineno}: non-numeric value {line!r}") from None
    if not header_seen:
        raise DatasetFormatError(f"{source}: missing header 'phase,value'")
    missing = [k for k in ("alpha_re", "t", "eta") if k not in meta]
    if missing:
        raise DatasetFormatError(f"{source}: missing metadata {', '.join(missing)}")
    try:
        probe = ProbeState(float(meta["alpha_re"]), float(meta.get("alpha_im", 0.0)))
        time = float(meta["t"])
        eta = float(meta["eta"])
        seed = int(meta.get("seed", 0))
        if "n" in meta and int(meta["n"]) != len(values):
            raise DatasetFormatError(f"{source}: n={meta['n']} but {len(values)} rows")
        return Dataset(
            np.array(phases), np.array(values), probe, time, eta, seed,
            meta.get("generator", GENERATOR_NAME),
        )
    except DatasetFormatError:
        raise
    except ValueError as exc:
        raise DatasetFormatError(f"{source}: {exc}") from None


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_dataset_csv(dataset: Dataset, path) -> None:
    atomic_write_text(path, format_dataset_csv(dataset))


def read_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        return parse_dataset_csv(fh.read(), source=os.fspath(path))
