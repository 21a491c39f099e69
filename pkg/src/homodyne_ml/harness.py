"""Monte Carlo experiment runner: ensembles of simulate -> fit cycles.

Trial ``i`` of every sweep point uses seed ``base_seed + i``. Rows built from
fewer than 90% successful trials are marked invalid and left out of reports.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import _backend
from .channel_model import ChannelConfig, Gains, ProbeState
from .estimator import DegenerateDatasetError, FitOptions, FitResult, mle_fit
from .homodyne import GENERATOR_NAME, sample_dataset

__all__ = [
    "Sweep",
    "ExperimentConfig",
    "TrialOutcome",
    "ReportRow",
    "ExperimentReport",
    "PowerLawFit",
    "REPORT_HEADER",
    "PLOT_HEADER",
    "run_trial",
    "run_experiment",
    "run_table",
    "run_n_scaling",
    "run_eta_sweep",
    "fit_power_law",
]

REPORT_HEADER = "sweep_value,g1_true,g2_true,g1_mean,g1_std,g1_fisher,g2_mean,g2_std,g2_fisher,trials"
PLOT_HEADER = "x,y1,y1err,y2,y2err"
MIN_SUCCESS = 0.9
AXES = ("n_data", "eta", "g2")


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if list(values) != sorted(values):
            raise ValueError("sweep values must be sorted ascending")
        if self.axis == "n_data":
            values = tuple(int(v) for v in values)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ExperimentConfig:
    probe: ProbeState
    gains_true: Gains
    time: float = 1.0
    eta: float = 1.0
    n_data: int = 10_000
    n_trials: int = 50
    base_seed: int = 0
    sweep: Sweep | None = None

    def __post_init__(self):
        ChannelConfig(self.gains_true, self.time, self.eta)
        if self.n_data < 1 or self.n_trials < 1:
            raise ValueError("n_data and n_trials must be >= 1")
        if self.base_seed < 0 or self.base_seed + self.n_trials > 2**64:
            raise ValueError("seed schedule leaves the unsigned 64-bit range")

    def points(self) -> list[tuple[float, ChannelConfig, int]]:
        """``(sweep_value, channel config, n_data)`` for every row."""
        base = ChannelConfig(self.gains_true, self.time, self.eta)
        if self.sweep is None:
            return [(math.nan, base, self.n_data)]
        out = []
        for v in self.sweep.values:
            if self.sweep.axis == "n_data":
                out.append((v, base, int(v)))
            elif self.sweep.axis == "eta":
                out.append((v, replace(base, eta=v), self.n_data))
            else:
                out.append((v, replace(base, gains=Gains(self.gains_true.g1, v)), self.n_data))
        return out


class TrialOutcome(NamedTuple):
    index: int
    seed: int
    fit: FitResult | None
    error: str | None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_trial(probe: ProbeState, config: ChannelConfig, n: int, seed: int,
              options: FitOptions | None = None) -> FitResult:
    """One simulate -> fit cycle; reproducible from its arguments alone."""
    return mle_fit(sample_dataset(probe, config, n, seed), options)


def _trial_job(args) -> TrialOutcome:
    index, probe, config, n, seed, options = args
    try:
        fit = run_trial(probe, config, n, seed, options)
    except (DegenerateDatasetError, FloatingPointError, ValueError) as exc:
        return TrialOutcome(index, seed, None, str(exc))
    if not fit.converged:
        return TrialOutcome(index, seed, fit, "not converged")
    if fit.flag is not None:
        return TrialOutcome(index, seed, fit, fit.flag)
    return TrialOutcome(index, seed, fit, None)


@dataclass(frozen=True)
class ReportRow:
    sweep_value: float
    g1_true: float
    g2_true: float
    g1_mean: float
    g1_std: float
    g1_fisher: float
    g2_mean: float
    g2_std: float
    g2_fisher: float
    trials: int
    failed: int = 0
    g1_fisher_sem: float = math.nan
    g2_fisher_sem: float = math.nan

    @property
    def valid(self) -> bool:
        total = self.trials + self.failed
        return total > 0 and self.trials >= MIN_SUCCESS * total

    def csv_line(self) -> str:
        cells = [getattr(self, c) for c in REPORT_HEADER.split(",")]
        return ",".join(_fmt(c) for c in cells)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _summarize(sweep_value, config: ChannelConfig, outcomes: list[TrialOutcome]) -> ReportRow:
    good = [o.fit for o in outcomes if o.ok]
    failed = len(outcomes) - len(good)
    est = np.array([f.gains_hat.as_tuple() for f in good]).reshape(-1, 2)
    err = np.array([f.err for f in good]).reshape(-1, 2)
    k = len(good)
    mean = est.mean(axis=0) if k else np.full(2, math.nan)
    std = est.std(axis=0, ddof=1) if k > 1 else np.full(2, math.nan)
    fisher = err.mean(axis=0) if k else np.full(2, math.nan)
    fisher_sem = err.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.full(2, math.nan)
    return ReportRow(
        sweep_value=sweep_value,
        g1_true=config.gains.g1, g2_true=config.gains.g2,
        g1_mean=mean[0], g1_std=std[0], g1_fisher=fisher[0],
        g2_mean=mean[1], g2_std=std[1], g2_fisher=fisher[1],
        trials=k, failed=failed,
        g1_fisher_sem=fisher_sem[0], g2_fisher_sem=fisher_sem[1],
    )


@dataclass
class ExperimentReport:
    axis: str | None
    rows: list[ReportRow]
    provenance: dict
    summary: dict = field(default_factory=dict)
    outcomes: list[list[TrialOutcome]] = field(default_factory=list, repr=False)

    @property
    def valid_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.valid]

    @property
    def all_valid(self) -> bool:
        return all(r.valid for r in self.rows)

    def _comments(self) -> list[str]:
        lines = [f"# {k}={v}" for k, v in self.provenance.items()]
        lines += [f"# {k}={_fmt(v) if isinstance(v, (int, float)) else v}" for k, v in self.summary.items()]
        return lines

    def to_csv(self) -> str:
        lines = self._comments() + [REPORT_HEADER] + [r.csv_line() for r in self.valid_rows]
        return "\n".join(lines) + "\n"

    def plot_csv(self) -> str:
        """Plot-ready columns.

        For a gain sweep ``y`` is the mean estimate and ``yerr`` the ensemble
        standard deviation; for ``n_data``/``eta`` sweeps ``y`` is the mean
        Fisher error and ``yerr`` its standard error over trials.
        """
        lines = [PLOT_HEADER]
        for r in self.valid_rows:
            if self.axis in ("n_data", "eta"):
                cells = (r.sweep_value, r.g1_fisher, r.g1_fisher_sem, r.g2_fisher, r.g2_fisher_sem)
            else:
                cells = (r.sweep_value, r.g1_mean, r.g1_std, r.g2_mean, r.g2_std)
            lines.append(",".join(_fmt(c) for c in cells))
        return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, options: FitOptions | None = None,
                   jobs: int = 1) -> ExperimentReport:
    """Run ``n_trials`` seeded trials at every sweep point and aggregate."""
    from . import __version__

    points = config.points()
    tasks = [
        (i, config.probe, ch, n, config.base_seed + i, options)
        for _, ch, n in points
        for i in range(config.n_trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_trial_job(t) for t in tasks]

    rows, grouped = [], []
    for p, (value, ch, _) in enumerate(points):
        chunk = sorted(results[p * config.n_trials:(p + 1) * config.n_trials], key=lambda o: o.index)
        grouped.append(chunk)
        rows.append(_summarize(value, ch, chunk))
    provenance = {
        "base_seed": config.base_seed,
        "generator": GENERATOR_NAME,
        "version": __version__,
        "kernels": _backend.NAME,
        "seed_schedule": "base_seed+trial",
        "alpha_re": repr(config.probe.alpha_re),
        "alpha_im": repr(config.probe.alpha_im),
        "t": repr(config.time),
        "n_trials": config.n_trials,
    }
    if config.sweep is None or config.sweep.axis != "eta":
        provenance["eta"] = repr(config.eta)
    if config.sweep is None or config.sweep.axis != "n_data":
        provenance["n_data"] = config.n_data
    return ExperimentReport(config.sweep.axis if config.sweep else None, rows, provenance, outcomes=grouped)


def _require_axis(config: ExperimentConfig, axis: str):
    if config.sweep is None or config.sweep.axis != axis:
        raise ValueError(f"config needs a sweep over {axis!r}")


def run_table(config: ExperimentConfig, options: FitOptions | None = None, jobs: int = 1) -> ExperimentReport:
    """Estimates versus true ``g2`` at fixed ``g1``."""
    _require_axis(config, "g2")
    return run_experiment(config, options, jobs)


class PowerLawFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_power_law(points) -> PowerLawFit:
    """Least-squares line through ``(log n, log err)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (n, err) points")
    if np.any(~np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("power-law fit needs positive finite values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(res.slope), float(res.intercept), r2)


def run_n_scaling(config: ExperimentConfig, options: FitOptions | None = None,
                  jobs: int = 1) -> tuple[ExperimentReport, dict[str, PowerLawFit]]:
    """Mean Fisher error versus sample size, with the fitted log-log slope."""
    _require_axis(config, "n_data")
    ns = config.sweep.values
    if len(ns) < 4 or math.log10(ns[-1] / ns[0]) < 1.5:
        raise ValueError("scaling sweep needs >= 4 points spanning >= 1.5 decades")
    report = run_experiment(config, options, jobs)
    rows = report.valid_rows
    fits = {}
    if len(rows) >= 3:
        fits["g1"] = fit_power_law([(r.sweep_value, r.g1_fisher) for r in rows])
        fits["g2"] = fit_power_law([(r.sweep_value, r.g2_fisher) for r in rows])
        for name, f in fits.items():
            report.summary[f"slope_{name}"] = f.slope
            report.summary[f"r2_{name}"] = f.r2
    return report, fits


def run_eta_sweep(config: ExperimentConfig, options: FitOptions | None = None,
                  jobs: int = 1) -> ExperimentReport:
    """Mean Fisher error versus detector efficiency at fixed sample size."""
    _require_axis(config, "eta")
    if any(not 0 < v <= 1 for v in config.sweep.values):
        raise ValueError("eta values must lie in (0, 1]")
    report = run_experiment(config, options, jobs)
    rows = report.valid_rows
    if len(rows) >= 3:
        etas = [r.sweep_value for r in rows]
        for name in ("g1", "g2"):
            rho = stats.spearmanr(etas, [getattr(r, f"{name}_fisher") for r in rows]).statistic
            report.summary[f"spearman_{name}"] = float(rho)
    return report
