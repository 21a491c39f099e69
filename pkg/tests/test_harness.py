import math

import numpy as np
import pytest

from homodyne_ml.channel_model import Gains, ProbeState
from homodyne_ml.harness import (
    PLOT_HEADER,
    REPORT_HEADER,
    ExperimentConfig,
    ReportRow,
    Sweep,
    fit_power_law,
    run_eta_sweep,
    run_experiment,
    run_n_scaling,
    run_table,
    run_trial,
)


def small_table(trials=5, n=2000, seed=0):
    return ExperimentConfig(
        probe=ProbeState(4.0), gains_true=Gains(3.0, 1.0), time=1.0, eta=0.6,
        n_data=n, n_trials=trials, base_seed=seed, sweep=Sweep("g2", (1.0, 5.0)),
    )


# -- power-law fit ----------------------------------------------------------

def test_power_law_exact():
    fit = fit_power_law([(10, 1), (100, 0.316227766), (1000, 0.1)])
    assert fit.slope == pytest.approx(-0.5, abs=1e-9)


def test_power_law_flat():
    fit = fit_power_law([(1, 2.5), (2, 2.5), (4, 2.5)])
    assert fit.slope == 0.0


def test_power_law_synthetic_rows():
    ns = [1e3, 3e3, 1e4, 3e4, 1e5]
    fit = fit_power_law([(n, 0.7 * n**-0.5) for n in ns])
    assert fit.slope == pytest.approx(-0.5, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(0.7), abs=1e-9)
    assert 1 - fit.r2 < 1e-9


def test_power_law_perturbed():
    rng = np.random.default_rng(0)
    ns = np.array([1e3, 3e3, 1e4, 3e4, 1e5])
    for _ in range(200):
        err = ns**-0.5 * (1 + rng.uniform(-0.01, 0.01, ns.size))
        assert abs(fit_power_law(zip(ns, err)).slope + 0.5) < 0.02


@pytest.mark.parametrize("pts", [[(1, 1), (2, 0)], [(1, 1), (2, -1), (3, 1)], [(0, 1), (2, 1), (3, 1)]])
def test_power_law_rejects(pts):
    with pytest.raises(ValueError):
        fit_power_law(pts)


# -- configs ----------------------------------------------------------------

def test_sweep_validation():
    with pytest.raises(ValueError):
        Sweep("g2", ())
    with pytest.raises(ValueError):
        Sweep("g2", (2, 1))
    with pytest.raises(ValueError):
        Sweep("time", (1, 2))
    assert Sweep("n_data", (1e3, 1e4)).values == (1000, 10000)


def test_points_follow_axis():
    cfg = small_table()
    pts = cfg.points()
    assert [p[1].gains for p in pts] == [Gains(3, 1), Gains(3, 5)]
    eta_cfg = ExperimentConfig(ProbeState(8.0), Gains(2, 1), sweep=Sweep("eta", (0.5, 1.0)), n_data=10)
    assert [p[1].eta for p in eta_cfg.points()] == [0.5, 1.0]


# -- runs -------------------------------------------------------------------

def test_table_rows():
    report = run_table(small_table())
    assert [r.sweep_value for r in report.rows] == [1.0, 5.0]
    assert all(r.trials == 5 and r.valid for r in report.rows)
    for r in report.rows:
        assert abs(r.g1_mean - r.g1_true) < 5 * r.g1_std
        assert r.g1_fisher > 0 and r.g2_fisher > 0


def test_table_requires_g2_sweep():
    cfg = ExperimentConfig(ProbeState(4.0), Gains(3, 1), n_data=100, n_trials=1)
    with pytest.raises(ValueError):
        run_table(cfg)


def test_degenerate_tiny_run():
    cfg = ExperimentConfig(ProbeState(4.0), Gains(3, 1), eta=0.6, n_data=10, n_trials=1,
                           sweep=Sweep("g2", (1.0,)))
    report = run_table(cfg)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.trials + row.failed == 1
    report.to_csv()
    report.plot_csv()


def test_single_trial_replays_from_provenance():
    cfg = small_table(trials=4, seed=100)
    report = run_table(cfg)
    base = report.provenance["base_seed"]
    for p, (value, ch, n) in enumerate(cfg.points()):
        for i, outcome in enumerate(report.outcomes[p]):
            assert outcome.seed == base + i
        replay = run_trial(cfg.probe, ch, n, base + 2)
        assert replay == report.outcomes[p][2].fit


def test_parallel_matches_sequential():
    cfg = small_table(trials=4)
    assert run_table(cfg, jobs=2).to_csv() == run_table(cfg, jobs=1).to_csv()


def test_report_csv_layout():
    report = run_table(small_table(trials=3))
    lines = report.to_csv().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# base_seed=") for ln in comments)
    assert any(ln == "# generator=PCG64" for ln in comments)
    assert any(ln.startswith("# version=") for ln in comments)
    body = lines[len(comments):]
    assert body[0] == REPORT_HEADER
    assert len(body) == 3
    assert report.plot_csv().splitlines()[0] == PLOT_HEADER


def test_invalid_rows_dropped():
    ok = ReportRow(1.0, 3, 1, 3, 0.1, 0.1, 1, 0.1, 0.1, trials=9, failed=1)
    bad = ReportRow(2.0, 3, 2, 3, 0.1, 0.1, 2, 0.1, 0.1, trials=8, failed=2)
    assert ok.valid and not bad.valid
    from homodyne_ml.harness import ExperimentReport
    rep = ExperimentReport("g2", [ok, bad], {"base_seed": 0})
    assert rep.valid_rows == [ok] and not rep.all_valid
    assert len(rep.to_csv().splitlines()) == 3


def test_failed_trials_counted():
    from homodyne_ml.estimator import FitOptions
    report = run_table(small_table(trials=3, n=500), options=FitOptions(max_iters=1, restarts=0))
    assert all(r.failed == 3 and not r.valid for r in report.rows)
    assert report.valid_rows == []


def _scaling_cfg(seed, trials=8):
    return ExperimentConfig(
        probe=ProbeState(5.0), gains_true=Gains(3, 5), eta=0.6, n_trials=trials, base_seed=seed,
        sweep=Sweep("n_data", (1000, 3000, 10_000, 30_000, 100_000)),
    )


def test_scaling_slope_stable_across_seed_ranges():
    _, a = run_n_scaling(_scaling_cfg(0))
    _, b = run_n_scaling(_scaling_cfg(1000))
    for name in ("g1", "g2"):
        assert abs(a[name].slope - b[name].slope) < 0.1


def test_scaling_preconditions():
    cfg = ExperimentConfig(ProbeState(5.0), Gains(3, 5), n_trials=1, sweep=Sweep("n_data", (100, 200, 400, 800)))
    with pytest.raises(ValueError):
        run_n_scaling(cfg)


def test_eta_sweep_best_at_unit_efficiency():
    cfg = ExperimentConfig(ProbeState(8.0), Gains(2, 1), n_data=2000, n_trials=5,
                           sweep=Sweep("eta", (0.3, 0.6, 1.0)))
    report = run_eta_sweep(cfg)
    last = report.rows[-1]
    assert math.isfinite(last.g1_fisher) and math.isfinite(last.g2_fisher)
    assert last.g1_fisher == min(r.g1_fisher for r in report.rows)
    assert last.g2_fisher == min(r.g2_fisher for r in report.rows)
    assert report.summary["spearman_g1"] <= -0.5


def test_eta_sweep_rejects_out_of_range():
    cfg = ExperimentConfig(ProbeState(8.0), Gains(2, 1), n_data=10, n_trials=1,
                           sweep=Sweep("eta", (0.0, 0.5)))
    with pytest.raises(ValueError):
        run_eta_sweep(cfg)


def test_experiment_without_sweep():
    cfg = ExperimentConfig(ProbeState(4.0), Gains(3, 1), eta=0.6, n_data=1000, n_trials=3)
    report = run_experiment(cfg)
    assert len(report.rows) == 1 and math.isnan(report.rows[0].sweep_value)
