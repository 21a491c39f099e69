import os
import subprocess
import sys

import pytest

from homodyne_ml.cli import main
from homodyne_ml.estimator import FitResult
from homodyne_ml.harness import REPORT_HEADER


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


SIM = ["simulate", "--g1", "3", "--g2", "1", "--alpha", "4", "--eta", "0.6", "--t", "1",
       "--n", "100", "--seed", "7", "--out", "d.csv"]


def test_simulate_then_estimate(workdir, capsys):
    assert main(SIM) == 0
    assert main(["estimate", "d.csv"]) == 0
    block = FitResult.parse_block(capsys.readouterr().out)
    assert block["seed"] == "7" and block["converged"] == "true"
    assert main(["estimate", "d.csv", "--out", "fit.txt"]) == 0
    assert (workdir / "fit.txt").read_text().startswith("g1_hat=")


def test_simulate_is_byte_identical(workdir):
    main(SIM)
    first = (workdir / "d.csv").read_bytes()
    main(SIM)
    assert (workdir / "d.csv").read_bytes() == first


def test_estimate_missing_header(workdir, capsys):
    main(SIM)
    lines = (workdir / "d.csv").read_text().splitlines()
    (workdir / "bad.csv").write_text("\n".join(l for l in lines if l != "phase,value") + "\n")
    assert main(["estimate", "bad.csv"]) == 2
    err = capsys.readouterr().err
    assert "bad.csv:8" in err and "phase,value" in err


def test_estimate_missing_file(workdir):
    assert main(["estimate", "nope.csv"]) == 2


def test_estimate_degenerate(workdir):
    (workdir / "d.csv").write_text("# alpha_re=4\n# t=1\n# eta=1\nphase,value\n0.1,1.0\n")
    assert main(["estimate", "d.csv"]) == 2


def test_usage_errors(workdir, capsys):
    assert main(["simulate", "--g1", "3"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--bogus", "1"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["table", "--trials", "many"])
    assert exc.value.code == 1
    assert main(["simulate", "--g1", "-3", "--g2", "1", "--out", "x.csv"]) == 1
    assert not (workdir / "x.csv").exists()


def test_config_file_overridden_by_flags(workdir):
    (workdir / "run.cfg").write_text("g1 = 3\ng2=1\nalpha=4\neta=0.6\nn=50\nseed=9  # comment\nout=a.csv\n")
    assert main(["simulate", "--config", "run.cfg"]) == 0
    assert "# seed=9" in (workdir / "a.csv").read_text()
    assert main(["simulate", "--config", "run.cfg", "--seed", "10", "--out", "b.csv"]) == 0
    text = (workdir / "b.csv").read_text()
    assert "# seed=10" in text and "# n=50" in text


def test_config_file_errors(workdir):
    (workdir / "bad.cfg").write_text("g1=3\ncolour=blue\n")
    assert main(["simulate", "--config", "bad.cfg"]) == 1
    assert main(["simulate", "--config", "missing.cfg"]) == 1


def test_table_deterministic(workdir):
    args = ["table", "--trials", "3", "--n", "500", "--seed", "1", "--g2-values", "1,3"]
    assert main(args + ["--out", "t1.csv"]) == 0
    assert main(args + ["--out", "t2.csv", "--jobs", "2"]) == 0
    assert (workdir / "t1.csv").read_bytes() == (workdir / "t2.csv").read_bytes()
    assert (workdir / "t1_plot.csv").read_bytes() == (workdir / "t2_plot.csv").read_bytes()
    assert REPORT_HEADER in (workdir / "t1.csv").read_text()


def test_scaling_and_eta_commands(workdir, capsys):
    assert main(["scaling", "--trials", "2", "--n-values", "200,500,1000,3000,10000", "--out", "s.csv"]) == 0
    assert "slope_g1=" in capsys.readouterr().out
    assert "# slope_g1=" in (workdir / "s.csv").read_text()
    assert (workdir / "s_plot.csv").read_text().startswith("x,y1,y1err,y2,y2err\n")
    assert main(["eta-sweep", "--trials", "2", "--n", "500", "--eta-values", "0.5,1.0",
                 "--out", "e.csv", "--plot-out", "ep.csv"]) == 0
    assert (workdir / "ep.csv").exists()


def test_fit_failure_exit_code(workdir):
    rc = main(["table", "--trials", "2", "--n", "200", "--g2-values", "1", "--max-iters", "1",
               "--restarts", "0", "--out", "f.csv"])
    assert rc == 3
    lines = (workdir / "f.csv").read_text().splitlines()
    assert lines[-1] == REPORT_HEADER


def test_no_temporary_files_left(workdir):
    main(SIM)
    main(["table", "--trials", "2", "--n", "300", "--g2-values", "1", "--out", "t.csv"])
    assert sorted(os.listdir(workdir)) == ["d.csv", "t.csv", "t_plot.csv"]


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "homodyne_ml", *SIM], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (workdir / "d.csv").exists()
