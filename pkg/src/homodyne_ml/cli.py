"""Command-line entry point.

Subcommands: ``simulate``, ``estimate``, ``table``, ``scaling``, ``eta-sweep``.
Every option can also come from ``--config FILE`` (``key=value`` lines, keys
are option names without leading dashes); flags override the file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 too many failed fits.
"""
from __future__ import annotations

import argparse
import os
import sys

from .channel_model import ChannelConfig, Gains, ProbeState
from .estimator import DegenerateDatasetError, FitOptions, mle_fit
from .harness import ExperimentConfig, Sweep, run_eta_sweep, run_n_scaling, run_table
from .homodyne import DatasetFormatError, atomic_write_text, read_dataset_csv, sample_dataset, write_dataset_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# name -> (type, help)
OPTIONS = {
    "g1": (float, "absorption rate G1"),
    "g2": (float, "amplification rate G2"),
    "alpha": (float, "real part of the probe amplitude"),
    "alpha_im": (float, "imaginary part of the probe amplitude"),
    "eta": (float, "detector quantum efficiency in (0, 1]"),
    "t": (float, "effective interaction time"),
    "n": (int, "number of homodyne samples"),
    "seed": (int, "RNG seed (base seed for ensembles)"),
    "trials": (int, "Monte Carlo trials per sweep point"),
    "g2_values": (_float_list, "comma-separated G2 sweep"),
    "n_values": (_int_list, "comma-separated sample-size sweep"),
    "eta_values": (_float_list, "comma-separated efficiency sweep"),
    "restarts": (int, "jittered optimizer restarts"),
    "max_iters": (int, "optimizer iteration budget"),
    "jobs": (int, "worker processes for ensemble trials"),
    "out": (str, "output file"),
    "plot_out": (str, "plot-data output file (default: <out>_plot.csv)"),
}

DEFAULTS = {
    "simulate": {"alpha": 4.0, "alpha_im": 0.0, "eta": 1.0, "t": 1.0, "n": 10_000, "seed": 0},
    "estimate": {"restarts": 3, "max_iters": 2000},
    "table": {
        "g1": 3.0, "g2_values": [1.0, 2.0, 3.0, 4.0, 5.0], "alpha": 4.0, "alpha_im": 0.0,
        "eta": 0.6, "t": 1.0, "n": 10_000, "trials": 50, "seed": 0, "jobs": 1,
        "restarts": 3, "max_iters": 2000, "out": "table.csv",
    },
    "scaling": {
        "g1": 3.0, "g2": 5.0, "alpha": 5.0, "alpha_im": 0.0, "eta": 0.6, "t": 1.0,
        "n_values": [1000, 3000, 10_000, 30_000, 100_000], "trials": 20, "seed": 0, "jobs": 1,
        "restarts": 3, "max_iters": 2000, "out": "scaling.csv",
    },
    "eta-sweep": {
        "g1": 2.0, "g2": 1.0, "alpha": 8.0, "alpha_im": 0.0, "t": 1.0, "n": 5000,
        "eta_values": [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0], "trials": 20, "seed": 0, "jobs": 1,
        "restarts": 3, "max_iters": 2000, "out": "eta_sweep.csv",
    },
}

COMMAND_OPTIONS = {
    "simulate": ["g1", "g2", "alpha", "alpha_im", "eta", "t", "n", "seed", "out"],
    "estimate": ["restarts", "max_iters", "out"],
    "table": ["g1", "g2_values", "alpha", "alpha_im", "eta", "t", "n", "trials", "seed",
              "restarts", "max_iters", "jobs", "out", "plot_out"],
    "scaling": ["g1", "g2", "alpha", "alpha_im", "eta", "t", "n_values", "trials", "seed",
                "restarts", "max_iters", "jobs", "out", "plot_out"],
    "eta-sweep": ["g1", "g2", "alpha", "alpha_im", "t", "n", "eta_values", "trials", "seed",
                  "restarts", "max_iters", "jobs", "out", "plot_out"],
}

REQUIRED = {"simulate": ["g1", "g2", "out"]}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="homodyne-ml", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "simulate a homodyne dataset and write it as CSV",
        "estimate": "fit G1, G2 to a dataset CSV",
        "table": "estimates versus G2 at fixed G1 (ensemble)",
        "scaling": "error versus number of samples, with log-log slope",
        "eta-sweep": "error versus detector efficiency",
    }
    for cmd, names in COMMAND_OPTIONS.items():
        p = sub.add_parser(cmd, help=helps[cmd], argument_default=argparse.SUPPRESS)
        if cmd == "estimate":
            p.add_argument("dataset", help="dataset CSV written by 'simulate'")
        p.add_argument("--config", help="key=value file; flags override it")
        for name in names:
            typ, text = OPTIONS[name]
            p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, help=text)
    return parser


def read_config(path: str, command: str) -> dict:
    allowed = set(COMMAND_OPTIONS[command])
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r} for {command}")
        try:
            values[key] = OPTIONS[key][0](value.strip())
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS.get(args.command, {}))
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if getattr(args, "config", None):
        opts.update(read_config(args.config, args.command))
    opts.update(cli)
    missing = [k for k in REQUIRED.get(args.command, []) if k not in opts]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


def _fit_options(o: dict) -> FitOptions:
    return FitOptions(restarts=o["restarts"], max_iters=o["max_iters"])


def _plot_path(o: dict) -> str:
    if o.get("plot_out"):
        return o["plot_out"]
    root, _ = os.path.splitext(o["out"])
    return root + "_plot.csv"


def _write_report(report, o: dict) -> int:
    atomic_write_text(o["out"], report.to_csv())
    atomic_write_text(_plot_path(o), report.plot_csv())
    bad = [r for r in report.rows if not r.valid]
    for r in bad:
        print(f"row {r.sweep_value!r}: {r.failed} of {r.trials + r.failed} trials failed; row omitted",
              file=sys.stderr)
    return EXIT_FIT if bad else EXIT_OK


def _cmd_simulate(o):
    config = ChannelConfig(Gains(o["g1"], o["g2"]), o["t"], o["eta"])
    ds = sample_dataset(ProbeState(o["alpha"], o["alpha_im"]), config, o["n"], o["seed"])
    write_dataset_csv(ds, o["out"])
    return EXIT_OK


def _cmd_estimate(o):
    ds = read_dataset_csv(o["dataset"])
    block = mle_fit(ds, _fit_options(o)).to_block()
    if o.get("out"):
        atomic_write_text(o["out"], block)
    else:
        sys.stdout.write(block)
    return EXIT_OK


def _experiment(o, sweep, **kw):
    return ExperimentConfig(
        probe=ProbeState(o["alpha"], o["alpha_im"]),
        gains_true=Gains(o["g1"], kw.pop("g2", o.get("g2", 0.0))),
        time=o["t"],
        n_trials=o["trials"],
        base_seed=o["seed"],
        sweep=sweep,
        **kw,
    )


def _cmd_table(o):
    values = sorted(o["g2_values"])
    cfg = _experiment(o, Sweep("g2", values), g2=values[0], eta=o["eta"], n_data=o["n"])
    return _write_report(run_table(cfg, _fit_options(o), o["jobs"]), o)


def _cmd_scaling(o):
    cfg = _experiment(o, Sweep("n_data", sorted(o["n_values"])), eta=o["eta"])
    report, fits = run_n_scaling(cfg, _fit_options(o), o["jobs"])
    for name, f in fits.items():
        print(f"slope_{name}={f.slope!r} r2_{name}={f.r2!r}")
    return _write_report(report, o)


def _cmd_eta_sweep(o):
    cfg = _experiment(o, Sweep("eta", sorted(o["eta_values"])), eta=1.0, n_data=o["n"])
    return _write_report(run_eta_sweep(cfg, _fit_options(o), o["jobs"]), o)


COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "table": _cmd_table,
    "scaling": _cmd_scaling,
    "eta-sweep": _cmd_eta_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"homodyne-ml: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetFormatError, DegenerateDatasetError, OSError) as exc:
        print(f"homodyne-ml: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"homodyne-ml: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
