"""Compare the Cython kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the raw log-likelihood sum, a 121x121 grid scan and a full fit at the
Table 1 settings, once per backend.
"""
import argparse
import timeit

import numpy as np

from homodyne_ml import _backend, _fallback
from homodyne_ml.channel_model import ChannelConfig, Gains, ProbeState
from homodyne_ml.estimator import grid_search_oracle, mle_fit
from homodyne_ml.homodyne import sample_dataset

try:
    from homodyne_ml import _kernels
except ImportError:
    _kernels = None


def use(mod):
    _backend.loglik = mod.loglik
    _backend.loglik_grid = mod.loglik_grid
    _backend.residual_sumsq = mod.residual_sumsq


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("numpy", _fallback)]
    if _kernels is not None:
        backends.append(("cython", _kernels))
    else:
        print("compiled kernels not built; showing fallback only")

    probe = ProbeState(4.0)
    cfg = ChannelConfig(Gains(3.0, 1.0), 1.0, 0.6)
    data = {n: sample_dataset(probe, cfg, n, 0) for n in (1_000, 10_000, 100_000)}
    ds_grid = data[1_000]

    cases = []
    for n, ds in data.items():
        x, m = ds.values, ds.projections
        cases.append((f"loglik N={n}", lambda x=x, m=m: _backend.loglik(x, m, 0.37, 1.27), 200))
    cases.append(("grid 121x121 N=1000",
                  lambda: grid_search_oracle(ds_grid, Gains(2.4, 0.4), Gains(3.6, 1.6), 121), 1))
    cases.append(("mle_fit N=10000", lambda: mle_fit(data[10_000]), 5))

    results = {}
    for name, mod in backends:
        use(mod)
        for label, fn, number in cases:
            results[(label, name)] = best_of(fn, args.repeat, number)

    print(f"{'case':<24}" + "".join(f"{name:>14}" for name, _ in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, _, _ in cases:
        times = [results[(label, name)] for name, _ in backends]
        line = f"{label:<24}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:>11.1f}x"
        print(line)

    use(_kernels or _fallback)
    assert np.isfinite(mle_fit(data[10_000]).loglik)


if __name__ == "__main__":
    main()
