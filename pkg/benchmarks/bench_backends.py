"""Time the compiled and pure-Python kernel backends on the same inputs.

Usage: ``python3 benchmarks/bench_backends.py [--n 40 80 160] [--repeat 5]``
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

import qqgp
from qqgp import _pykernels
from qqgp.core import DEFAULT_NUGGET_GRID, ModelConfig, QualKernel
from qqgp.fit import fit_model
from qqgp.kernels import level_table, stack_tables


def kernel_inputs(n: int, rng: np.random.Generator):
    counts = (4, 6)
    tables = stack_tables([level_table(QualKernel.GAUSSIAN, rng.standard_normal((a, 2)))
                           for a in counts])
    U = rng.random((n, 4))
    V = np.column_stack([rng.integers(0, a, n) for a in counts]).astype(np.int64)
    phi = rng.uniform(0.5, 5.0, 4)
    return U, V, phi, tables


def fit_problem(n: int, rng: np.random.Generator):
    from qqgp.bench.design import maximin_lhd
    from qqgp.bench.experiment import make_dataset
    from qqgp.bench.functions import otl
    spec = otl()
    d = maximin_lhd(n, spec.I, spec.J, spec.level_counts, spec.quant_ranges, rng)
    cfg = ModelConfig.from_method("gaussian", "ord", "multiplicative", spec.level_counts,
                                  restarts=1)
    return make_dataset(spec, d), cfg


def best_of(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[40, 80, 160])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fit-n", type=int, default=40)
    args = ap.parse_args(argv)
    if "compiled" not in qqgp.available_backends():
        raise SystemExit("compiled extension not built; run pip install -e . first")
    from qqgp import _ckernels

    rng = np.random.default_rng(0)
    print(f"{'operation':<22}{'n':>6}{'compiled (ms)':>16}{'python (ms)':>14}{'speed-up':>10}")
    for n in args.n:
        U, V, phi, tables = kernel_inputs(n, rng)
        w = np.ones(2)
        R = _pykernels.corr_train(U, V, phi, tables, False, w)
        R += 1e-6 * np.eye(n)
        y = rng.standard_normal(n)
        grid = np.array(DEFAULT_NUGGET_GRID)
        cases = {
            "corr_train": lambda m: m.corr_train(U, V, phi, tables, False, w),
            "min_eigenvalue": lambda m: m.min_eigenvalue(R),
            "nugget_scan": lambda m: m.nugget_scan(R, y, grid),
        }
        for name, call in cases.items():
            tc = best_of(lambda: call(_ckernels), args.repeat)
            tp = best_of(lambda: call(_pykernels), args.repeat)
            print(f"{name:<22}{n:>6}{tc * 1e3:>16.3f}{tp * 1e3:>14.3f}{tp / tc:>10.2f}")

    data, cfg = fit_problem(args.fit_n, np.random.default_rng(1))
    times = {}
    for backend in ("compiled", "python"):
        prev = qqgp.set_backend(backend)
        try:
            times[backend] = min(timeit.repeat(lambda: fit_model(data, cfg, seed=0), number=1,
                                               repeat=max(1, args.repeat // 2)))
        finally:
            qqgp.set_backend(prev)
    print(f"{'fit_model (OTL)':<22}{args.fit_n:>6}{times['compiled'] * 1e3:>16.1f}"
          f"{times['python'] * 1e3:>14.1f}{times['python'] / times['compiled']:>10.2f}")


if __name__ == "__main__":
    main()
