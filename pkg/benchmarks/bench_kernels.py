"""Compare the numba and numpy population-forward kernels.

    python benchmarks/bench_kernels.py [--members 30] [--repeats 50]

Both kernels are called directly, so the MCTSGA_DISABLE_NUMBA flag does
not matter here. Prints per-call time and the max absolute difference
between the two outputs.
"""

import argparse
import time

import numpy as np

from mctsga import _kernels
from mctsga.dataset import bundled_csv_path, prepare
from mctsga.network import MlpSpec


def bench(fn, args, repeats):
    fn(*args)  # warm-up / jit compile
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return np.median(times), np.min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--members", type=int, default=30)
    ap.add_argument("--repeats", type=int, default=50)
    args = ap.parse_args()

    spec = MlpSpec()
    train, _ = prepare(bundled_csv_path(), seed=0)
    rng = np.random.default_rng(0)
    params = rng.uniform(-1, 1, size=(args.members, spec.n_params))
    sizes = np.asarray(spec.layer_sizes, dtype=np.int64)
    call = (params, train.features, sizes)

    print(f"population {args.members} x {spec.n_params} params, {len(train)} rows, "
          f"active backend: {_kernels.BACKEND}")
    out = {}
    for name, fn in (("numpy", _kernels.forward_population_numpy),
                     ("numba", _kernels.forward_population_numba)):
        med, best = bench(fn, call, args.repeats)
        out[name] = fn(*call)
        print(f"{name:6s} median {med * 1e3:8.3f} ms   min {best * 1e3:8.3f} ms")
    print(f"max |numba - numpy| = {np.max(np.abs(out['numba'] - out['numpy'])):.3e}")


if __name__ == "__main__":
    main()
