"""Compare the compiled and pure-numpy walk kernels.

    python3 benchmarks/bench_walk.py --paths 2000 --t-max 1000 --threads 1

Both backends consume the same random streams, so besides timing the script
checks that they produce identical positions.
"""

import argparse
import os
import time

import numpy as np

from manhattan_rw._accel import HAVE_NUMBA, set_threads
from manhattan_rw.lattice import ModelSpec
from manhattan_rw.walker import estimate_laplace, estimate_msd, log_time_grid

FLAG = "MANHATTAN_RW_DISABLE_NUMBA"


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_backend(numpy_only: bool, spec, args):
    if numpy_only:
        os.environ[FLAG] = "1"
    else:
        os.environ.pop(FLAG, None)
    times = log_time_grid(args.t_max, 0.1, 8)
    msd_t, msd = timed(lambda: estimate_msd(spec, args.paths, times, master_seed=1), args.repeat)
    lap_t, lap = timed(lambda: estimate_laplace(spec, args.paths, [1.0 / args.t_max], master_seed=1),
                       args.repeat)
    return msd_t, lap_t, msd, lap


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--t-max", type=float, default=1000.0)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--repeat", type=int, default=2)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    n = set_threads(args.threads)
    spec = ModelSpec(args.d)
    # compile once outside the timings
    estimate_msd(spec, 2, [1.0])
    estimate_laplace(spec, 2, [1.0])
    nb = run_backend(False, spec, args)
    np_ = run_backend(True, spec, args)
    print(f"d={args.d} paths={args.paths} t_max={args.t_max:g} numba threads={n}")
    print(f"{'kernel':<10}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for label, a, b in (("msd", nb[0], np_[0]), ("laplace", nb[1], np_[1])):
        print(f"{label:<10}{a:>12.3f}{b:>12.3f}{b / a:>10.1f}")
    same = np.array_equal(nb[2].mean_sq, np_[2].mean_sq)
    close = np.allclose(nb[3].values, np_[3].values, rtol=1e-11)
    print(f"msd identical: {same}; laplace agrees to 1e-11: {close}")


if __name__ == "__main__":
    main()
