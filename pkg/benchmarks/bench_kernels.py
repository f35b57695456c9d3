"""Compare the numba and numpy backends of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Both backends are
imported side by side, so the RADIOMAP_DISABLE_NUMBA flag does not matter
here; the first numba call is made before timing to exclude compilation.
"""

import argparse
import time

import numpy as np

from radiomap import _accel


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng, scale):
    n = 400 * scale
    X = rng.uniform(0, 10, (n, 2))
    Y = rng.uniform(0, 10, (n, 2))
    counts = np.array([32, 32])
    links = 200 * scale
    A = rng.uniform(0, 10, (links, 2))
    B = rng.uniform(0, 10, (links, 2))
    lower, cell = np.zeros(2), np.full(2, 10 / 32)
    P = rng.uniform(0, 10, (1024, 2))
    excess = np.full(links, 0.5)
    return {
        "pairwise_distances": (X, Y),
        "traversal_matrix": (A, B, lower, cell, counts),
        "ellipse_mask": (A, B, P, excess),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>12}")
    for name, a in cases(rng, args.scale).items():
        f_np = getattr(_accel, f"{name}_numpy")
        f_nb = getattr(_accel, f"{name}_numba")
        ref, got = f_np(*a), f_nb(*a)  # warm-up and compile
        diff = float(np.max(np.abs(np.asarray(ref, float) - np.asarray(got, float))))
        t_np = best_of(f_np, a, args.repeat)
        t_nb = best_of(f_nb, a, args.repeat)
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
