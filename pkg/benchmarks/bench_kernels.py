"""Wall-clock comparison of the numba hot loops against their numpy twins.

    python benchmarks/bench_kernels.py [--size 64] [--reach 12] [--bits 18] [--repeat 5]

Both implementations are called directly, so the environment flag does not
matter here.  Results are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from nlcalib import _hot
from nlcalib._accel import HAS_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def problem(size, reach, seed=0):
    rng = np.random.default_rng(seed)
    a = np.arange(-reach, reach + 1)
    r = np.sqrt(a[:, None] ** 2 + a[None, :] ** 2)
    r[reach, reach] = 1.0
    table = r**-2.5
    table[reach, reach] = 0.0
    f = (rng.random((size, size)) < 0.5).astype(float)
    phi = rng.standard_normal((size, size))
    win = np.zeros((size, size), bool)
    win[size // 4 : 3 * size // 4, size // 4 : 3 * size // 4] = True
    cells = np.argwhere(win).astype(np.int64)
    return table, f, phi, win, cells


def walk_problem(bits, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.random((bits, bits))
    w = w + w.T
    np.fill_diagonal(w, 0.0)
    return float(rng.random()), rng.standard_normal(bits), w


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64, help="universe side length in cells")
    ap.add_argument("--reach", type=int, default=12, help="weight table reach in cells")
    ap.add_argument("--bits", type=int, default=18, help="free window cells for the enumeration walk")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    table, f, phi, win, cells = problem(args.size, args.reach)
    v = 1.0 - 2.0 * f
    p0, g0, w = walk_problem(args.bits)
    cases = [
        ("set curvature sums", lambda m: getattr(_hot, f"_set_sums_{m}")(cells, v, table, 0.0, np.inf)),
        ("level curvature sums", lambda m: getattr(_hot, f"_level_sums_{m}")(cells, phi, table, 0.0, np.inf)),
        ("perimeter pair sum", lambda m: getattr(_hot, f"_pair_abs_{m}")(f, win, table)),
        ("calibration pair sum", lambda m: getattr(_hot, f"_pair_sign_{m}")(f, phi, win, table)),
        (f"{args.bits}-bit enumeration", lambda m: getattr(_hot, f"_gray_walk_{m}")(p0, g0, w, 1e-9, 1 << 12, 1024)),
    ]
    print(f"universe {args.size}x{args.size}, reach {args.reach}, {cells.shape[0]} window cells, "
          f"{args.bits}-bit walk, best of {args.repeat}")
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, call in cases:
        a, b = call("nb"), call("np")  # warm-up and agreement check
        ra, rb = np.asarray(a[0] if isinstance(a, tuple) else a), np.asarray(b[0] if isinstance(b, tuple) else b)
        if not np.allclose(ra, rb, rtol=1e-10, atol=1e-10):
            raise SystemExit(f"{name}: backends disagree")
        tn = best_of(lambda: call("nb"), args.repeat)
        tp = best_of(lambda: call("np"), args.repeat)
        print(f"{name:<24}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}")


if __name__ == "__main__":
    main()
