"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from picotx import _kernels_py

try:
    from picotx import _kernels as compiled
except ImportError:
    compiled = None

CASES = {
    "one_pole": lambda m, x: m.one_pole(x, 1e-3, 0.0),
    "dc_block": lambda m, x: m.dc_block(x, 0.997, 0.0, 0.0),
    "agc": lambda m, x: m.agc(x, 4e-4, 4e-5, 0.5, 1e-6, 0.0),
}


def bench(fn, mod, x, repeat):
    return min(timeit.repeat(lambda: fn(mod, x), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    x = np.random.default_rng(0).standard_normal(args.samples)
    print(f"{args.samples} samples, best of {args.repeat}")
    print(f"{'kernel':<10}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, fn in CASES.items():
        # the agc fallback is a per-sample loop; time it on a slice and scale up
        n = min(x.size, 100_000) if name == "agc" else x.size
        t_py = bench(fn, _kernels_py, x[:n], args.repeat) * x.size / n
        if compiled is None:
            print(f"{name:<10}{1e3 * t_py:>14.2f}{'n/a':>16}{'':>10}")
            continue
        t_c = bench(fn, compiled, x, args.repeat)
        print(f"{name:<10}{1e3 * t_py:>14.2f}{1e3 * t_c:>16.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
