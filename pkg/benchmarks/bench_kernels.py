"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time of each backend, the
speedup, and the largest output difference between the two.
"""

import argparse
import time

import numpy as np

from gandetect.kernels import available_backends


def cases(rng):
    img = rng.uniform(0, 255, (256, 256))
    bins = rng.integers(0, 8, (256, 256))
    x = rng.normal(size=(32, 16, 32, 32))
    cols = rng.normal(size=(32, 16, 16, 16 * 9))
    rows = rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256))
    return {
        "fft_rows 256x256": lambda k: k.fft_rows(rows, False),
        "median3x3 256x256": lambda k: k.median3x3(img),
        "cooc_counts 256x256 L=8": lambda k: k.cooc_counts(bins, bins, 1, 0, 8),
        "im2col 32x16x32x32 s1": lambda k: k.im2col(x, 1),
        "col2im 32x16x32x32 s2": lambda k: k.col2im(cols, x.shape, 2),
    }


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernels are not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases(rng).items():
        t_py, out_py = best_of(lambda: fn(backends["python"]), args.repeat)
        if "compiled" in backends:
            t_c, out_c = best_of(lambda: fn(backends["compiled"]), args.repeat)
            diff = float(np.abs(np.asarray(out_py) - np.asarray(out_c)).max())
            print(f"{name:28s} {1e3 * t_py:10.2f} {1e3 * t_c:12.2f} {t_py / t_c:8.1f} {diff:10.2e}")
        else:
            print(f"{name:28s} {1e3 * t_py:10.2f} {'-':>12s} {'-':>8s} {'-':>10s}")


if __name__ == "__main__":
    main()
