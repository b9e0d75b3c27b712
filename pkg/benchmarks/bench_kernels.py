"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from dgsim import _pykernels

try:
    from dgsim import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    a = rng.integers(0, 50, 400).astype(np.int64)
    b = rng.integers(0, 50, 400).astype(np.int64)
    x = rng.normal(size=3000)
    wx = np.full(x.size, 1.0 / x.size)
    text = " ".join(f"token{i} user profile text" for i in range(200))
    return {
        "lcs_length(400x400)": lambda m: m.lcs_length(a, b),
        "rbf_cross_sum(3000x3000)": lambda m: m.rbf_cross_sum(x, wx, x, wx, 0.5),
        "trigram_features(5.5k chars)": lambda m: m.trigram_features(text, 256),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:30s} {py:10.2f} {'n/a':>10s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:30s} {py:10.2f} {cy:10.2f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
