#!/usr/bin/env python3
"""Compare the compiled kernel core against the numpy fallback on the
production layer shapes (conv blocks of the fixed architecture).

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from evoroc.backend import py_kernels

try:
    from evoroc.backend import _ckernels
except ImportError:
    _ckernels = None

# (label, in_ch, H, W, k, out_ch) for the three conv blocks
SHAPES = [
    ("conv1 6x64x64 k7", 6, 64, 64, 7, 16),
    ("conv2 16x29x29 k5", 16, 29, 29, 5, 32),
    ("conv3 32x12x12 k4", 32, 12, 12, 4, 64),
]


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for label, c, h, w, k, out_ch in SHAPES:
        x = rng.standard_normal((c, h, w)).astype(np.float32)
        oh, ow = h - k + 1, w - k + 1
        cols = rng.standard_normal((c * k * k, oh * ow)).astype(np.float32)
        pooled = rng.standard_normal((out_ch, oh // 2, ow // 2)).astype(np.float32)
        act = rng.standard_normal((out_ch, oh, ow)).astype(np.float32)
        _, idx = py_kernels.maxpool2(act)

        kernels = {
            "im2col": lambda mod: mod.im2col(x, k),
            "col2im": lambda mod: mod.col2im(cols, c, h, w, k),
            "maxpool2": lambda mod: mod.maxpool2(act),
            "maxpool2_backward": lambda mod: mod.maxpool2_backward(pooled, idx, oh, ow),
        }
        for name, call in kernels.items():
            t_py = _time(lambda: call(py_kernels), repeats)
            if _ckernels is not None:
                t_c = _time(lambda: call(_ckernels), repeats)
                rows.append((label, name, t_py, t_c, t_py / t_c))
            else:
                rows.append((label, name, t_py, None, None))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled backend not available; timing numpy fallback only\n")
    header = f"{'shape':22s} {'kernel':18s} {'python':>10s} {'compiled':>10s} {'ratio':>7s}"
    print(header)
    print("-" * len(header))
    for label, name, t_py, t_c, ratio in bench(args.repeats):
        c_col = f"{t_c * 1e6:9.1f}u" if t_c is not None else f"{'-':>10s}"
        r_col = f"{ratio:6.2f}x" if ratio is not None else f"{'-':>7s}"
        print(f"{label:22s} {name:18s} {t_py * 1e6:9.1f}u {c_col} {r_col}")


if __name__ == "__main__":
    main()
