"""Timing comparison of the two convolution backends.

The compiled kernels are plain direct loops; the numpy backend builds
im2col buffers and leans on BLAS. Depthwise and other tiny-fan-in shapes
favor the direct loops (no buffer building, no batched-matmul setup);
dense convolutions favor BLAS by a wide margin. The `auto` mode's fan-in
cutoff in litevsr.backend was chosen from runs of this script.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from litevsr import backend
from litevsr.backend import python_ops

CASES = [
    # label, x shape, w shape, stride, dilation, groups, pad
    ("stem 3d 5x7x7 cin=1", (8, 1, 16, 36, 36), (64, 1, 5, 7, 7),
     (1, 2, 2), (1, 1, 1), 1, ((2, 2), (3, 3), (3, 3))),
    ("dense 3x3 64ch 16px", (32, 64, 16, 16), (64, 64, 3, 3),
     (1, 1), (1, 1), 1, ((1, 1), (1, 1))),
    ("pointwise 256ch", (32, 256, 8, 8), (256, 256, 1, 1),
     (1, 1), (1, 1), 1, ((0, 0), (0, 0))),
    ("depthwise 3x3 128ch", (32, 128, 16, 16), (128, 1, 3, 3),
     (1, 1), (1, 1), 128, ((1, 1), (1, 1))),
    ("depthwise 1d k3 384ch", (32, 384, 29), (384, 1, 3),
     (1,), (1,), 384, ((2, 0),)),
    ("causal 1d k3 384ch dense", (32, 384, 29), (384, 384, 3),
     (1,), (1,), 1, ((2, 0),)),
]


def time_call(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if not backend.HAS_COMPILED:
        print("compiled kernels not built; showing the numpy backend only")
    mods = [("python", python_ops)] + ([("compiled", backend.compiled_ops)] if backend.HAS_COMPILED else [])

    rng = np.random.default_rng(0)
    print(f"{'case':30s} {'direction':8s} " + " ".join(f"{name:>10s}" for name, _ in mods) + "    winner")
    for label, xs, ws, stride, dilation, groups, pad in CASES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        conv_args = (stride, dilation, groups, pad)
        y = python_ops.conv_forward(x, w, *conv_args)
        gy = np.ones_like(y)
        for direction, calls in (
            ("forward", {name: (lambda m=m: m.conv_forward(x, w, *conv_args)) for name, m in mods}),
            ("bwd_in", {name: (lambda m=m: m.conv_backward_input(w, gy, *conv_args, x.shape)) for name, m in mods}),
            ("bwd_w", {name: (lambda m=m: m.conv_backward_weight(x, gy, *conv_args, w.shape)) for name, m in mods}),
        ):
            times = {name: time_call(fn, args.repeats) for name, fn in calls.items()}
            winner = min(times, key=times.get)
            row = " ".join(f"{times[name]*1e3:9.2f}ms" for name, _ in mods)
            print(f"{label:30s} {direction:8s} {row}    {winner}")
    print(f"\nauto mode fan-in cutoff: {backend._DIRECT_FANIN_CUTOFF} "
          f"(direct kernels for in_channels/groups * kernel_volume at or below it)")


if __name__ == "__main__":
    main()
