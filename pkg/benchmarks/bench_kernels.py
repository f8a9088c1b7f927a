#!/usr/bin/env python3
"""Benchmark the compiled convolution kernels against the NumPy fallback.

Times forward and backward passes on training-typical shapes, plus one full
network training step, and prints the speedup of the compiled path.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from locaug import model, optim
from locaug.augment import AugmentSpec
from locaug.backend import HAVE_COMPILED, get_backend

SHAPES = [
    # (N, Ci, Co, H, W) as seen while training the synthetic tasks
    (8, 5, 8, 64, 64),
    (8, 8, 8, 64, 64),
    (8, 16, 16, 32, 32),
    (2, 16, 32, 64, 64),
    (1, 6, 6, 128, 128),
]


def best_of(fn, repeats, inner=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_conv(repeats):
    rng = np.random.default_rng(0)
    names = ["python"] + (["compiled"] if HAVE_COMPILED else [])
    print(f"{'shape':<24} {'pass':<8}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>9}")
    for shape in SHAPES:
        n, ci, co, h, w = shape
        x = rng.normal(size=(n, ci, h, w))
        wt = rng.normal(size=(co, ci, 3, 3))
        b = rng.normal(size=co)
        g = rng.normal(size=(n, co, h, w))
        label = f"N{n} {ci}->{co} {h}x{w}"
        for tag, call in (
            ("fwd", lambda k: k.conv2d_forward(x, wt, b, 1)),
            ("bwd", lambda k: k.conv2d_backward(x, wt, g, 1)),
        ):
            times = {}
            for name in names:
                kernel = get_backend(name)
                times[name] = best_of(lambda: call(kernel), repeats)
            row = f"{label:<24} {tag:<8}"
            for name in names:
                row += f"{times[name] * 1e3:>10.2f}ms"
            if HAVE_COMPILED:
                row += f"{times['python'] / times['compiled']:>8.1f}x"
            print(row)


def bench_training_step(repeats):
    import os

    print("\nfull training step (depth-2, widths 8/8, batch 8, 64x64):")
    spec = AugmentSpec("rgb+coord")
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(8, spec.in_channels, 64, 64))
    t = (rng.uniform(size=(8, 1, 64, 64)) > 0.7).astype(np.float64)

    results = {}
    for name in (["python", "compiled"] if HAVE_COMPILED else ["python"]):
        os.environ["LOCAUG_BACKEND"] = name
        import importlib

        import locaug.backend
        importlib.reload(locaug.backend)
        import locaug.layers
        importlib.reload(locaug.layers)
        importlib.reload(model)

        net = model.build(2, spec, widths=(8, 8), seed=0)
        state = optim.AdamState.init(net.params(), lr=1e-3)

        def step():
            pred, caches = model.forward(net, x, with_caches=True)
            _, d = optim.bce_loss(pred, t)
            grads, _ = model.backward(net, caches, d)
            flat = []
            for dw, db in grads:
                flat += [dw, db]
            optim.adam_step(net.params(), flat, state)

        results[name] = best_of(step, repeats, inner=3)
        print(f"  {name:>9}: {results[name] * 1e3:8.1f} ms/step")
    if len(results) == 2:
        print(f"  speedup: {results['python'] / results['compiled']:.1f}x")
    os.environ.pop("LOCAUG_BACKEND", None)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_COMPILED:
        print("compiled extension not built; showing the NumPy fallback only")
    bench_conv(args.repeats)
    bench_training_step(args.repeats)
