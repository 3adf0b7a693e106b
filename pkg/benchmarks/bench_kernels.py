#!/usr/bin/env python3
"""Benchmark: compiled integrator kernel against the pure-Python twin.

Times single-trajectory geodesic integration (with and without the
coupled transport matrix) on the catalog models, plus the vectorized
batch path used by the sampling oracles.  Run from the repo root:

    python benchmarks/bench_kernels.py [--steps 2000] [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from transportlab import kernels
from transportlab.manifold import flat, halfplane, sphere2

CASES = [
    (flat(2), [0.1, -0.2], [0.4, 0.3]),
    (sphere2(1.0), [math.pi / 2 - 0.3, 0.4], [0.12, 0.2]),
    (halfplane(), [0.0, 1.0], [0.1, 0.15]),
]


def time_single(model, x0, tau0, steps, repeat, with_transport):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernels.integrate(model, x0, tau0, 1.0, steps,
                          with_transport=with_transport)
        best = min(best, time.perf_counter() - t0)
    return best


def time_batch(model, x0, steps, repeat, batch=256):
    rng = np.random.default_rng(7)
    taus = 0.1 * rng.normal(size=(batch, len(x0)))
    X0 = np.broadcast_to(np.asarray(x0, float), taus.shape)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernels.integrate_batch(model, X0, taus, 1.0, steps)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = list(kernels.available_backends())
    print(f"available backends: {', '.join(backends)}")
    header = f"{'case':<28} " + " ".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for with_transport in (False, True):
        suffix = "+transport" if with_transport else "geodesic"
        for model, x0, tau0 in CASES:
            times = {}
            for backend in backends:
                kernels.set_backend(backend)
                times[backend] = time_single(model, x0, tau0, args.steps,
                                             args.repeat, with_transport)
            kernels.set_backend("auto")
            row = f"{model.name + ' ' + suffix:<28} " + " ".join(
                f"{times[b] * 1e3:>10.2f}ms" for b in backends
            )
            if len(backends) == 2:
                row += f" {times['python'] / times['native']:>8.1f}x"
            print(row)

    print()
    for model, x0, _ in CASES:
        t = time_batch(model, x0, args.steps // 4, args.repeat)
        print(f"{model.name:<28} batch 256 x {args.steps // 4} steps "
              f"(numpy): {t * 1e3:.2f}ms")


if __name__ == "__main__":
    main()
