#!/usr/bin/env python3
"""Benchmark the pure-Python kernels against the compiled extension.

Runs each hot kernel on a training-shaped workload with both backends and
prints per-call timings plus the speedup.  Usage:

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import time
from array import array

from foodweight._kernels import available_backends, get_backend


def _rand_array(rng, n, scale=1.0):
    return array("d", (rng.uniform(-scale, scale) for _ in range(n)))


def build_workloads(rng):
    """(name, calls-per-measurement, fn(ops) -> None) triples."""
    head_w1 = _rand_array(rng, 64 * 5)
    head_b1 = _rand_array(rng, 64)
    head_w2 = _rand_array(rng, 32 * 64)
    head_b2 = _rand_array(rng, 32)
    x5 = _rand_array(rng, 5)
    z1 = array("d", bytes(8 * 64))
    a1 = array("d", bytes(8 * 64))
    z2 = array("d", bytes(8 * 32))
    d2 = _rand_array(rng, 32)
    da1 = array("d", bytes(8 * 64))
    gw2 = array("d", bytes(8 * 32 * 64))
    pooled = _rand_array(rng, 256)
    n_params = 2753
    p = _rand_array(rng, n_params)
    g = _rand_array(rng, n_params, 0.01)
    m = array("d", bytes(8 * n_params))
    v = array("d", bytes(8 * n_params))
    crop = _rand_array(rng, 48 * 48, 0.5)
    big = array("d", bytes(8 * 224 * 224))
    pool_out = array("d", bytes(8 * 256))

    def head_forward(ops):
        ops.dense_forward(head_w1, head_b1, x5, z1, 64, 5)
        ops.relu(z1, a1, 64)
        ops.dense_forward(head_w2, head_b2, a1, z2, 32, 64)

    def backward_core(ops):
        ops.accumulate_outer(gw2, d2, a1, 32, 64)
        ops.matvec_transpose(head_w2, d2, da1, 32, 64)

    def adam(ops):
        ops.adam_update(p, g, m, v, n_params, 1e-4, 0.9, 0.999, 1e-8, 0.1, 0.001)

    def resize(ops):
        ops.resize_bilinear(crop, 48, 48, 1, big, 224, 224)

    def pool(ops):
        ops.avg_pool(big, 224, 224, 1, 16, pool_out)

    def backbone_dot(ops):
        ops.dot(pooled, pooled, 256)

    return [
        ("head_forward (5->64->32)", 2000, head_forward),
        ("backward_core (32x64)", 2000, backward_core),
        ("adam_update (2753 params)", 500, adam),
        ("resize_bilinear 48->224", 20, resize),
        ("avg_pool 224->16", 50, pool),
        ("dot 256", 5000, backbone_dot),
    ]


def measure(fn, ops, calls, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for _ in range(calls):
            fn(ops)
        elapsed = (time.perf_counter() - start) / calls
        best = min(best, elapsed)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="measurement repeats")
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    rng = random.Random(0)
    workloads = build_workloads(rng)

    header = f"{'kernel':<28} " + "".join(f"{b + ' (us)':>14}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for name, calls, fn in workloads:
        times = {}
        for backend in backends:
            ops = get_backend(backend)
            times[backend] = measure(fn, ops, calls, args.repeat)
        row = f"{name:<28} " + "".join(
            f"{times[b] * 1e6:>14.2f}" for b in backends
        )
        if len(backends) > 1:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
