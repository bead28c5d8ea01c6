"""Time the hot kernels under the compiled and the pure numpy backends.

Runs the same workloads through randpursuit._kernels._core (if built) and
randpursuit._kernels._fallback, printing per-kernel wall times and speedups.

Usage: python benchmarks/compare_backends.py [--repeat 3]
"""

import argparse
import importlib
import time

import numpy as np


def _load_backends():
    backends = {}
    fallback = importlib.import_module("randpursuit._kernels._fallback")
    backends["numpy"] = fallback
    try:
        core = importlib.import_module("randpursuit._kernels._core")
        backends["cython"] = core
    except ImportError:
        print("compiled backend not built; timing the fallback only")
    return backends


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rhe(mod, repeat):
    rng = np.random.Generator(np.random.PCG64(0))
    runs, steps, n = 400, 300, 8
    x0 = np.diag([1.0, -1.0] * (n // 2))
    z = rng.standard_normal((runs, steps, n))
    frob = np.empty((runs, steps))
    trace = np.empty((runs, steps))

    def work():
        x = np.tile(x0, (runs, 1, 1))
        mod.rhe_ensemble_steps(x, z, frob, trace)

    return _time(work, repeat)


def bench_reuse(mod, repeat):
    rng = np.random.Generator(np.random.PCG64(1))
    n, stored, passes = 10, 200, 10
    dirs = rng.standard_normal((stored, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    h = np.diag(np.concatenate([np.ones(5), np.full(5, 1e4)]))
    curvs = np.einsum("si,ij,sj->s", dirs, h, dirs)
    order = np.concatenate([rng.permutation(stored)
                            for _ in range(passes)]).astype(np.int64)
    b0 = 5e3 * np.eye(n)
    b0_inv = np.eye(n) / 5e3

    def work():
        b = b0.copy()
        b_inv = b0_inv.copy()
        for _ in range(40):
            mod.reuse_sweep(b, b_inv, dirs, curvs, order, 1e-8, 0, 50)

    return _time(work, repeat)


def bench_frp(mod, repeat):
    rng = np.random.Generator(np.random.PCG64(2))
    n, iters = 50, 40_000
    d = np.concatenate([np.full(25, 1000.0), np.ones(25)])
    y0 = np.ones(n)
    z = rng.standard_normal((iters, n))

    def work():
        mod.frp_quadratic(d, y0, None, z, -1.0, iters)

    return _time(work, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repetitions; the best run is reported")
    args = parser.parse_args()

    backends = _load_backends()
    workloads = [
        ("rhe_ensemble_steps (400 runs x 300 steps, n=8)", bench_rhe),
        ("reuse_sweep (40 sweeps x 2000 updates, n=10)", bench_reuse),
        ("frp_quadratic (40k iterations, n=50)", bench_frp),
    ]
    results = {}
    for label, fn in workloads:
        for name, mod in backends.items():
            results[(label, name)] = fn(mod, args.repeat)

    width = max(len(w) for w, _ in workloads)
    print(f"{'kernel'.ljust(width)}  {'numpy':>10}  {'cython':>10}  {'speedup':>8}")
    for label, _ in workloads:
        base = results[(label, "numpy")]
        line = f"{label.ljust(width)}  {base * 1e3:9.1f}ms"
        if ("cython" in backends):
            fast = results[(label, "cython")]
            line += f"  {fast * 1e3:9.1f}ms  {base / fast:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
