"""Compare the numba-compiled kernels against the pure-Python/numpy
fallback on representative mini-slot workloads.

Run:  python benchmarks/bench_kernels.py
The dispatched path depends on RISMUX_DISABLE_NUMBA; both variants are
always timed directly here.
"""

import time

import numpy as np

from rismux import kernels


def time_fn(fn, args, reps):
    fn(*args)            # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


def bench_heuristic_fill(L, E, reps=2000):
    rng = np.random.default_rng(0)
    alpha = np.sort(10 ** rng.uniform(2, 4, L))[::-1].copy()
    p = rng.uniform(5e-3, 3e-2, E)
    caps = rng.integers(4, 13, E)
    args = (alpha, p, caps, 1.7902e6, 180e3)
    jit = time_fn(kernels.heuristic_fill, args, reps)
    py = time_fn(kernels.heuristic_fill_py, args, reps)
    return jit, py


def bench_greedy_demand(j, r_max, reps=2000):
    rng = np.random.default_rng(1)
    etab = kernels.energy_table(10 ** rng.uniform(2, 4, j), r_max, 1.7902e6, 180e3)
    jit = time_fn(kernels.greedy_demand, (etab, r_max), reps)
    py = time_fn(kernels.greedy_demand_py, (etab, r_max), reps)
    return jit, py


def main():
    print(f"numba active: {kernels.USING_NUMBA}")
    print(f"{'kernel':<34}{'numba':>12}{'python':>12}{'speedup':>10}")
    for L, E in ((5, 4), (20, 8), (60, 8)):
        jit, py = bench_heuristic_fill(L, E)
        print(f"heuristic_fill L={L:<3} E={E:<13}{jit * 1e6:>10.1f}us"
              f"{py * 1e6:>10.1f}us{py / jit:>9.1f}x")
    for j, r in ((3, 12), (10, 48), (40, 96)):
        jit, py = bench_greedy_demand(j, r)
        print(f"greedy_demand j={j:<3} R={r:<13}{jit * 1e6:>10.1f}us"
              f"{py * 1e6:>10.1f}us{py / jit:>9.1f}x")


if __name__ == "__main__":
    main()
