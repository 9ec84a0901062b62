"""Benchmark the numba kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
The numba path is compiled (and disk-cached) on the first call, which is
excluded from the timings below.
"""

import time

import numpy as np

import ggmwatch as gw
from ggmwatch import kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    print(f"active backend: {kernels.BACKEND} (numba available: {kernels.numba_available})")
    rng = np.random.default_rng(1)

    for p, w, m in ((50, 40, 200), (100, 50, 200), (100, 150, 100)):
        om = gw.gen_random_sparse(p, 0.05, 0.1, seed=3)
        chol = gw.cholesky_factor(gw.invert_spd(om.entries))
        psi = gw.scale_matrix(om).entries
        xs = rng.standard_normal((m, w, p)) @ chol.T
        t_np = timeit(kernels.window_supnorms_numpy, xs, om.entries, psi)
        line = f"window_supnorms  p={p:3d} w={w:3d} m={m:3d}   numpy {t_np*1e3:8.2f} ms"
        if kernels.numba_available:
            t_nb = timeit(kernels._window_numba, xs, om.entries, psi)
            line += f"   numba {t_nb*1e3:8.2f} ms   speedup x{t_np/t_nb:0.2f}"
        print(line)

    for p, t_len, w in ((100, 175, 75), (100, 400, 150)):
        om = gw.gen_random_sparse(p, 0.05, 0.1, seed=3)
        chol = gw.cholesky_factor(gw.invert_spd(om.entries))
        psi = gw.scale_matrix(om).entries
        x = rng.standard_normal((t_len, p)) @ chol.T
        t_np = timeit(kernels.sliding_supnorms_numpy, x, om.entries, psi, w)
        line = f"sliding_supnorms p={p:3d} T={t_len:3d} w={w:3d}   numpy {t_np*1e3:8.2f} ms"
        if kernels.numba_available:
            t_nb = timeit(kernels._sliding_numba, x, om.entries, psi, w)
            line += f"   numba {t_nb*1e3:8.2f} ms   speedup x{t_np/t_nb:0.2f}"
        print(line)


if __name__ == "__main__":
    main()
