"""Time the compiled and pure-Python kernel backends on the solver's hot loops.

Run with ``python3 benchmarks/bench_kernels.py [N ...]``.
"""
import sys
import timeit

import numpy as np

from slowgrowth import kernels
from slowgrowth.approximation import grid_kernel


def bench(N: int, repeat: int = 5):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((N + 1, N + 1))
    h = 1.0 / N
    flux = rng.standard_normal((N, N, 4, 2))
    hq = rng.standard_normal((N, N, 4, 2, 2))
    K = grid_kernel(8 * h, h)
    rows = []
    backends = {"python": kernels.get_backend("python")}
    if kernels.BACKEND == "compiled":
        backends["compiled"] = kernels.get_backend("compiled")
    for name, mod in backends.items():
        cases = {
            "cell_gradients": lambda: mod.cell_gradients(u, h),
            "scatter_flux": lambda: mod.scatter_flux(flux, h),
            "cell_stiffness": lambda: mod.cell_stiffness(hq, h),
            "correlate_valid": lambda: mod.correlate_valid(u, K),
        }
        for case, fn in cases.items():
            t = min(timeit.repeat(fn, number=1, repeat=repeat))
            rows.append((N, case, name, t))
    return rows


def main(argv):
    sizes = [int(a) for a in argv] or [64, 128, 256]
    print(f"{'N':>5} {'kernel':<16} {'backend':<9} {'seconds':>10}")
    for N in sizes:
        rows = bench(N)
        for n, case, name, t in rows:
            print(f"{n:>5} {case:<16} {name:<9} {t:>10.5f}")


if __name__ == "__main__":
    main(sys.argv[1:])
