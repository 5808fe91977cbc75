"""Compare the numba-compiled kernels against the pure-numpy fallback.

Times the two hot loops on a three-variable system and on a two-qubit
composite (15 variables): the grid trajectory integrator and the
first-crossing marcher.  The first numba call includes JIT compilation
and is reported separately.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from qmemtime.algebra import pauli_structure
from qmemtime.decoherence import CrossingOptions, decoherence_time
from qmemtime.interconnect import compose, product_mean
from qmemtime.model import SystemParams
from qmemtime.moments import (initial_moments, moment_trajectory,
                              weighting_from_sigma)


def small_system():
    sc = pauli_structure()
    sys = SystemParams(sc=sc, E=np.zeros(3),
                       M=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                       N=np.zeros(2))
    init = initial_moments(sc, np.zeros(3))
    weights = weighting_from_sigma(np.eye(3))
    return sys, init, weights


def composite_system():
    sc = pauli_structure()
    rng = np.random.default_rng(0)
    sub1 = SystemParams(sc=sc, E=np.array([0.1, 0.0, 0.2]),
                        M=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                        N=np.array([0.0, 0.1]))
    sub2 = SystemParams(sc=sc, E=np.array([0.0, 0.3, 0.0]),
                        M=0.7 * rng.standard_normal((2, 3)),
                        N=np.array([0.2, 0.0]))
    comp = compose(sub1, sub2, np.zeros(9))
    cs = comp.as_system()
    init = initial_moments(cs.sc, product_mean([0.1, 0.0, 0.2], [0.0, -0.1, 0.3]))
    weights = weighting_from_sigma(np.eye(15))
    return cs, init, weights


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(label, sys, init, weights, grid, eps, repeats=3):
    opts = CrossingOptions(step=1e-4)

    def traj(backend):
        return lambda: moment_trajectory(sys, init, weights, grid,
                                         backend=backend)

    def cross(backend):
        return lambda: decoherence_time(sys, init, weights, eps, opts=opts,
                                        backend=backend)

    t0 = time.perf_counter()
    traj("numba")()
    cross("numba")()
    compile_time = time.perf_counter() - t0

    rows = [
        ("trajectory", timeit(traj("numba"), repeats), timeit(traj("numpy"), repeats)),
        ("first crossing", timeit(cross("numba"), repeats), timeit(cross("numpy"), repeats)),
    ]
    print(f"\n{label}  (numba warm-up incl. compile: {compile_time:.2f} s)")
    print(f"  {'kernel':<16}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, t_nb, t_np in rows:
        print(f"  {name:<16}{t_nb * 1e3:>10.2f}ms{t_np * 1e3:>10.2f}ms"
              f"{t_np / t_nb:>9.1f}x")


def main():
    sys, init, weights = small_system()
    bench("three variables, dense grid (4000 intervals)",
          sys, init, weights, np.linspace(0.0, 4.0, 4001), eps=1.0)

    cs, cinit, cweights = composite_system()
    bench("two-qubit composite (n=15), grid (500 intervals)",
          cs, cinit, cweights, np.linspace(0.0, 0.5, 501), eps=0.2)


if __name__ == "__main__":
    main()
