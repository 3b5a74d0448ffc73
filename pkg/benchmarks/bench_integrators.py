"""Compare the compiled RK4 kernel against the pure-Python integrator.

Run:  python benchmarks/bench_integrators.py
"""
import time

import numpy as np

from nhvak.dynamics import BACKEND, integrate_nonholonomic
from nhvak.systems import (CarriageParams, build_carriage, build_heisenberg,
                           build_unicycle)

CASES = [
    ("unicycle", build_unicycle(), np.zeros(4), np.array([1.0, 2.0])),
    ("carriage", build_carriage(CarriageParams(l=0.4)), np.zeros(5), np.array([1.0, 2.0])),
    ("heisenberg", build_heisenberg(), np.zeros(3), np.array([1.0, 0.5])),
]
T, H = 10.0, 1e-3


def timed(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    print(f"selected backend: {BACKEND}")
    print(f"horizon T={T}, step h={H} ({int(T / H)} RK4 steps per run)\n")
    header = f"{'system':<12} {'python [s]':>12} {'compiled [s]':>13} {'speedup':>9} {'max |dq|':>11}"
    print(header)
    print("-" * len(header))
    for name, sys, q0, v0 in CASES:
        t_py, slow = timed(lambda: integrate_nonholonomic(sys, q0, v0, T, H,
                                                          force_python=True), 1)
        if BACKEND == "compiled":
            t_c, fast = timed(lambda: integrate_nonholonomic(sys, q0, v0, T, H), 5)
            dev = float(np.max(np.abs(fast.q - slow.q)))
            print(f"{name:<12} {t_py:>12.3f} {t_c:>13.4f} {t_py / t_c:>8.1f}x {dev:>11.2e}")
        else:
            print(f"{name:<12} {t_py:>12.3f} {'n/a':>13} {'n/a':>9} {'n/a':>11}")
    if BACKEND != "compiled":
        print("\nspeedup extension not built; only the pure-Python path was timed")


if __name__ == "__main__":
    main()
