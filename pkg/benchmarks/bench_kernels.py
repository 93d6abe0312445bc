"""Benchmark the compiled kernel extension against the NumPy fallback.

Run:    python benchmarks/bench_kernels.py
The backend is selected at import time; this script loads both
implementations directly so a single process can compare them.
"""
import time

import numpy as np

from cdpde import _kernels_py, kernels

try:
    from cdpde import _kernels_cy
except ImportError:
    _kernels_cy = None


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mul(level, batch, rng):
    d = kernels.dim(level)
    a = np.ascontiguousarray(rng.normal(size=(batch, d)))
    b = np.ascontiguousarray(rng.normal(size=(batch, d)))
    idx = kernels.index_table(level)
    sign = kernels.sign_table(level)
    rows = []
    t_py = timeit(lambda: _kernels_py.cd_mul_batch(a, b, idx, sign))
    rows.append(("numpy", t_py))
    if _kernels_cy is not None:
        t_cy = timeit(lambda: _kernels_cy.cd_mul_batch(a, b, idx, sign))
        rows.append(("cython", t_cy))
        got = _kernels_cy.cd_mul_batch(a, b, idx, sign)
        want = _kernels_py.cd_mul_batch(a, b, idx, sign)
        assert np.array_equal(got, want), "backends disagree"
    return rows


def bench_matmul(level, n, rng):
    d = kernels.dim(level)
    A = np.ascontiguousarray(rng.normal(size=(n, n, d)))
    B = np.ascontiguousarray(rng.normal(size=(n, n, d)))
    idx = kernels.index_table(level)
    sign = kernels.sign_table(level)
    reps = 2000
    rows = [("numpy", timeit(lambda: [_kernels_py.cd_matmul(A, B, idx, sign)
                                      for _ in range(reps)]) / reps)]
    if _kernels_cy is not None:
        rows.append(("cython", timeit(lambda: [_kernels_cy.cd_matmul(A, B, idx, sign)
                                               for _ in range(reps)]) / reps))
    return rows


def bench_pipeline():
    """End-to-end scenario solve + residual under the active backend."""
    from cdpde.scenarios import load_scenario, run_scenario
    t0 = time.perf_counter()
    out = run_scenario(load_scenario("kdv_4_2"))
    dt = time.perf_counter() - t0
    return dt, out["residual_norms"]["pde"]


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'case':34s} {'numpy':>12s} {'cython':>12s} {'speedup':>9s}")
    for level in (2, 3, 4):
        for batch in (1_000, 100_000):
            rows = dict(bench_mul(level, batch, rng))
            t_py = rows["numpy"]
            t_cy = rows.get("cython")
            sp = f"{t_py / t_cy:8.2f}x" if t_cy else "      n/a"
            print(f"cd_mul   level={level} batch={batch:<8d} "
                  f"{t_py * 1e3:10.3f}ms {((t_cy or 0) * 1e3):10.3f}ms {sp}")
    for level in (2, 3):
        rows = dict(bench_matmul(level, 4, rng))
        t_py = rows["numpy"]
        t_cy = rows.get("cython")
        sp = f"{t_py / t_cy:8.2f}x" if t_cy else "      n/a"
        print(f"cd_matmul level=4x4 level={level}        "
              f"{t_py * 1e6:10.3f}us {((t_cy or 0) * 1e6):10.3f}us {sp}")
    dt, resid = bench_pipeline()
    print(f"pipeline kdv_4_2 ({kernels.BACKEND}): {dt:.2f}s, residual {resid:.2e}")


if __name__ == "__main__":
    main()
