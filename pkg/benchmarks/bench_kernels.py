"""Compare the compiled masked-residual kernel against the numpy fallback.

Run with:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from sfcast._kernels import HAVE_COMPILED, masked_residual


def bench(T, c, k, density, repeats=20, seed=0):
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(T, c))
    mask = rng.random((T, c)) < density
    F = rng.normal(size=(T, c))
    b = rng.normal(size=T)
    L = rng.normal(size=(T, k)) if k else None
    R = rng.normal(size=(k, c)) if k else None

    def timed(force_fallback):
        masked_residual(Y, mask, F, L, R, b, force_fallback=force_fallback)  # warm-up
        t0 = time.perf_counter()
        for _ in range(repeats):
            masked_residual(Y, mask, F, L, R, b, force_fallback=force_fallback)
        return (time.perf_counter() - t0) / repeats

    fallback = timed(True)
    compiled = timed(False) if HAVE_COMPILED else float("nan")
    E1, s1 = masked_residual(Y, mask, F, L, R, b)
    E2, s2 = masked_residual(Y, mask, F, L, R, b, force_fallback=True)
    assert np.allclose(E1, E2, atol=1e-12) and abs(s1 - s2) < 1e-9 * max(1.0, abs(s2))
    return fallback, compiled


def main():
    print(f"compiled kernel available: {HAVE_COMPILED}")
    print(f"{'T':>5} {'cols':>6} {'k':>3} {'density':>7} {'numpy (ms)':>11} "
          f"{'compiled (ms)':>14} {'speedup':>8}")
    for T, c in [(52, 500), (52, 3000), (365, 1000)]:
        for k in (0, 5):
            for density in (0.05, 0.5, 1.0):
                fb, cp = bench(T, c, k, density)
                speedup = fb / cp if cp == cp else float("nan")
                print(f"{T:>5} {c:>6} {k:>3} {density:>7.2f} {fb * 1e3:>11.3f} "
                      f"{cp * 1e3:>14.3f} {speedup:>8.2f}")


if __name__ == "__main__":
    main()
