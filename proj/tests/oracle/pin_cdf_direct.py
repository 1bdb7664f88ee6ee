#!/usr/bin/env python3
"""Independent Monte Carlo pin for Pr{A_1 <= 1}, A_t = int_0^t exp(B_s - s/2) ds.

Brownian values are exact at the grid (cumulative sums of Gaussian increments);
the time integral uses the trapezoid rule on 2048 steps, matching the library's
default quadrature. Run once at 10^7 paths; the resulting estimate and its
standard error are frozen into tests/test_estimators.cpp as a regression target.

Usage: python3 pin_cdf_direct.py [n_paths] [seed]

Frozen result (n=10^7, seed=123457, steps=2048, trapezoid):
    Pr(A_1 <= 1) = 0.63458290   se = 1.52e-04
"""
import sys

import numpy as np


def estimate(n_paths: int, seed: int, t: float = 1.0, a: float = 1.0,
             steps: int = 2048, chunk: int = 20000) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    dt = t / steps
    sqdt = np.sqrt(dt)
    s_grid = dt * np.arange(1, steps + 1)
    hits = 0
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        z = rng.standard_normal((m, steps))
        b = np.cumsum(z, axis=1)
        b *= sqdt
        f = np.exp(b - 0.5 * s_grid)  # integrand at grid points 1..steps
        # trapezoid with f(0) = exp(0) = 1
        integral = dt * (0.5 * (1.0 + f[:, -1]) + np.sum(f[:, :-1], axis=1))
        hits += int(np.count_nonzero(integral <= a))
        done += m
    p = hits / n_paths
    se = np.sqrt(p * (1.0 - p) / n_paths)
    return p, se


if __name__ == "__main__":
    n = int(float(sys.argv[1])) if len(sys.argv) > 1 else 10_000_000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 123457
    p, se = estimate(n, seed)
    print(f"n={n} seed={seed}")
    print(f"Pr(A_1 <= 1) = {p:.8f}  se = {se:.2e}")
