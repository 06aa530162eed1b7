#!/usr/bin/env python3
"""Noiseless error-vs-queries scaling for every algorithm.

Runs each estimator over random amplitudes, bins the normalized errors
against cumulative query counts, fits the power law, and prints the slopes
next to the classical (-1/2) and Heisenberg (-1) reference exponents.
Raw and binned CSVs land in results/.
"""

import argparse
import time
from pathlib import Path

from bayesqae.bench import (
    BenchmarkConfig,
    bin_and_average,
    fit_intercept,
    run_benchmark,
    write_binned_series,
    write_raw_points,
)

SETUPS = {
    "bae": dict(n_trials=30, max_queries=100_000),
    "annealed_bae": dict(n_trials=30, max_queries=100_000),
    "classical": dict(n_trials=100),
    "mlae_eis": dict(n_trials=50, mlae_stages=10, mlae_shots=100),
    "mlae_lis": dict(n_trials=50, mlae_stages=32, mlae_shots=100),
    "qae": dict(n_trials=50, qae_k_min=3, qae_k_max=8, qae_shots=100),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--results", type=Path, default=Path("results"))
    args = parser.parse_args()
    args.results.mkdir(exist_ok=True)

    print(f"{'algorithm':>14} {'slope':>8} {'points':>7} {'secs':>6}   reference: SQL -0.5, HL -1.0")
    for name, overrides in SETUPS.items():
        start = time.time()
        config = BenchmarkConfig(algorithm=name, **overrides)
        points = run_benchmark(config, seed=args.seed)
        series = bin_and_average([p.n_queries for p in points],
                                 [p.sq_norm_error for p in points],
                                 [p.norm_std for p in points],
                                 n_bins=config.n_bins)
        fit = fit_intercept(series.x, series.rmse)
        write_raw_points(points, args.results / f"noiseless_{name}_raw.csv")
        write_binned_series(series, args.results / f"noiseless_{name}_binned.csv")
        print(f"{name:>14} {fit.slope:>8.3f} {len(points):>7} {time.time() - start:>6.1f}")


if __name__ == "__main__":
    main()
