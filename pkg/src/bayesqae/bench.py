"""Benchmark harness, data processing, and the command-line interface.

Benchmarks run an algorithm over randomly sampled amplitudes (and coherence
times), normalize every error by the true amplitude, and emit one raw point
per trace record.  Processing bins the points in log-query space, averages
x and y coordinates independently inside each bin, and fits a power law
whose intercept anchors the standard-quantum-limit and Heisenberg reference
lines.  All randomness flows from a single seed; identical inputs give
byte-identical output files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import get_type_hints

import numpy as np

from . import bae, smc
from .model import AmplitudeModel, INFINITE_COHERENCE
from .reference import MlaeSchedule, run_canonical_qae, run_classical_baseline, run_mlae

ALGORITHMS = ("bae", "annealed_bae", "classical", "qae", "mlae_lis", "mlae_eis")

RAW_COLUMNS = ("run_id", "algorithm", "true_amplitude", "true_T", "n_queries",
               "estimate", "sq_norm_error", "norm_std", "seed")
BINNED_COLUMNS = ("bin", "x_mean", "rmse", "std_mean", "n_points")
TRACE_COLUMNS = ("phase", "control", "shots", "ones", "queries", "estimate", "std")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkConfig:
    """Flat configuration covering every subcommand; see README for the schema."""

    algorithm: str = "bae"
    n_trials: int = 10
    n_bins: int = 10
    n_jobs: int = 1
    noisy: bool = False
    t_min: float = 2000.0
    t_max: float = 5000.0
    # single-run truth (run subcommand; amplitude is drawn at random if unset)
    amplitude: float | None = None
    coherence_time: float | None = None
    # adaptive Bayesian runs
    max_queries: int = 100_000
    n_particles: int = 1000
    warmup_shots: int = 100
    shots_per_control: int = 1
    nevals: int = 20
    k0: int = 2
    r_top: int = 2
    t_trigger: int = 3
    resample_kernel: str | None = None  # None: liu_west, or metropolis for annealed_bae
    liu_west_alpha: float = 0.98
    metropolis_steps: int = 2
    ess_threshold: float | None = None
    ess_target: float | None = None
    noise_mode: str | None = None
    known_t: float | None = None
    preest_max_t: float = 10000.0
    preest_shots: int = 500
    preest_times: int = 10
    count_preest_queries: bool = True
    # classical baseline shot sweep (log-spaced)
    classical_shots_min: int = 100
    classical_shots_max: int = 100_000
    classical_shots_points: int = 9
    # canonical QAE sweep
    qae_k_min: int = 3
    qae_k_max: int = 8
    qae_shots: int = 100
    # maximum-likelihood schedules
    mlae_stages: int = 10
    mlae_shots: int = 100
    # dummy Heisenberg-limited data generator
    dummy_points: int = 20_000
    dummy_x_min: float = 100.0
    dummy_x_max: float = 1_000_000.0
    dummy_anchor_x: float = 100.0
    dummy_anchor_sigma: float = 0.1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.noisy and not 0 < self.t_min < self.t_max:
            raise ValueError("noisy benchmarks need 0 < t_min < t_max")


def _coerce(raw: str, annotation):
    optional = getattr(annotation, "__args__", None)
    if optional and type(None) in optional:
        if raw.lower() in ("none", "null", ""):
            return None
        annotation = next(t for t in optional if t is not type(None))
    if annotation is bool:
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if annotation is int:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if annotation is float:
        return float(raw)
    return raw


def load_config(path) -> BenchmarkConfig:
    """Parse a flat ``key = value`` config file (# starts a comment)."""
    text = Path(path).read_text()
    hints = get_type_hints(BenchmarkConfig)
    known = {f.name for f in fields(BenchmarkConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _coerce(raw, hints[key])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return BenchmarkConfig(**values)


def _bae_config(config: BenchmarkConfig) -> bae.BaeConfig:
    noise_mode = config.noise_mode
    if noise_mode is None:
        noise_mode = "pre_estimate" if config.noisy else "none"
    kernel = config.resample_kernel
    if kernel is None:
        # ESS-driven control choice creates transient multimodality that the
        # moment-matched kernel cannot represent; Metropolis re-targets it.
        kernel = "metropolis" if config.algorithm == "annealed_bae" else "liu_west"
    resample = smc.ResampleConfig(kernel=kernel,
                                  alpha=config.liu_west_alpha,
                                  steps=config.metropolis_steps,
                                  ess_threshold=config.ess_threshold)
    return bae.BaeConfig(
        warmup_shots=config.warmup_shots, n_particles=config.n_particles,
        shots_per_control=config.shots_per_control, noise_mode=noise_mode,
        known_t=config.known_t, preest_max_t=config.preest_max_t,
        preest_shots=config.preest_shots, preest_times=config.preest_times,
        count_preest_queries=config.count_preest_queries,
        max_queries=config.max_queries, nevals=config.nevals, k0=config.k0,
        r_top=config.r_top, t_trigger=config.t_trigger, resample=resample)


# ---------------------------------------------------------------------------
# Running algorithms to uniform trace records
# ---------------------------------------------------------------------------

def _classical_shot_grid(config: BenchmarkConfig) -> np.ndarray:
    grid = np.geomspace(config.classical_shots_min, config.classical_shots_max,
                        config.classical_shots_points)
    return np.unique(np.rint(grid).astype(int))


def algorithm_trace(config: BenchmarkConfig, a: float, coherence_time: float, seed):
    """Run one algorithm once and return its records in the shared trace schema."""
    nan = float("nan")
    if config.algorithm in ("bae", "annealed_bae"):
        truth = AmplitudeModel(a=a, coherence_time=coherence_time)
        if config.algorithm == "bae":
            trace = bae.run_bae(_bae_config(config), truth, seed)
        else:
            trace = bae.run_annealed_bae(_bae_config(config), truth, seed,
                                         ess_target=config.ess_target)
        return trace.records
    if config.algorithm == "classical":
        rng = np.random.default_rng(seed)
        records, total = [], 0
        for shots in _classical_shot_grid(config):
            result = run_classical_baseline(a, int(shots), rng)
            total += result.queries
            records.append(bae.TraceRecord("run", 0, result.shots, result.ones,
                                           total, result.estimate, nan))
        return records
    if config.algorithm == "qae":
        if coherence_time != INFINITE_COHERENCE:
            raise ValueError("canonical QAE has no decoherence model; use noisy = false")
        rng = np.random.default_rng(seed)
        records, total = [], 0
        for k in range(config.qae_k_min, config.qae_k_max + 1):
            result = run_canonical_qae(a, k, config.qae_shots, rng)
            total += result.queries
            records.append(bae.TraceRecord("run", 2 ** k, config.qae_shots,
                                           int(result.counts.max()), total,
                                           result.estimate, nan))
        return records
    kind = "lis" if config.algorithm == "mlae_lis" else "eis"
    schedule = MlaeSchedule(kind=kind, stages=config.mlae_stages,
                            shots_per_stage=config.mlae_shots)
    result = run_mlae(a, schedule, seed, coherence_time=coherence_time)
    return [bae.TraceRecord("run", d.control, d.shots, d.ones, q, est, nan)
            for d, q, est in zip(result.data, result.queries, result.estimates)]


@dataclass(frozen=True)
class RawPoint:
    """One benchmark observation: a trace record with its trial context."""

    run_id: int
    algorithm: str
    true_amplitude: float
    true_T: float
    n_queries: int
    estimate: float
    sq_norm_error: float
    norm_std: float
    seed: int


def _run_trial(config: BenchmarkConfig, trial: int, global_seed: int) -> list[RawPoint]:
    entropy = np.random.SeedSequence(entropy=(global_seed, trial))
    trial_seed = int(entropy.generate_state(1)[0])
    rng = np.random.default_rng(entropy)
    a = rng.uniform()
    while a == 0.0:  # NRMSE divides by the true amplitude
        a = rng.uniform()
    coherence_time = rng.uniform(config.t_min, config.t_max) if config.noisy \
        else INFINITE_COHERENCE
    records = algorithm_trace(config, a, coherence_time, rng)
    return [RawPoint(run_id=trial, algorithm=config.algorithm, true_amplitude=a,
                     true_T=coherence_time, n_queries=r.queries, estimate=r.mean_a,
                     sq_norm_error=((a - r.mean_a) / a) ** 2,
                     norm_std=r.std_a / a, seed=trial_seed)
            for r in records]


def run_benchmark(config: BenchmarkConfig, seed: int) -> list[RawPoint]:
    """Run ``n_trials`` independent trials; per-trial failures warn and are skipped."""
    points: list[RawPoint] = []
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            trial_results = pool.map(_run_trial, [config] * config.n_trials,
                                     range(config.n_trials),
                                     [seed] * config.n_trials)
            for trial, result in enumerate(trial_results):
                points.extend(result)
        return points
    for trial in range(config.n_trials):
        try:
            points.extend(_run_trial(config, trial, seed))
        except Exception as exc:  # noqa: BLE001 - a bad trial must not kill the sweep
            warnings.warn(f"trial {trial} failed: {exc}")
    return points


# ---------------------------------------------------------------------------
# Processing: NRMSE, binning, power-law fits, dummy data
# ---------------------------------------------------------------------------

def nrmse(true_amplitudes, estimates) -> float:
    """Root mean squared amplitude-relative error; zero-amplitude entries are dropped."""
    a = np.asarray(true_amplitudes, dtype=float)
    est = np.asarray(estimates, dtype=float)
    keep = a != 0.0
    if not np.all(keep):
        warnings.warn(f"excluding {np.count_nonzero(~keep)} zero-amplitude point(s) from NRMSE")
        a, est = a[keep], est[keep]
    if a.size == 0:
        raise ValueError("no points with nonzero amplitude")
    return float(np.sqrt(np.mean(((a - est) / a) ** 2)))


@dataclass(frozen=True)
class BinSummary:
    index: int
    x_mean: float
    rmse: float
    std_mean: float
    n_points: int


@dataclass
class BinnedSeries:
    """Per-bin summaries ordered by mean query count; empty bins are omitted."""

    bins: list

    @property
    def x(self) -> np.ndarray:
        return np.array([b.x_mean for b in self.bins])

    @property
    def rmse(self) -> np.ndarray:
        return np.array([b.rmse for b in self.bins])

    @property
    def std(self) -> np.ndarray:
        return np.array([b.std_mean for b in self.bins])


def bin_and_average(queries, sq_errors, norm_stds=None, n_bins: int = 10,
                    statistic: str = "mean") -> BinnedSeries:
    """Bin points by query count (equal width in log space) and summarize each bin.

    Within a bin, x is the arithmetic mean of the query counts and the error
    summary is the square root of the averaged squared errors -- coordinates
    are averaged independently.  ``statistic="median"`` swaps the y-averages
    for medians.
    """
    x = np.asarray(queries, dtype=float)
    y = np.asarray(sq_errors, dtype=float)
    if x.size == 0:
        raise ValueError("no points to bin")
    if statistic not in ("mean", "median"):
        raise ValueError(f"unknown statistic {statistic!r}")
    stds = np.full_like(x, np.nan) if norm_stds is None else np.asarray(norm_stds, dtype=float)
    agg = np.mean if statistic == "mean" else np.median

    lo, hi = np.log(x.min()), np.log(x.max())
    if lo == hi:
        membership = np.zeros(x.size, dtype=int)
        n_bins = 1
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
        membership = np.clip(np.searchsorted(edges, np.log(x), side="right") - 1,
                             0, n_bins - 1)
    bins = []
    for index in range(n_bins):
        mask = membership == index
        if not np.any(mask):
            continue
        in_bin = stds[mask]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN std bins
            std_summary = math.sqrt(float(np.nanmean(in_bin ** 2))) \
                if statistic == "mean" else math.sqrt(float(np.nanmedian(in_bin ** 2)))
        bins.append(BinSummary(index=index, x_mean=float(np.mean(x[mask])),
                               rmse=math.sqrt(float(agg(y[mask]))),
                               std_mean=std_summary,
                               n_points=int(np.count_nonzero(mask))))
    return BinnedSeries(bins=bins)


def generate_dummy_hl_data(n_points: int, x_range, anchor, seed, mu: float = 0.0):
    """Synthetic points with E[y | x] proportional to 1/x^2 (ideal Heisenberg trend).

    x is log-uniform over ``x_range``; y = (z - mu)^2 with z ~ N(mu, c/x) and
    c fixed so that the noise scale at ``anchor[0]`` equals ``anchor[1]``.
    Returns (x, y) arrays.
    """
    x_min, x_max = x_range
    if not 0 < x_min < x_max:
        raise ValueError("x_range must satisfy 0 < x_min < x_max")
    anchor_x, anchor_sigma = anchor
    if anchor_x <= 0 or anchor_sigma <= 0:
        raise ValueError("anchor must have positive coordinates")
    rng = np.random.default_rng(seed)
    x = np.exp(rng.uniform(math.log(x_min), math.log(x_max), n_points))
    sigma = anchor_x * anchor_sigma / x
    z = rng.normal(mu, sigma)
    return x, (z - mu) ** 2


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares power law y = scale * x^slope, anchored at the first point."""

    slope: float
    scale: float
    x0: float
    y0: float

    def sql_reference(self, x):
        return self.y0 * (np.asarray(x, dtype=float) / self.x0) ** -0.5

    def hl_reference(self, x):
        return self.y0 * (np.asarray(x, dtype=float) / self.x0) ** -1.0


def fit_intercept(x, y) -> PowerLawFit:
    """Fit log y against log x and anchor reference lines at the first point.

    Non-positive values cannot enter the log fit and are dropped with a
    warning; at least two distinct x values must remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if not np.all(keep):
        warnings.warn(f"dropping {np.count_nonzero(~keep)} non-positive point(s) from the fit")
        x, y = x[keep], y[keep]
    if np.unique(x).size < 2:
        raise ValueError("power-law fit needs at least two distinct x values")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    scale = math.exp(intercept)
    x0 = float(np.min(x))
    return PowerLawFit(slope=float(slope), scale=scale, x0=x0,
                       y0=scale * x0 ** float(slope))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_raw_points(points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_COLUMNS)
        for p in points:
            writer.writerow([p.run_id, p.algorithm, repr(p.true_amplitude),
                             repr(p.true_T), p.n_queries, repr(p.estimate),
                             repr(p.sq_norm_error), repr(p.norm_std), p.seed])


def read_raw_points(path) -> list[RawPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RAW_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(RAW_COLUMNS)}")
        for row in reader:
            points.append(RawPoint(
                run_id=int(row["run_id"]), algorithm=row["algorithm"],
                true_amplitude=float(row["true_amplitude"]),
                true_T=float(row["true_T"]), n_queries=int(row["n_queries"]),
                estimate=float(row["estimate"]),
                sq_norm_error=float(row["sq_norm_error"]),
                norm_std=float(row["norm_std"]), seed=int(row["seed"])))
    return points


def write_binned_series(series: BinnedSeries, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BINNED_COLUMNS)
        for b in series.bins:
            writer.writerow([b.index, repr(b.x_mean), repr(b.rmse),
                             repr(b.std_mean), b.n_points])


def write_trace(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([r.phase, r.control, r.shots, r.ones, r.queries,
                             repr(r.mean_a), repr(r.std_a)])


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------

def _cmd_run(config: BenchmarkConfig, seed: int, out: str) -> int:
    rng = np.random.default_rng(seed)
    a = config.amplitude if config.amplitude is not None else float(rng.uniform())
    coherence = config.coherence_time if config.coherence_time is not None \
        else INFINITE_COHERENCE
    records = algorithm_trace(config, a, coherence, rng)
    write_trace(records, out)
    last = records[-1]
    print(json.dumps({"algorithm": config.algorithm, "true_amplitude": a,
                      "estimate": last.mean_a, "queries": last.queries}))
    return 0


def _cmd_bench(config: BenchmarkConfig, seed: int, out: str) -> int:
    points = run_benchmark(config, seed)
    if not points:
        raise ValueError("benchmark produced no points")
    write_raw_points(points, out)
    print(json.dumps({"algorithm": config.algorithm, "trials": config.n_trials,
                      "points": len(points), "out": str(out)}))
    return 0


def _cmd_process(config: BenchmarkConfig, args, out: str) -> int:
    points = read_raw_points(args.input)
    if not points:
        raise ValueError(f"no points in {args.input}")
    queries = [p.n_queries for p in points]
    sq_errors = [p.sq_norm_error for p in points]
    stds = [p.norm_std for p in points]
    statistic = "median" if args.median else "mean"
    series = bin_and_average(queries, sq_errors, stds, n_bins=config.n_bins,
                             statistic=statistic)
    write_binned_series(series, out)
    fit = fit_intercept(series.x, series.rmse)
    print(json.dumps({"n_points": len(points), "n_bins": len(series.bins),
                      "statistic": statistic, "slope": fit.slope,
                      "scale": fit.scale, "x0": fit.x0, "y0": fit.y0}))
    return 0


def _cmd_dummy(config: BenchmarkConfig, seed: int, out: str) -> int:
    x, y = generate_dummy_hl_data(config.dummy_points,
                                  (config.dummy_x_min, config.dummy_x_max),
                                  (config.dummy_anchor_x, config.dummy_anchor_sigma),
                                  seed)
    nan = float("nan")
    points = [RawPoint(run_id=i, algorithm="dummy_hl", true_amplitude=nan,
                       true_T=INFINITE_COHERENCE, n_queries=int(round(xi)),
                       estimate=nan, sq_norm_error=float(yi), norm_std=nan,
                       seed=seed)
              for i, (xi, yi) in enumerate(zip(x, y))]
    write_raw_points(points, out)
    print(json.dumps({"points": len(points), "out": str(out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global RNG seed")
    common.add_argument("--config", type=str, default=None,
                        help="flat key = value config file")
    common.add_argument("--out", type=str, required=True, help="output file path")

    parser = argparse.ArgumentParser(
        prog="bayesqae",
        description="Amplitude-estimation benchmarks: run, bench, process, dummy.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common],
                   help="single algorithm run; writes the trace CSV")
    sub.add_parser("bench", parents=[common],
                   help="multi-trial benchmark; writes the raw points CSV")
    process = sub.add_parser("process", parents=[common],
                             help="bin raw points, fit the power law")
    process.add_argument("input", help="raw points CSV produced by bench/dummy")
    process.add_argument("--median", action="store_true",
                         help="summarize bins with medians instead of means")
    sub.add_parser("dummy", parents=[common],
                   help="generate Heisenberg-limited dummy points")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else BenchmarkConfig()
        if args.command == "run":
            return _cmd_run(config, args.seed, args.out)
        if args.command == "bench":
            return _cmd_bench(config, args.seed, args.out)
        if args.command == "process":
            return _cmd_process(config, args, args.out)
        return _cmd_dummy(config, args.seed, args.out)
    except (ValueError, OSError, smc.DegenerateEnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
