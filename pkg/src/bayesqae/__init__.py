"""Bayesian amplitude estimation with sequential Monte Carlo and adaptive design."""

from .bae import BaeConfig, RunTrace, TraceRecord, estimate_coherence_time, run_annealed_bae, run_bae
from .bench import BenchmarkConfig, bin_and_average, fit_intercept, generate_dummy_hl_data, nrmse, run_benchmark
from .design import DesignWindow, UtilitySpec, init_window, optimize_control
from .model import AmplitudeModel, Datum, angle_from_amplitude, amplitude_from_angle, ideal_likelihood, noisy_likelihood, query_cost, simulate_measurement
from .reference import MlaeSchedule, QpeConfig, qae_outcome_distribution, qpe_outcome_distribution, run_canonical_qae, run_classical_baseline, run_mlae
from .smc import ParticleEnsemble, ResampleConfig, bayesian_update, ess, evidence, expectation, resample

__all__ = [
    "AmplitudeModel", "BaeConfig", "BenchmarkConfig", "Datum", "DesignWindow",
    "MlaeSchedule", "ParticleEnsemble", "QpeConfig", "ResampleConfig", "RunTrace",
    "TraceRecord", "UtilitySpec", "amplitude_from_angle", "angle_from_amplitude",
    "bayesian_update", "bin_and_average", "ess", "estimate_coherence_time",
    "evidence", "expectation", "fit_intercept", "generate_dummy_hl_data",
    "ideal_likelihood", "init_window", "noisy_likelihood", "nrmse",
    "optimize_control", "qae_outcome_distribution", "qpe_outcome_distribution",
    "query_cost", "resample", "run_annealed_bae", "run_bae", "run_benchmark",
    "run_canonical_qae", "run_classical_baseline", "run_mlae", "simulate_measurement",
]
