"""Adaptive Bayesian amplitude estimation runs.

A run owns one particle posterior over the Grover angle and drives it
through three phases: an optional coherence-time pre-estimation from decay
probes, a classical warm-up of non-amplified shots, and the adaptive loop
where each circuit depth is chosen by look-ahead utility maximization.  The
annealed variant swaps the variance utility for an ESS-target utility and
is otherwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import design, smc
from .model import (
    AmplitudeModel,
    INFINITE_COHERENCE,
    decay_probe_likelihood,
    grover_likelihood,
    query_cost,
    simulate_decay_measurement,
    simulate_measurement,
)

THETA_SUPPORT = (0.0, math.pi / 2)


@dataclass
class BaeConfig:
    """Hyperparameters of one estimation run.

    Exactly one of ``max_queries``, ``max_iterations``, ``target_std`` must
    be set.  ``noise_mode`` selects how decoherence enters the inference
    likelihood: ``"none"`` (ideal model), ``"known"`` (fixed ``known_t``) or
    ``"pre_estimate"`` (learn T from decay probes first, then freeze it at
    the posterior mean).
    """

    warmup_shots: int = 100
    n_particles: int = 1000
    shots_per_control: int = 1
    noise_mode: str = "none"
    known_t: float | None = None
    preest_max_t: float = 10000.0
    preest_shots: int = 500
    preest_times: int = 10
    count_preest_queries: bool = True
    max_queries: int | None = None
    max_iterations: int | None = None
    target_std: float | None = None
    utility: design.UtilitySpec = field(default_factory=design.UtilitySpec)
    nevals: int = 20
    k0: int = 2
    r_top: int = 2
    t_trigger: int = 3
    resample: smc.ResampleConfig = field(default_factory=smc.ResampleConfig)

    def __post_init__(self):
        active = [t for t in (self.max_queries, self.max_iterations, self.target_std)
                  if t is not None]
        if len(active) != 1:
            raise ValueError("exactly one termination rule must be set")
        if self.noise_mode not in ("none", "known", "pre_estimate"):
            raise ValueError(f"unknown noise mode {self.noise_mode!r}")
        if self.noise_mode == "known" and (self.known_t is None or self.known_t <= 0):
            raise ValueError("noise_mode 'known' requires a positive known_t")
        if self.noise_mode == "pre_estimate":
            if self.preest_max_t <= 0:
                raise ValueError("pre-estimation requires a positive preest_max_t")
            if self.preest_shots < self.preest_times:
                raise ValueError("need at least one shot per pre-estimation time")
        if self.warmup_shots < 1 or self.shots_per_control < 1:
            raise ValueError("shot counts must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    """State after one assimilation step."""

    phase: str          # "preest" | "warmup" | "adapt"
    control: float
    shots: int
    ones: int
    queries: int        # cumulative over the run
    mean_a: float
    std_a: float


@dataclass
class RunTrace:
    """Per-step history and final summary of a run."""

    records: list
    estimate: float
    std: float
    log_evidence: float
    seed: object
    coherence_estimate: float | None = None
    aborted: bool = False
    posterior: smc.ParticleEnsemble | None = None

    @property
    def queries(self) -> int:
        return self.records[-1].queries if self.records else 0


def uniform_amplitude_prior(n_particles: int, rng: np.random.Generator) -> smc.ParticleEnsemble:
    """Angle particles whose implied amplitude is uniform on [0, 1)."""
    a = rng.random(n_particles)
    positions = np.arcsin(np.sqrt(a))
    weights = np.full(n_particles, 1.0 / n_particles)
    return smc.ParticleEnsemble(positions=positions, weights=weights, support=THETA_SUPPORT)


def amplitude_mean_std(ensemble: smc.ParticleEnsemble) -> tuple[float, float]:
    """Posterior mean and standard deviation of the amplitude sin^2(theta)."""
    theta = ensemble.positions if ensemble.positions.ndim == 1 else ensemble.positions[:, 0]
    a_vals = np.sin(theta) ** 2
    w = ensemble.normalized_weights()
    mean = float(a_vals @ w)
    var = float(a_vals ** 2 @ w - mean ** 2)
    return mean, math.sqrt(max(var, 0.0))


def amplitude_credible_interval(ensemble: smc.ParticleEnsemble, level: float = 0.9):
    """Central credible interval of the amplitude posterior."""
    theta = ensemble.positions if ensemble.positions.ndim == 1 else ensemble.positions[:, 0]
    a_vals = np.sin(theta) ** 2
    tail = (1.0 - level) / 2.0
    lo, hi = smc.weighted_quantile(a_vals, ensemble.normalized_weights(), [tail, 1.0 - tail])
    return float(lo), float(hi)


def estimate_coherence_time(max_t: float, shots: int, n_times: int,
                            truth: AmplitudeModel, seed,
                            n_particles: int = 1000,
                            resample: smc.ResampleConfig | None = None) -> smc.ParticleEnsemble:
    """Posterior over the coherence time from uniformly spaced decay probes.

    ``shots`` measurements are split evenly over ``n_times`` evolution times
    in (0, max_t] and assimilated in descending-time order (short times carry
    the steepest information, so they are taken last).  The prior is uniform
    on (0, max_t].
    """
    if max_t <= 0:
        raise ValueError("max_t must be positive")
    if shots < n_times or n_times < 1:
        raise ValueError("need at least one shot per evolution time")
    rng = np.random.default_rng(seed)
    config = resample if resample is not None else smc.ResampleConfig()
    ensemble = smc.uniform_prior_ensemble(n_particles, 1e-9 * max_t, max_t, rng)

    times = max_t * np.arange(1, n_times + 1) / n_times
    per_time = np.full(n_times, shots // n_times)
    per_time[: shots % n_times] += 1
    data = [simulate_decay_measurement(truth, float(t), int(k), rng)
            for t, k in zip(times, per_time)]

    likelihood = decay_probe_likelihood()
    for datum in sorted(data, key=lambda d: -d.control):
        smc.bayesian_update(ensemble, likelihood, datum, config, rng)
    return ensemble


def run_bae(config: BaeConfig, truth: AmplitudeModel, seed) -> RunTrace:
    """Execute one full adaptive estimation run.

    Identical ``(config, truth, seed)`` give a bit-identical trace.  A
    collapsed ensemble aborts the run, returning the partial trace with
    ``aborted=True``.
    """
    rng = np.random.default_rng(seed)
    records: list[TraceRecord] = []
    queries = 0

    ensemble = uniform_amplitude_prior(config.n_particles, rng)
    mean_a, std_a = amplitude_mean_std(ensemble)

    coherence_estimate = None
    if config.noise_mode == "known":
        model_t = config.known_t
    elif config.noise_mode == "pre_estimate":
        t_posterior = estimate_coherence_time(
            config.preest_max_t, config.preest_shots, config.preest_times,
            truth, rng, n_particles=config.n_particles, resample=config.resample)
        coherence_estimate = model_t = t_posterior.mean()
        if config.count_preest_queries:
            for datum in t_posterior.history:
                queries += query_cost(datum.control, datum.shots)
                records.append(TraceRecord("preest", datum.control, datum.shots,
                                           datum.ones, queries, mean_a, std_a))
    else:
        model_t = INFINITE_COHERENCE
    likelihood = grover_likelihood(model_t)

    def finish(aborted=False):
        est, est_std = amplitude_mean_std(ensemble)
        return RunTrace(records=records, estimate=est, std=est_std,
                        log_evidence=ensemble.log_evidence, seed=seed,
                        coherence_estimate=coherence_estimate, aborted=aborted,
                        posterior=ensemble)

    try:
        datum = simulate_measurement(truth, 0, config.warmup_shots, rng)
        smc.bayesian_update(ensemble, likelihood, datum, config.resample, rng)
        queries += query_cost(0, config.warmup_shots)
        mean_a, std_a = amplitude_mean_std(ensemble)
        records.append(TraceRecord("warmup", 0, datum.shots, datum.ones,
                                   queries, mean_a, std_a))

        window = design.init_window(config.nevals, config.k0, config.r_top,
                                    config.t_trigger)
        iterations = 0
        while True:
            if config.max_queries is not None and queries >= config.max_queries:
                break
            if config.max_iterations is not None and iterations >= config.max_iterations:
                break
            if config.target_std is not None and std_a <= config.target_std:
                break
            control, window = design.optimize_control(ensemble, window,
                                                      config.utility, likelihood)
            datum = simulate_measurement(truth, control, config.shots_per_control, rng)
            smc.bayesian_update(ensemble, likelihood, datum, config.resample, rng)
            queries += query_cost(control, config.shots_per_control)
            iterations += 1
            mean_a, std_a = amplitude_mean_std(ensemble)
            records.append(TraceRecord("adapt", control, datum.shots, datum.ones,
                                       queries, mean_a, std_a))
    except smc.DegenerateEnsembleError:
        return finish(aborted=True)
    return finish()


def run_annealed_bae(config: BaeConfig, truth: AmplitudeModel, seed,
                     ess_target: float | None = None) -> RunTrace:
    """Run with the ESS-target utility instead of variance minimization.

    The default target is half the particle count; ESS-threshold resampling
    stays active.  Trace schema is identical to :func:`run_bae`.
    """
    if config.utility.kind == "ess_target" and ess_target is None:
        return run_bae(config, truth, seed)
    target = ess_target if ess_target is not None else config.n_particles / 2
    annealed = replace(config, utility=design.UtilitySpec("ess_target", target))
    return run_bae(annealed, truth, seed)
