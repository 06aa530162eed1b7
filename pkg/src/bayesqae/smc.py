"""Sequential Monte Carlo posterior representation.

A posterior over one parameter (or a small joint vector) is carried by a
weighted particle set.  Updates multiply weights by the datum likelihood;
when the effective sample size degrades the particles are refreshed with a
moment-preserving Liu-West kernel or a random-walk Metropolis kernel.  The
running product of reweighting sums doubles as a marginal-likelihood
(evidence) estimator at no extra cost.

Likelihood callables have signature ``likelihood(positions, control) ->
outcome-1 probability array``; multi-shot data enter as a single binomial
weight multiplication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Datum


class DegenerateEnsembleError(RuntimeError):
    """Raised when every particle weight collapses to zero."""


@dataclass
class ResampleConfig:
    """Resampling kernel choice and trigger threshold.

    ``ess_threshold`` is an absolute effective-sample-size value; ``None``
    means half the particle count.
    """

    kernel: str = "liu_west"
    alpha: float = 0.98
    steps: int = 1
    ess_threshold: float | None = None

    def __post_init__(self):
        if self.kernel not in ("liu_west", "metropolis"):
            raise ValueError(f"unknown resampling kernel {self.kernel!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("liu_west alpha must lie in (0, 1]")
        if self.steps < 1:
            raise ValueError("metropolis steps must be >= 1")
        if self.ess_threshold is not None and self.ess_threshold <= 0:
            raise ValueError("ess_threshold must be positive")

    def threshold_for(self, n_particles: int) -> float:
        thr = self.ess_threshold if self.ess_threshold is not None else n_particles / 2
        if thr > n_particles:
            raise ValueError("ess_threshold exceeds particle count")
        return thr


@dataclass
class ParticleEnsemble:
    """Weighted particles over parameter space, plus evidence bookkeeping.

    ``positions`` has shape (N,) for one parameter or (N, d) for a joint
    posterior.  ``support`` holds the prior bounds (lo, hi), broadcastable
    against a position.  ``history`` records every assimilated datum; the
    Metropolis kernel needs it to evaluate full-dataset likelihoods.
    """

    positions: np.ndarray
    weights: np.ndarray
    support: tuple
    log_evidence: float = 0.0
    n_updates: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.positions) != len(self.weights):
            raise ValueError("positions and weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if not np.any(self.weights > 0):
            raise DegenerateEnsembleError("all particle weights are zero")

    def __len__(self):
        return len(self.weights)

    @property
    def dim(self) -> int:
        return 1 if self.positions.ndim == 1 else self.positions.shape[1]

    def normalized_weights(self) -> np.ndarray:
        total = self.weights.sum()
        if total <= 0 or not np.isfinite(total):
            raise DegenerateEnsembleError("weights do not normalize")
        return self.weights / total

    def mean(self):
        w = self.normalized_weights()
        return self.positions.T @ w if self.positions.ndim > 1 else float(w @ self.positions)

    def std(self):
        w = self.normalized_weights()
        if self.positions.ndim > 1:
            m = self.positions.T @ w
            var = (self.positions.T ** 2) @ w - m ** 2
            return np.sqrt(np.maximum(var, 0.0))
        m = w @ self.positions
        var = w @ self.positions ** 2 - m ** 2
        return math.sqrt(max(var, 0.0))


def uniform_prior_ensemble(n_particles: int, lo: float, hi: float,
                           rng: np.random.Generator) -> ParticleEnsemble:
    """Particles drawn uniformly on (lo, hi] with uniform weights."""
    if n_particles < 1:
        raise ValueError("need at least one particle")
    positions = hi - rng.random(n_particles) * (hi - lo)
    weights = np.full(n_particles, 1.0 / n_particles)
    return ParticleEnsemble(positions=positions, weights=weights, support=(lo, hi))


def ess(weights) -> float:
    """Effective sample size (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float)
    peak = w.max() if w.size else 0.0
    if peak <= 0:
        raise DegenerateEnsembleError("all particle weights are zero")
    w = w / peak  # scale invariant; avoids underflow of squared tiny weights
    return float(w.sum() ** 2 / (w ** 2).sum())


def _datum_log_likelihood(positions, likelihood, datum: Datum) -> np.ndarray:
    """Per-particle log binomial likelihood (without the counting constant)."""
    p1 = np.asarray(likelihood(positions, datum.control), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logl = np.where(datum.ones > 0, datum.ones * np.log(p1), 0.0)
        logl = logl + np.where(datum.zeros > 0, datum.zeros * np.log1p(-p1), 0.0)
    return logl


def _reweight(ensemble: ParticleEnsemble, likelihood, datum: Datum):
    """New normalized weights and the log reweighting sum for one datum."""
    w = ensemble.normalized_weights()
    logl = _datum_log_likelihood(ensemble.positions, likelihood, datum)
    logw = np.full_like(w, -np.inf)
    np.log(w, where=w > 0, out=logw)
    logw = logw + logl
    peak = np.max(logw)
    if not np.isfinite(peak):
        raise DegenerateEnsembleError("datum has zero likelihood at every particle")
    unnorm = np.exp(logw - peak)
    total = unnorm.sum()
    log_total = peak + math.log(total)
    return unnorm / total, log_total


def bayesian_update(ensemble: ParticleEnsemble, likelihood, datum: Datum,
                    config: ResampleConfig, rng: np.random.Generator) -> ParticleEnsemble:
    """Assimilate one datum in place; resample if the ESS falls below threshold.

    Weights are multiplied by the binomial likelihood of the datum and
    renormalized; the evidence accumulator gains the log of the reweighting
    sum.  Returns the (mutated) ensemble.
    """
    new_weights, log_total = _reweight(ensemble, likelihood, datum)
    ensemble.weights = new_weights
    ensemble.log_evidence += log_total
    ensemble.n_updates += 1
    ensemble.history.append(datum)
    if ess(ensemble.weights) < config.threshold_for(len(ensemble)):
        resample(ensemble, config, rng, likelihood=likelihood)
    return ensemble


def hypothetical_posterior(ensemble: ParticleEnsemble, likelihood, datum: Datum) -> ParticleEnsemble:
    """Posterior after a would-be datum, without touching the input ensemble.

    Never resamples and keeps no history; positions are shared with the
    caller's ensemble (the update only reweights).
    """
    new_weights, _ = _reweight(ensemble, likelihood, datum)
    return ParticleEnsemble(positions=ensemble.positions, weights=new_weights,
                            support=ensemble.support)


def _reflect(values, support):
    """Fold values back into [lo, hi] by reflection at the boundaries."""
    lo, hi = (np.asarray(b, dtype=float) for b in support)
    span = hi - lo
    folded = np.mod(values - lo, 2.0 * span)
    folded = np.where(folded > span, 2.0 * span - folded, folded)
    return lo + folded


def liu_west_kernel(positions, mean, std, alpha, support, rng: np.random.Generator):
    """Moment-preserving perturbation: N(alpha*x + (1-alpha)*mean, sqrt(1-alpha^2)*std).

    Draws are reflected back into the prior support.  alpha = 1 is the
    identity on positions.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    positions = np.asarray(positions, dtype=float)
    loc = alpha * positions + (1.0 - alpha) * np.asarray(mean)
    scale = math.sqrt(max(1.0 - alpha * alpha, 0.0)) * np.asarray(std)
    draws = rng.normal(loc, np.broadcast_to(scale, loc.shape))
    return _reflect(draws, support)


def _dataset_log_likelihood(positions, dataset, likelihood) -> np.ndarray:
    total = np.zeros(len(positions))
    for datum in dataset:
        total = total + _datum_log_likelihood(positions, likelihood, datum)
    return total


def metropolis_kernel(positions, dataset, likelihood, proposal_std, support,
                      rng: np.random.Generator, steps: int = 1):
    """Random-walk Metropolis moves targeting the dataset likelihood.

    Gaussian proposals (reflected into the support, which keeps them
    symmetric) are accepted with probability min(1, L(x')/L(x)); rejected
    particles keep their position.
    """
    if not dataset:
        raise ValueError("metropolis kernel requires a nonempty dataset")
    positions = np.asarray(positions, dtype=float).copy()
    cur_logl = _dataset_log_likelihood(positions, dataset, likelihood)
    for _ in range(steps):
        noise = rng.normal(0.0, 1.0, size=positions.shape) * np.asarray(proposal_std)
        proposal = _reflect(positions + noise, support)
        prop_logl = _dataset_log_likelihood(proposal, dataset, likelihood)
        with np.errstate(invalid="ignore", divide="ignore"):
            log_ratio = prop_logl - cur_logl
            accept = np.log(rng.random(len(positions))) < log_ratio
        if positions.ndim > 1:
            positions[accept] = proposal[accept]
        else:
            positions = np.where(accept, proposal, positions)
        cur_logl = np.where(accept, prop_logl, cur_logl)
    return positions


def resample(ensemble: ParticleEnsemble, config: ResampleConfig,
             rng: np.random.Generator, likelihood=None) -> ParticleEnsemble:
    """Redraw positions with probability proportional to weight, then perturb.

    Kernel moments (Liu-West) and the Metropolis proposal scale come from
    the weighted ensemble before redrawing.  Weights reset to uniform.
    """
    n = len(ensemble)
    weights = ensemble.normalized_weights()
    mean, std = ensemble.mean(), ensemble.std()
    picks = rng.choice(n, size=n, p=weights)
    chosen = ensemble.positions[picks]
    if config.kernel == "liu_west":
        new_positions = liu_west_kernel(chosen, mean, std, config.alpha,
                                        ensemble.support, rng)
    else:
        if likelihood is None:
            raise ValueError("metropolis resampling needs the likelihood")
        proposal_std = 2.38 / math.sqrt(ensemble.dim) * np.asarray(std)
        new_positions = metropolis_kernel(chosen, ensemble.history, likelihood,
                                          proposal_std, ensemble.support, rng,
                                          steps=config.steps)
    ensemble.positions = new_positions
    ensemble.weights = np.full(n, 1.0 / n)
    return ensemble


def expectation(ensemble: ParticleEnsemble, f) -> float:
    """Weighted posterior expectation of ``f(position)``."""
    w = ensemble.normalized_weights()
    return float(np.asarray(f(ensemble.positions), dtype=float) @ w)


def variance(ensemble: ParticleEnsemble, f=None) -> float:
    """Posterior variance of ``f(position)`` (identity by default)."""
    vals = ensemble.positions if f is None else np.asarray(f(ensemble.positions), dtype=float)
    w = ensemble.normalized_weights()
    m = vals @ w
    return float(vals ** 2 @ w - m ** 2)


def expected_outcome_probability(ensemble: ParticleEnsemble, control, likelihood,
                                 outcome: int = 1) -> float:
    """Predictive probability of an outcome: the likelihood integrated over the posterior."""
    w = ensemble.normalized_weights()
    p1 = np.asarray(likelihood(ensemble.positions, control), dtype=float)
    p = float(p1 @ w)
    return p if outcome == 1 else 1.0 - p


def average_expected_utility(ensemble: ParticleEnsemble, utility_fun, control, likelihood) -> float:
    """Outcome-probability-weighted utility of the hypothetical posteriors.

    Evaluates one look-ahead shot at ``control``: for each binary outcome,
    the utility of the reweighted ensemble, averaged with the predictive
    outcome probabilities.  The caller's ensemble is left untouched.
    """
    total = 0.0
    for outcome in (0, 1):
        p_out = expected_outcome_probability(ensemble, control, likelihood, outcome)
        if p_out <= 0.0:
            continue
        hypo = hypothetical_posterior(ensemble, likelihood,
                                      Datum(control=control, shots=1, ones=outcome))
        total += p_out * utility_fun(hypo)
    return total


def evidence(ensemble: ParticleEnsemble) -> float:
    """Marginal likelihood of the assimilated data (product of reweighting sums)."""
    if ensemble.n_updates == 0:
        raise RuntimeError("no data assimilated yet; evidence is undefined")
    return math.exp(ensemble.log_evidence)


def weighted_quantile(values, weights, q):
    """Quantile(s) of a weighted sample, by inverting the weighted CDF."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return np.interp(q, cdf, v)
