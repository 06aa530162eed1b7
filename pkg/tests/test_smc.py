import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bayesqae import smc
from bayesqae.model import Datum, grover_likelihood
from bayesqae.smc import (
    DegenerateEnsembleError,
    ParticleEnsemble,
    ResampleConfig,
    average_expected_utility,
    bayesian_update,
    ess,
    evidence,
    expectation,
    expected_outcome_probability,
    hypothetical_posterior,
    liu_west_kernel,
    metropolis_kernel,
    resample,
    uniform_prior_ensemble,
    variance,
    weighted_quantile,
)

THETA_SUPPORT = (0.0, math.pi / 2)
NO_RESAMPLE = ResampleConfig(ess_threshold=1e-9)


def flat_likelihood(positions, control):
    return np.full(len(np.atleast_1d(positions)), 0.5)


def make_ensemble(positions, weights=None):
    positions = np.asarray(positions, dtype=float)
    if weights is None:
        weights = np.full(len(positions), 1.0 / len(positions))
    return ParticleEnsemble(positions=positions, weights=np.asarray(weights, float),
                            support=THETA_SUPPORT)


def amplitude_grid_posterior(data, n_grid=100_000):
    """Riemann-sum posterior over theta with an amplitude-uniform prior."""
    a = (np.arange(n_grid) + 0.5) / n_grid
    theta = np.arcsin(np.sqrt(a))
    log_lik = np.zeros(n_grid)
    for d in data:
        p1 = grover_likelihood()(theta, d.control)
        if d.ones:
            log_lik += d.ones * np.log(p1)
        if d.zeros:
            log_lik += d.zeros * np.log1p(-p1)
    lik = np.exp(log_lik)
    marginal = lik.mean()  # integral of the likelihood over the uniform prior
    w = lik / lik.sum()
    mean = float(theta @ w)
    var = float(theta ** 2 @ w - mean ** 2)
    return mean, var, float(marginal)


def theta_prior_ensemble(n, seed):
    """Amplitude-uniform prior particles (matches the grid oracle's measure)."""
    rng = np.random.default_rng(seed)
    return ParticleEnsemble(positions=np.arcsin(np.sqrt(rng.random(n))),
                            weights=np.full(n, 1.0 / n), support=THETA_SUPPORT), rng


# -- effective sample size ---------------------------------------------------

def test_ess_examples():
    assert ess(np.full(100, 0.01)) == pytest.approx(100.0)
    assert ess([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert ess([0.5, 0.5, 0.0, 0.0]) == pytest.approx(2.0)


def test_ess_all_zero_raises():
    with pytest.raises(DegenerateEnsembleError):
        ess(np.zeros(5))


@given(st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=50)
       .filter(lambda w: sum(w) > 0))
def test_ess_bounds(weights):
    value = ess(weights)
    assert 1.0 - 1e-9 <= value <= len(weights) + 1e-9
    positive = [w for w in weights if w > 0]
    if len(set(positive)) == 1 and len(positive) == len(weights):
        assert value == pytest.approx(len(weights))


# -- Bayesian updates and evidence -------------------------------------------

def test_flat_likelihood_leaves_weights_unchanged():
    ens, rng = theta_prior_ensemble(200, 0)
    before = ens.normalized_weights().copy()
    bayesian_update(ens, flat_likelihood, Datum(control=3, shots=1, ones=1),
                    NO_RESAMPLE, rng)
    assert np.allclose(ens.normalized_weights(), before, atol=1e-15)


def test_deterministic_datum_collapses_weight():
    ens = make_ensemble([0.0, math.pi / 2])
    rng = np.random.default_rng(0)
    bayesian_update(ens, grover_likelihood(), Datum(control=0, shots=1, ones=1),
                    NO_RESAMPLE, rng)
    assert ens.normalized_weights() == pytest.approx([0.0, 1.0])


def test_zero_likelihood_everywhere_raises():
    ens = make_ensemble([0.0, 0.0])
    with pytest.raises(DegenerateEnsembleError):
        bayesian_update(ens, grover_likelihood(), Datum(control=0, shots=1, ones=1),
                        NO_RESAMPLE, np.random.default_rng(0))


def test_posterior_mean_matches_grid_oracle():
    data = [Datum(0, 8, 3), Datum(0, 6, 2), Datum(1, 5, 4)]
    oracle_mean, oracle_var, _ = amplitude_grid_posterior(data)
    means, variances = [], []
    for seed in range(10):
        ens, rng = theta_prior_ensemble(20_000, seed)
        for d in data:
            bayesian_update(ens, grover_likelihood(), d, NO_RESAMPLE, rng)
        means.append(expectation(ens, lambda x: x))
        variances.append(variance(ens))
    assert np.mean(means) == pytest.approx(oracle_mean, rel=1e-2)
    assert np.mean(variances) == pytest.approx(oracle_var, rel=1e-2)


def test_update_order_independent_without_resampling():
    data = [Datum(0, 5, 2), Datum(2, 3, 1), Datum(5, 4, 4), Datum(1, 2, 0)]
    ens_fwd, rng = theta_prior_ensemble(500, 3)
    ens_rev = ParticleEnsemble(positions=ens_fwd.positions.copy(),
                               weights=ens_fwd.weights.copy(), support=THETA_SUPPORT)
    for d in data:
        bayesian_update(ens_fwd, grover_likelihood(), d, NO_RESAMPLE, rng)
    for d in reversed(data):
        bayesian_update(ens_rev, grover_likelihood(), d, NO_RESAMPLE, rng)
    assert np.allclose(ens_fwd.normalized_weights(), ens_rev.normalized_weights(),
                       atol=1e-10)


def test_evidence_single_datum_equals_predictive_probability():
    ens, rng = theta_prior_ensemble(1000, 5)
    datum = Datum(control=2, shots=1, ones=1)
    predictive = expected_outcome_probability(ens, 2, grover_likelihood(), outcome=1)
    bayesian_update(ens, grover_likelihood(), datum, NO_RESAMPLE, rng)
    assert evidence(ens) == pytest.approx(predictive, rel=1e-12)


def test_evidence_flat_likelihood_contributes_its_constant():
    ens, rng = theta_prior_ensemble(100, 1)
    bayesian_update(ens, flat_likelihood, Datum(control=9, shots=1, ones=0),
                    NO_RESAMPLE, rng)
    assert evidence(ens) == pytest.approx(0.5, rel=1e-12)


def test_evidence_two_data_matches_grid_quadrature():
    data = [Datum(0, 4, 1), Datum(3, 2, 2)]
    _, _, oracle = amplitude_grid_posterior(data)
    values = []
    for seed in range(10):
        ens, rng = theta_prior_ensemble(4000, seed)
        for d in data:
            bayesian_update(ens, grover_likelihood(), d, NO_RESAMPLE, rng)
        values.append(evidence(ens))
    assert np.mean(values) == pytest.approx(oracle, rel=1e-2)


def test_evidence_requires_an_update():
    ens, _ = theta_prior_ensemble(10, 0)
    assert ens.log_evidence == 0.0  # empty-product convention
    with pytest.raises(RuntimeError):
        evidence(ens)


# -- resampling kernels -------------------------------------------------------

def test_resample_point_mass_liu_west_alpha_one():
    ens = make_ensemble([0.3, 0.7, 1.1], weights=[0.0, 1.0, 0.0])
    resample(ens, ResampleConfig(kernel="liu_west", alpha=1.0), np.random.default_rng(0))
    assert np.all(ens.positions == 0.7)
    assert ens.weights == pytest.approx(np.full(3, 1 / 3))


def test_resample_preserves_moments():
    ens, rng = theta_prior_ensemble(2000, 11)
    bayesian_update(ens, grover_likelihood(), Datum(0, 30, 12), NO_RESAMPLE, rng)
    mean0, std0 = ens.mean(), ens.std()
    means, stds = [], []
    for rep in range(100):
        copy = ParticleEnsemble(positions=ens.positions.copy(),
                                weights=ens.weights.copy(), support=THETA_SUPPORT)
        resample(copy, ResampleConfig(kernel="liu_west", alpha=0.98),
                 np.random.default_rng(rep))
        means.append(copy.mean())
        stds.append(copy.std())
    for observed, target in ((means, mean0), (stds, std0)):
        stderr = np.std(observed) / math.sqrt(len(observed))
        assert abs(np.mean(observed) - target) <= 5 * stderr


def test_resample_resets_weights_uniform():
    ens, rng = theta_prior_ensemble(50, 2)
    bayesian_update(ens, grover_likelihood(), Datum(0, 10, 9), NO_RESAMPLE, rng)
    resample(ens, ResampleConfig(), rng)
    assert ens.weights == pytest.approx(np.full(50, 0.02))


def test_liu_west_alpha_one_is_identity():
    positions = np.array([0.1, 0.5, 1.2])
    out = liu_west_kernel(positions, 0.6, 0.2, 1.0, THETA_SUPPORT,
                          np.random.default_rng(0))
    assert out == pytest.approx(positions)


def test_liu_west_alpha_zero_draws_from_moment_matched_gaussian():
    rng = np.random.default_rng(4)
    out = liu_west_kernel(np.full(20_000, 0.3), 0.8, 0.05, 0.0, THETA_SUPPORT, rng)
    assert np.mean(out) == pytest.approx(0.8, abs=5 * 0.05 / math.sqrt(20_000))
    assert np.std(out) == pytest.approx(0.05, rel=0.05)


def test_liu_west_mean_shrinks_towards_ensemble_mean():
    rng = np.random.default_rng(9)
    alpha, pos, mean, std = 0.7, 0.2, 1.0, 0.1
    out = liu_west_kernel(np.full(20_000, pos), mean, std, alpha, THETA_SUPPORT, rng)
    target = alpha * pos + (1 - alpha) * mean
    sigma = math.sqrt(1 - alpha ** 2) * std
    assert np.mean(out) == pytest.approx(target, abs=5 * sigma / math.sqrt(20_000))


def test_liu_west_reflects_into_support():
    rng = np.random.default_rng(0)
    out = liu_west_kernel(np.full(1000, 1.5), 1.5, 0.5, 0.5, THETA_SUPPORT, rng)
    assert np.all(out >= 0.0) and np.all(out <= math.pi / 2)


def test_metropolis_always_accepts_improving_moves():
    # current positions have zero likelihood; any finite-likelihood proposal wins
    dataset = [Datum(control=0, shots=1, ones=1)]
    positions = np.zeros(200)  # L(theta=0 | outcome 1, m=0) = 0
    out = metropolis_kernel(positions, dataset, grover_likelihood(), 0.3,
                            THETA_SUPPORT, np.random.default_rng(0))
    assert np.all(out != 0.0)


def test_metropolis_always_rejects_zero_likelihood_proposals():
    start = np.linspace(0.2, 1.2, 100)

    def spiked(positions, control):
        # only the exact starting points carry likelihood
        return np.where(np.isin(positions, start), 1.0, 0.0)

    out = metropolis_kernel(start.copy(), [Datum(0, 1, 1)], spiked, 0.1,
                            THETA_SUPPORT, np.random.default_rng(1))
    assert out == pytest.approx(start)


def test_metropolis_leaves_posterior_invariant():
    # uniform-in-theta prior: the kernel's likelihood target IS the posterior
    data = [Datum(1, 4, 3), Datum(2, 3, 1)]
    grid = np.linspace(0.0, math.pi / 2, 20_001)[1:-1]
    lik = np.ones_like(grid)
    for d in data:
        p1 = grover_likelihood()(grid, d.control)
        lik *= p1 ** d.ones * (1 - p1) ** d.zeros
    pdf = lik / lik.sum()
    rng = np.random.default_rng(12)
    start = np.interp(rng.random(4000), np.cumsum(pdf), grid)  # inverse-CDF samples
    out = metropolis_kernel(start, data, grover_likelihood(), 0.25, THETA_SUPPORT,
                            rng, steps=30)
    edges = np.linspace(0.0, math.pi / 2, 11)
    observed, _ = np.histogram(out, bins=edges)
    expected = len(out) * np.add.reduceat(pdf, np.searchsorted(grid, edges[:-1]))
    expected *= observed.sum() / expected.sum()
    assert stats.chisquare(observed, expected).pvalue > 1e-3


# -- expectations and look-ahead ----------------------------------------------

def test_expectation_examples():
    ens = make_ensemble([0.2, 0.4])
    assert expectation(ens, lambda x: np.ones_like(x)) == pytest.approx(1.0)
    assert expectation(ens, lambda x: x) == pytest.approx(0.3)
    assert variance(ens) == pytest.approx(0.01)


def test_variance_matches_grid_oracle():
    data = [Datum(0, 12, 5)]
    _, oracle_var, _ = amplitude_grid_posterior(data)
    values = []
    for seed in range(10):
        ens, rng = theta_prior_ensemble(20_000, seed)
        bayesian_update(ens, grover_likelihood(), data[0], NO_RESAMPLE, rng)
        values.append(variance(ens))
    assert np.mean(values) == pytest.approx(oracle_var, rel=1e-2)


def test_expected_outcome_probability_cases():
    single = make_ensemble([0.6])
    lik = grover_likelihood()
    assert expected_outcome_probability(single, 3, lik) == pytest.approx(
        float(lik(np.array([0.6]), 3)[0]))
    decohered = grover_likelihood(coherence_time=1e-9)
    ens = make_ensemble([0.2, 1.0])
    assert expected_outcome_probability(ens, 50, decohered) == pytest.approx(0.5)
    # two-particle hand computation
    two = make_ensemble([0.3, 0.9], weights=[0.25, 0.75])
    by_hand = 0.25 * math.sin(3 * 0.3) ** 2 + 0.75 * math.sin(3 * 0.9) ** 2
    assert expected_outcome_probability(two, 1, lik) == pytest.approx(by_hand)


def test_average_expected_utility_collapsing_outcomes():
    ens = make_ensemble([0.0, math.pi / 2])
    value = average_expected_utility(ens, lambda e: -variance(e), 0, grover_likelihood())
    assert value == pytest.approx(0.0, abs=1e-15)


def test_average_expected_utility_flat_control_keeps_prior_variance():
    ens = make_ensemble([0.2, 0.5, 1.1])
    decohered = grover_likelihood(coherence_time=1e-9)
    value = average_expected_utility(ens, lambda e: -variance(e), 100, decohered)
    assert value == pytest.approx(-variance(ens), rel=1e-12)


def test_average_expected_utility_three_particle_brute_force():
    positions = np.array([0.2, 0.7, 1.3])
    weights = np.array([0.2, 0.5, 0.3])
    ens = make_ensemble(positions, weights)
    lik = grover_likelihood()
    m = 2
    total = 0.0
    for outcome in (0, 1):
        p_each = lik(positions, m) if outcome == 1 else 1 - lik(positions, m)
        p_out = float(weights @ p_each)
        post = weights * p_each
        post = post / post.sum()
        mean = positions @ post
        total += p_out * -(positions ** 2 @ post - mean ** 2)
    assert average_expected_utility(ens, lambda e: -variance(e), m, lik) == \
        pytest.approx(total, rel=1e-12)


def test_hypothetical_updates_leave_caller_bit_identical():
    ens, _ = theta_prior_ensemble(300, 8)
    positions_before = ens.positions.copy()
    weights_before = ens.weights.copy()
    log_evidence_before = ens.log_evidence
    average_expected_utility(ens, lambda e: -variance(e), 4, grover_likelihood())
    hypothetical_posterior(ens, grover_likelihood(), Datum(1, 1, 0))
    assert np.array_equal(ens.positions, positions_before)
    assert np.array_equal(ens.weights, weights_before)
    assert ens.log_evidence == log_evidence_before
    assert ens.history == []


# -- plumbing ------------------------------------------------------------------

def test_uniform_prior_ensemble_support():
    ens = uniform_prior_ensemble(500, 2.0, 5.0, np.random.default_rng(0))
    assert np.all(ens.positions > 2.0) and np.all(ens.positions <= 5.0)
    assert ess(ens.weights) == pytest.approx(500)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ParticleEnsemble(positions=np.array([1.0]), weights=np.array([1.0, 2.0]),
                         support=THETA_SUPPORT)
    with pytest.raises(ValueError):
        ParticleEnsemble(positions=np.array([1.0]), weights=np.array([-1.0]),
                         support=THETA_SUPPORT)
    with pytest.raises(DegenerateEnsembleError):
        ParticleEnsemble(positions=np.array([1.0]), weights=np.array([0.0]),
                         support=THETA_SUPPORT)


def test_resample_config_validation():
    with pytest.raises(ValueError):
        ResampleConfig(kernel="bogus")
    with pytest.raises(ValueError):
        ResampleConfig(alpha=0.0)
    with pytest.raises(ValueError):
        ResampleConfig(steps=0)
    assert ResampleConfig().threshold_for(1000) == 500


def test_weighted_quantile_median_of_uniform_weights():
    values = np.array([1.0, 2.0, 3.0, 4.0])
    weights = np.full(4, 0.25)
    median = weighted_quantile(values, weights, 0.5)
    assert 2.0 <= median <= 3.0


@settings(max_examples=30)
@given(st.integers(min_value=2, max_value=200))
def test_resample_triggered_by_low_ess_threshold(n):
    ens = make_ensemble(np.linspace(0.1, 1.4, n))
    rng = np.random.default_rng(0)
    config = ResampleConfig(ess_threshold=float(n))  # always triggers
    bayesian_update(ens, grover_likelihood(), Datum(0, 2, 1), config, rng)
    assert ens.weights == pytest.approx(np.full(n, 1.0 / n))
