"""Reference amplitude-estimation algorithms for benchmarking.

Canonical QFT-based QAE is simulated through its exact outcome distribution
(multinomial sampling plus maximum-likelihood post-processing on a dense
amplitude grid near the modal outcome), alongside the classical sample-mean
baseline and maximum-likelihood estimation over heuristic Grover schedules
(linearly or exponentially increasing circuit depths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .model import (
    AmplitudeModel,
    Datum,
    angle_from_amplitude,
    ideal_likelihood,
    query_cost,
    simulate_measurement,
)

_SIN_EPS = 1e-12  # below this, sin(delta*pi) is treated as the exact-representation case


@dataclass(frozen=True)
class QpeConfig:
    """Auxiliary-register size and shot budget for canonical QAE."""

    k: int
    shots: int = 100

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one auxiliary qubit")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def fourier_order(self) -> int:
        return 2 ** self.k


@dataclass(frozen=True)
class MlaeSchedule:
    """Heuristic circuit-depth schedule: linearly or exponentially increasing."""

    kind: str
    stages: int
    shots_per_stage: int = 100

    def __post_init__(self):
        if self.kind not in ("lis", "eis"):
            raise ValueError(f"schedule kind must be 'lis' or 'eis', got {self.kind!r}")
        if self.stages < 1 or self.shots_per_stage < 1:
            raise ValueError("stages and shots_per_stage must be >= 1")

    def controls(self) -> list[int]:
        if self.kind == "lis":
            return list(range(self.stages))
        return [0] + [2 ** i for i in range(self.stages - 1)]


def _qpe_probability(delta: np.ndarray, order: int) -> np.ndarray:
    """Phase-estimation outcome probability as a function of circular distance."""
    sin_d = np.sin(delta * math.pi)
    sin_kd = np.sin(order * delta * math.pi)
    exact = np.abs(sin_d) < _SIN_EPS
    safe = np.where(exact, 1.0, sin_d)
    return np.where(exact, 1.0, sin_kd ** 2 / (order ** 2 * safe ** 2))


def qpe_outcome_distribution(phi: float, order: int) -> np.ndarray:
    """Outcome probabilities of phase estimation of exp(2*pi*i*phi) at Fourier order K.

    Entry x is sin^2(K*delta*pi) / (K*sin(delta*pi))^2 with delta the circular
    distance |phi - x/K| mod 1, and 1 in the exactly representable case.
    """
    if not 0.0 <= phi < 1.0:
        raise ValueError(f"phase must lie in [0, 1), got {phi}")
    if order < 1:
        raise ValueError("Fourier order must be >= 1")
    xs = np.arange(order)
    delta = np.mod(np.abs(phi - xs / order), 1.0)
    return _qpe_probability(delta, order)


def _wrap_phase(phi: float) -> float:
    wrapped = math.fmod(phi, 1.0)
    if wrapped < 0.0:
        wrapped += 1.0
    return 0.0 if wrapped >= 1.0 else wrapped  # fmod rounding can land on 1.0


def qae_outcome_distribution(theta: float, order: int) -> np.ndarray:
    """Outcome probabilities of canonical QAE at Grover angle theta.

    Both eigenphases +-2*theta are measured with probability 1/2, so this is
    the average of the phase-estimation distributions for theta/pi and
    1 - theta/pi.
    """
    branch = qpe_outcome_distribution(_wrap_phase(theta / math.pi), order)
    mirror = qpe_outcome_distribution(_wrap_phase(-theta / math.pi), order)
    return (branch + mirror) / 2.0


def _qae_log_likelihood(thetas: np.ndarray, observed: np.ndarray, counts: np.ndarray,
                        order: int) -> np.ndarray:
    """Log-likelihood of outcome counts for a grid of candidate angles."""
    phis = thetas[:, None] / math.pi
    xs = observed[None, :] / order
    p = (_qpe_probability(np.mod(np.abs(phis - xs), 1.0), order)
         + _qpe_probability(np.mod(np.abs(1.0 - phis - xs), 1.0), order)) / 2.0
    with np.errstate(divide="ignore"):
        return np.log(p) @ counts


@dataclass(frozen=True)
class QaeResult:
    estimate: float       # maximum-likelihood estimate near the modal outcome
    mode_estimate: float  # amplitude of the modal outcome itself
    queries: int
    counts: np.ndarray = field(repr=False)


def run_canonical_qae(a: float, k: int, shots: int, seed, mle_grid: int = 10_000) -> QaeResult:
    """Simulate canonical QAE and post-process with a local likelihood search.

    Outcomes are multinomial draws from the exact distribution.  The
    amplitude is then searched on a dense grid inside the halfway interval
    between the modal outcome's amplitude and its neighboring representable
    amplitudes.  Query cost is shots * 2^k.
    """
    config = QpeConfig(k=k, shots=shots)
    order = config.fourier_order
    rng = np.random.default_rng(seed)
    theta = angle_from_amplitude(a)
    counts = rng.multinomial(shots, qae_outcome_distribution(theta, order))
    mode = int(np.argmax(counts))

    # Fold onto the representable amplitude ladder a_j = sin^2(pi*j/K), j = 0..K/2.
    j_star = min(mode, order - mode)
    ladder = np.sin(math.pi * np.arange(order // 2 + 1) / order) ** 2
    a_star = float(ladder[j_star])
    lo = 0.0 if j_star == 0 else (a_star + ladder[j_star - 1]) / 2.0
    hi = 1.0 if j_star == order // 2 else (a_star + ladder[j_star + 1]) / 2.0

    grid = np.append(np.linspace(lo, hi, mle_grid), a_star)  # keep the exact mode reachable
    observed = np.flatnonzero(counts)
    loglik = _qae_log_likelihood(np.arcsin(np.sqrt(grid)), observed,
                                 counts[observed].astype(float), order)
    estimate = float(grid[int(np.argmax(loglik))])
    return QaeResult(estimate=estimate, mode_estimate=a_star,
                     queries=shots * order, counts=counts)


@dataclass(frozen=True)
class BaselineResult:
    estimate: float
    queries: int
    ones: int
    shots: int


def run_classical_baseline(a: float, shots: int, seed) -> BaselineResult:
    """Sample-mean estimate from non-amplified measurements; one query per shot."""
    rng = np.random.default_rng(seed)
    truth = AmplitudeModel(a=a)
    datum = simulate_measurement(truth, 0, shots, rng)
    return BaselineResult(estimate=datum.ones / shots, queries=shots,
                          ones=datum.ones, shots=shots)


def _mlae_log_likelihood(thetas: np.ndarray, data: list[Datum]) -> np.ndarray:
    total = np.zeros_like(thetas)
    with np.errstate(divide="ignore", invalid="ignore"):
        for d in data:
            p1 = ideal_likelihood(thetas, int(d.control), 1)
            if d.ones:
                total = total + d.ones * np.log(p1)
            if d.zeros:
                total = total + d.zeros * np.log1p(-p1)
    return total


def _refine_theta(grid: np.ndarray, loglik: np.ndarray, data: list[Datum]) -> float:
    """Golden-section polish of the grid maximum (falls back to the grid point)."""
    i = int(np.argmax(loglik))
    if 0 < i < len(grid) - 1 and np.all(np.isfinite(loglik[i - 1:i + 2])):
        def neg(theta):
            return -_mlae_log_likelihood(np.array([theta]), data)[0]

        try:
            result = optimize.minimize_scalar(
                neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden")
            if result.success and grid[i - 1] <= result.x <= grid[i + 1]:
                return float(result.x)
        except ValueError:
            pass
    return float(grid[i])


@dataclass
class MlaeResult:
    schedule: MlaeSchedule
    data: list
    estimates: list     # amplitude estimate after each stage
    queries: list       # cumulative query cost after each stage

    @property
    def estimate(self) -> float:
        return self.estimates[-1]


def run_mlae(a: float, schedule: MlaeSchedule, seed,
             coherence_time: float = math.inf, mle_grid: int = 10_000) -> MlaeResult:
    """Collect the scheduled Grover measurements and maximize the product likelihood.

    ``coherence_time`` only affects data generation; the estimator always
    assumes ideal circuits (the noise-oblivious setting).  After each stage
    the cumulative data are re-estimated: coarse grid over the angle, then
    golden-section refinement around the best grid point.
    """
    rng = np.random.default_rng(seed)
    truth = AmplitudeModel(a=a, coherence_time=coherence_time)
    grid = np.linspace(0.0, math.pi / 2, mle_grid)
    data: list[Datum] = []
    estimates, queries = [], []
    total = 0
    for m in schedule.controls():
        data.append(simulate_measurement(truth, m, schedule.shots_per_stage, rng))
        total += query_cost(m, schedule.shots_per_stage)
        loglik = _mlae_log_likelihood(grid, data)
        theta_hat = _refine_theta(grid, loglik, data)
        estimates.append(math.sin(theta_hat) ** 2)
        queries.append(total)
    return MlaeResult(schedule=schedule, data=data, estimates=estimates, queries=queries)
