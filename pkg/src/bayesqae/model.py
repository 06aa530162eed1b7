"""Measurement model for amplitude estimation with Grover circuits.

The quantum device is replaced by an analytic simulator: the outcome of a
circuit with ``m`` Grover iterations is a Bernoulli variable whose success
probability is known in closed form, optionally damped by exponential
decoherence with coherence time ``T`` (in units of one Grover application).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INFINITE_COHERENCE = math.inf


def angle_from_amplitude(a):
    """Map an amplitude ``a`` in [0, 1] to the Grover angle ``arcsin(sqrt(a))``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError(f"amplitude must lie in [0, 1], got {a}")
    theta = np.arcsin(np.sqrt(a))
    return float(theta) if theta.ndim == 0 else theta


def amplitude_from_angle(theta):
    """Map a Grover angle in [0, pi/2] back to the amplitude ``sin^2(theta)``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > math.pi / 2 + 1e-12):
        raise ValueError(f"Grover angle must lie in [0, pi/2], got {theta}")
    a = np.sin(theta) ** 2
    return float(a) if a.ndim == 0 else a


def _oscillation(theta, m):
    """sin^2((2m+1) * theta), with the argument reduced mod pi first.

    The reduction keeps the sine argument small for deep circuits, where
    (2m+1)*theta would otherwise lose precision before the periodicity is
    applied implicitly by sin.
    """
    arg = np.remainder((2.0 * np.asarray(m) + 1.0) * np.asarray(theta, dtype=float), math.pi)
    return np.sin(arg) ** 2


def ideal_likelihood(theta, m, outcome):
    """Probability of ``outcome`` after ``m`` noiseless Grover iterations.

    Outcome 1 occurs with probability sin^2((2m+1)*theta).
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    if np.any(np.asarray(m) < 0):
        raise ValueError("iteration count m must be non-negative")
    p1 = _oscillation(theta, m)
    p = p1 if outcome == 1 else 1.0 - p1
    return float(p) if np.ndim(p) == 0 else p


def noisy_likelihood(theta, coherence_time, m, outcome):
    """Probability of ``outcome`` under exponential decoherence.

    The outcome-1 probability is damped towards 1/2:
    ``exp(-m/T) * sin^2((2m+1)*theta) + (1 - exp(-m/T)) / 2``.
    Reduces exactly to :func:`ideal_likelihood` for infinite ``T`` or m = 0.
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    if coherence_time <= 0:
        raise ValueError("coherence time must be positive (or math.inf)")
    if np.any(np.asarray(m) < 0):
        raise ValueError("iteration count m must be non-negative")
    damp = np.exp(-np.asarray(m, dtype=float) / coherence_time)
    p1 = damp * _oscillation(theta, m) + (1.0 - damp) / 2.0
    p = p1 if outcome == 1 else 1.0 - p1
    return float(p) if np.ndim(p) == 0 else p


def decay_likelihood(coherence_time, t, outcome):
    """Probability of ``outcome`` for a decay probe of duration ``t``.

    A reference state with ideal outcome-1 probability 1 is damped by the
    same exponential factor as the Grover model, giving ``(1 + exp(-t/T))/2``
    for outcome 1.  Used to learn ``T`` independently of the amplitude.
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    if np.any(np.asarray(t) < 0):
        raise ValueError("evolution time must be non-negative")
    ct = np.asarray(coherence_time, dtype=float)
    if np.any(ct <= 0):
        raise ValueError("coherence time must be positive (or math.inf)")
    p1 = (1.0 + np.exp(-np.asarray(t, dtype=float) / ct)) / 2.0
    p = p1 if outcome == 1 else 1.0 - p1
    return float(p) if np.ndim(p) == 0 else p


@dataclass
class AmplitudeModel:
    """Ground truth used by the simulator: amplitude plus coherence time."""

    a: float
    coherence_time: float = INFINITE_COHERENCE

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"amplitude must lie in [0, 1], got {self.a}")
        if self.coherence_time <= 0:
            raise ValueError("coherence time must be positive (or math.inf)")

    @property
    def theta(self):
        return angle_from_amplitude(self.a)


@dataclass(frozen=True)
class Datum:
    """One experiment: control, shot count, and observed outcome-1 count.

    ``control`` is the Grover iteration count for amplitude measurements
    (integer) or the evolution time of a decay probe (real).
    """

    control: float
    shots: int
    ones: int

    def __post_init__(self):
        if self.control < 0:
            raise ValueError("control must be non-negative")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0 <= self.ones <= self.shots:
            raise ValueError(f"ones must lie in [0, shots], got {self.ones}/{self.shots}")

    @property
    def zeros(self):
        return self.shots - self.ones


def simulate_measurement(truth: AmplitudeModel, m: int, shots: int, rng: np.random.Generator) -> Datum:
    """Draw ``shots`` binary outcomes from an m-iteration Grover circuit.

    The outcome-1 count is binomial with the analytic success probability of
    the (possibly decohering) circuit.  Deterministic given the generator
    state.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p1 = noisy_likelihood(truth.theta, truth.coherence_time, m, 1)
    ones = int(rng.binomial(shots, p1))
    return Datum(control=m, shots=shots, ones=ones)


def simulate_decay_measurement(truth: AmplitudeModel, t: float, shots: int,
                               rng: np.random.Generator) -> Datum:
    """Draw ``shots`` outcomes of a decay probe of duration ``t``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p1 = decay_likelihood(truth.coherence_time, t, 1)
    ones = int(rng.binomial(shots, p1))
    return Datum(control=t, shots=shots, ones=ones)


def query_cost(m, shots: int) -> int:
    """Queries to the initialization operator for ``shots`` m-iteration circuits.

    Each circuit costs 2m+1 applications: two per Grover step plus one for
    state preparation.  Non-integer controls (decay probes) are charged at
    the ceiling of their duration.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if m < 0:
        raise ValueError("control must be non-negative")
    return int(shots) * (2 * math.ceil(m) + 1)


def grover_likelihood(coherence_time: float = INFINITE_COHERENCE):
    """Outcome-1 probability as a function of (theta array, m), with fixed T."""

    def p_one(theta, m):
        return noisy_likelihood(theta, coherence_time, m, 1)

    return p_one


def decay_probe_likelihood():
    """Outcome-1 probability as a function of (T array, t) for decay probes."""

    def p_one(coherence_time, t):
        return decay_likelihood(coherence_time, t, 1)

    return p_one
