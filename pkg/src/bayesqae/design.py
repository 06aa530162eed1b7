"""Greedy experimental design over an expanding control window.

The next Grover iteration count is chosen by sweeping a sparse grid of
candidate controls inside a window, scoring each with a one-shot look-ahead
utility.  When the chosen control keeps landing among the top of the window
the window doubles, so deep circuits become reachable while the sweep cost
per iteration stays constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import smc


@dataclass
class DesignWindow:
    """Control-search window state plus expansion hyperparameters.

    ``r_top`` and ``t_trigger``: the window expands after the chosen control
    has ranked among the ``r_top`` highest grid values ``t_trigger`` times
    (not necessarily consecutive).
    """

    c_min: int = 0
    c_max: int = 40
    trigger_count: int = 0
    nevals: int = 20
    k0: int = 2
    r_top: int = 2
    t_trigger: int = 3

    def __post_init__(self):
        if not 0 <= self.c_min < self.c_max:
            raise ValueError("window must satisfy 0 <= c_min < c_max")
        if self.nevals < 2:
            raise ValueError("nevals must be >= 2")
        if self.r_top < 1 or self.t_trigger < 1:
            raise ValueError("r_top and t_trigger must be >= 1")


def init_window(nevals: int = 20, k0: int = 2, r_top: int = 2, t_trigger: int = 3) -> DesignWindow:
    """Fresh window [0, k0 * nevals] with a zeroed expansion counter."""
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    return DesignWindow(c_min=0, c_max=k0 * nevals, trigger_count=0,
                        nevals=nevals, k0=k0, r_top=r_top, t_trigger=t_trigger)


def expand_window(window: DesignWindow) -> DesignWindow:
    """Double the window: new range is [old c_max, 2 * old c_max]."""
    window.c_min = window.c_max
    window.c_max = 2 * window.c_max
    window.trigger_count = 0
    return window


def control_grid(window: DesignWindow) -> np.ndarray:
    """At most ``nevals`` evenly spaced integer controls spanning the window.

    Endpoints are always included; rounding duplicates on narrow spans are
    dropped, so the sweep cost never grows with the window width.
    """
    grid = np.linspace(window.c_min, window.c_max, window.nevals)
    return np.unique(np.rint(grid).astype(int))


@dataclass(frozen=True)
class UtilitySpec:
    """Which look-ahead utility drives the control choice.

    ``negative_variance`` targets maximal expected uncertainty reduction;
    ``ess_target`` steers the expected effective sample size of the
    hypothetical posterior towards ``target``.
    """

    kind: str = "negative_variance"
    target: float | None = None

    def __post_init__(self):
        if self.kind not in ("negative_variance", "ess_target"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "ess_target" and (self.target is None or self.target <= 0):
            raise ValueError("ess_target utility needs a positive target")


def negative_variance_utility(ensemble: smc.ParticleEnsemble) -> float:
    """Negative posterior variance of the parameter."""
    return -smc.variance(ensemble)


def ess_target_utility(ensemble: smc.ParticleEnsemble, target: float) -> float:
    """Negative distance between the ensemble's ESS and the target value."""
    return -abs(smc.ess(ensemble.weights) - target)


def utility_function(spec: UtilitySpec):
    if spec.kind == "negative_variance":
        return negative_variance_utility
    return lambda ensemble: ess_target_utility(ensemble, spec.target)


def optimize_control(ensemble: smc.ParticleEnsemble, window: DesignWindow,
                     utility: UtilitySpec, likelihood):
    """Pick the grid control with maximal expected utility; manage the window.

    Ties resolve to the smallest control (cheapest circuit, least
    decoherence).  A choice among the ``r_top`` largest grid values bumps the
    expansion counter; reaching ``t_trigger`` doubles the window for the next
    call and resets the counter.  Returns ``(control, window)``.
    """
    grid = control_grid(window)
    ufun = utility_function(spec=utility)
    utilities = [smc.average_expected_utility(ensemble, ufun, int(m), likelihood)
                 for m in grid]
    best = int(np.argmax(utilities))  # first maximum = smallest control
    control = int(grid[best])
    if best >= len(grid) - window.r_top:
        window.trigger_count += 1
        if window.trigger_count >= window.t_trigger:
            expand_window(window)
    return control, window
