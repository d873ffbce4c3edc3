# [file name]: atomsense/fusion.py
"""
Hybridization of a classical sensor with the atomic measurement: the atom
estimates the classical bias through a first-order low-pass loop.

    b ← b + G·((atomic − classical_avg) − b)
    hybrid = classical + b
"""

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from atomsense.analysis import AdevCurve
from atomsense.errors import NoCrossing
from atomsense.sensors_and_noise import SensorTrace
from utils.log import get_logger

logger = get_logger("Fusion")


@dataclass(frozen=True)
class HybridState:
    bias_estimate: float = 0.0
    gain: float = 0.1
    last_update: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gain <= 1.0:
            raise ValueError(f"gain must be in (0, 1], got {self.gain}")


def hybrid_update(state: HybridState, atomic: float, classical_avg: float,
                  t: Optional[float] = None) -> HybridState:
    """Move the bias estimate a fraction G toward the latest atomic-classical difference."""
    innovation = (atomic - classical_avg) - state.bias_estimate
    return replace(
        state,
        bias_estimate=state.bias_estimate + state.gain * innovation,
        last_update=state.last_update if t is None else t,
    )


def hybrid_output(state: HybridState, classical_sample):
    return classical_sample + state.bias_estimate


class GainChoice(NamedTuple):
    gain: float
    tau_cross: float
    fallback_used: bool


def find_crossing(atomic: AdevCurve, classical: AdevCurve) -> float:
    """
    Shortest averaging time at which the atomic ADEV falls to the classical one.

    Both curves are interpolated log-log on their common τ range; the
    crossing is placed where the log ratio changes sign.
    """
    low = max(atomic.taus[0], classical.taus[0])
    high = min(atomic.taus[-1], classical.taus[-1])
    if low > high:
        raise NoCrossing("ADEV curves do not share an averaging-time range")
    taus = np.unique(np.concatenate((atomic.taus, classical.taus)))
    taus = taus[(taus >= low) & (taus <= high)]
    log_taus = np.log(taus)
    log_ratio = (
        np.interp(log_taus, np.log(atomic.taus), np.log(atomic.sigmas))
        - np.interp(log_taus, np.log(classical.taus), np.log(classical.sigmas))
    )
    below = np.flatnonzero(log_ratio <= 0)
    if below.size == 0:
        raise NoCrossing(f"atomic ADEV stays above classical up to τ = {high:.4g} s")
    i = below[0]
    if i == 0:
        return float(taus[0])
    # linear in log τ between the bracketing points
    x0, x1 = log_taus[i - 1], log_taus[i]
    y0, y1 = log_ratio[i - 1], log_ratio[i]
    return float(np.exp(x0 + (x1 - x0) * y0 / (y0 - y1)))


def pick_gain(atomic: AdevCurve, classical: AdevCurve, update_period: float,
              fallback: float = 0.01) -> GainChoice:
    """G = Δt/τ_cross clamped to (0, 1]; the configured fallback if the curves never cross."""
    try:
        tau_cross = find_crossing(atomic, classical)
    except NoCrossing as e:
        logger.warning(f"{e}; using fallback gain {fallback}")
        return GainChoice(fallback, float("nan"), True)
    gain = min(1.0, update_period / tau_cross)
    logger.info(f"crossing at {tau_cross:.1f} s, gain {gain:.4g}")
    return GainChoice(gain, tau_cross, False)


class HybridFilter:
    """Streaming bias loop; feed atomic measurements as they complete."""

    def __init__(self, gain: float, initial_bias: float = 0.0):
        self._state = HybridState(bias_estimate=initial_bias, gain=gain)
        self.updates = 0

    @property
    def state(self) -> HybridState:
        return self._state

    @property
    def bias(self) -> float:
        return self._state.bias_estimate

    def update(self, t: float, atomic: float, classical_avg: float) -> float:
        self._state = hybrid_update(self._state, atomic, classical_avg, t)
        self.updates += 1
        return self._state.bias_estimate

    def output(self, classical_sample):
        return hybrid_output(self._state, classical_sample)


@dataclass(frozen=True)
class HybridSeries:
    """Per-sample hybrid output plus block-level values at the atomic cadence."""

    t: np.ndarray
    hybrid: np.ndarray
    classical: np.ndarray
    bias: np.ndarray
    atomic: np.ndarray  # NaN where no atomic update completes
    block_t: np.ndarray
    block_hybrid: np.ndarray
    block_classical: np.ndarray
    block_atomic: np.ndarray


def run_hybrid(classical: SensorTrace, atomic_t, atomic_values, window: float, gain: float,
               initial_bias: float = 0.0) -> HybridSeries:
    """
    Offline hybridization of a classical trace with block-rate atomic values.

    Each atomic value measured over [t, t + window) is compared with the
    classical mean over the same window. Its update applies from the first
    classical sample at or after t + window. Block hybrids use the bias
    estimated before their own atomic value.

    Args:
        classical: classical sensor trace
        atomic_t: start time of each atomic window (s)
        atomic_values: atomic measurements
        window: averaging window (s)
        gain: loop gain G

    Returns:
        HybridSeries
    """
    atomic_t = np.asarray(atomic_t, dtype=float)
    atomic_values = np.asarray(atomic_values, dtype=float)
    if atomic_t.shape != atomic_values.shape:
        raise ValueError("atomic times and values differ in length")
    block_classical = classical.block_means(atomic_t, window)

    loop = HybridFilter(gain, initial_bias)
    bias_before = np.empty(atomic_t.size)
    bias_after = np.empty(atomic_t.size)
    for j, (t, value, reference) in enumerate(zip(atomic_t, atomic_values, block_classical)):
        bias_before[j] = loop.bias
        bias_after[j] = loop.update(t + window, value, reference)

    times = classical.times
    tolerance = 1e-9 * classical.dt
    applied = np.searchsorted(atomic_t + window, times + tolerance, side="right")
    bias = np.where(applied > 0, bias_after[np.maximum(applied - 1, 0)], initial_bias)

    atomic_marks = np.full(times.size, np.nan)
    first_after = np.searchsorted(times, atomic_t + window - tolerance, side="left")
    inside = first_after < times.size
    atomic_marks[first_after[inside]] = atomic_values[inside]

    return HybridSeries(
        t=times,
        hybrid=classical.samples + bias,
        classical=classical.samples,
        bias=bias,
        atomic=atomic_marks,
        block_t=atomic_t,
        block_hybrid=block_classical + bias_before,
        block_classical=block_classical,
        block_atomic=atomic_values,
    )
