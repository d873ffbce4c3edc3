# [file name]: atomsense/sensors_and_noise.py
"""
Vibration environment, classical sensor models and the sensitivity-function
vibration correction.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import fft
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve

from atomsense.errors import RateTooLow, TraceTooShort

# Flicker-FM Allan plateau per unit innovation: √(2 ln 2 / π)
FLICKER_FLOOR_FACTOR = float(np.sqrt(2.0 * np.log(2.0) / np.pi))
MIN_POINTS_PER_SIDE = 10


@dataclass
class SensorTrace:
    """Uniformly sampled signal."""

    sample_rate: float
    samples: np.ndarray
    start_time: float = 0.0
    units: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=float)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) * self.dt

    @property
    def end_time(self) -> float:
        return self.start_time + (self.samples.size - 1) * self.dt

    def block_means(self, starts, width: float) -> np.ndarray:
        """Mean of the samples in [start, start + width) for each start."""
        starts = np.atleast_1d(np.asarray(starts, dtype=float))
        n = max(int(round(width * self.sample_rate)), 1)
        first = np.rint((starts - self.start_time) * self.sample_rate).astype(np.int64)
        if first.size and (first.min() < 0 or first.max() + n > self.samples.size):
            raise TraceTooShort(
                f"averaging windows [{starts.min():.3f}, {starts.max() + width:.3f}] s exceed "
                f"trace [{self.start_time:.3f}, {self.end_time:.3f}] s"
            )
        cumulative = np.concatenate(([0.0], np.cumsum(self.samples)))
        return (cumulative[first + n] - cumulative[first]) / n


@dataclass(frozen=True)
class ClassicalSensorModel:
    """
    White noise plus random-walk bias.

    white_psd is the noise density (unit/√Hz, the Allan deviation at 1 s);
    bias_rw_coeff is the random-walk intensity (unit/√s).
    """

    white_psd: float
    bias_rw_coeff: float
    initial_bias: float = 0.0
    scale_error: float = 0.0

    def __post_init__(self):
        if self.white_psd < 0 or self.bias_rw_coeff < 0:
            raise ValueError("noise coefficients must be non-negative")

    @classmethod
    def from_crossover(cls, white_psd: float, crossover_tau: float, **kwargs) -> "ClassicalSensorModel":
        """Random-walk intensity placing the ADEV minimum at crossover_tau."""
        return cls(white_psd, np.sqrt(3.0) * white_psd / crossover_tau, **kwargs)

    @property
    def crossover_tau(self) -> float:
        if self.bias_rw_coeff == 0:
            return float("inf")
        return float(np.sqrt(3.0 * self.white_psd ** 2 / self.bias_rw_coeff ** 2))


@dataclass(frozen=True)
class VibrationModel:
    """Breakpoint acceleration spectrum (relative levels, log-log interpolated)."""

    corners: Sequence[float] = (2.0, 20.0)
    levels: Sequence[float] = (1.0, 1.0)
    rms: float = 0.0
    residual_fraction: float = 0.2

    def __post_init__(self):
        if self.rms < 0:
            raise ValueError(f"rms must be >= 0, got {self.rms}")
        if not 0.0 <= self.residual_fraction <= 1.0:
            raise ValueError(f"residual_fraction must be in [0, 1], got {self.residual_fraction}")
        if len(self.corners) < 2 or len(self.corners) != len(self.levels):
            raise ValueError("need at least two corners with one level each")
        if np.any(np.diff(self.corners) <= 0) or min(self.corners) <= 0:
            raise ValueError("corner frequencies must be positive and increasing")
        if min(self.levels) <= 0:
            raise ValueError("spectrum levels must be positive")

    @property
    def highest_corner(self) -> float:
        return float(self.corners[-1])

    def psd_shape(self, freqs) -> np.ndarray:
        """Relative PSD at the given frequencies, zero outside the corner band."""
        f = np.asarray(freqs, dtype=float)
        shape = np.zeros_like(f)
        band = (f >= self.corners[0]) & (f <= self.corners[-1])
        if np.any(band):
            log_level = np.interp(np.log(f[band]), np.log(self.corners), np.log(self.levels))
            shape[band] = np.exp(log_level)
        return shape


def gen_vibration(model: VibrationModel, duration: float, rate: float, rng: np.random.Generator,
                  start_time: float = 0.0) -> SensorTrace:
    """
    Gaussian vibration shaped to the model spectrum in the frequency domain.

    Args:
        model: spectrum shape and rms
        duration: trace length (s)
        rate: sample rate (Hz)
        rng: random generator

    Returns:
        Acceleration trace (m/s²) with expected rms equal to model.rms
    """
    if rate < 2.0 * model.highest_corner:
        raise RateTooLow(f"rate {rate} Hz below twice the highest corner {model.highest_corner} Hz")
    n = int(round(duration * rate))
    if n < 2:
        raise ValueError(f"duration {duration} s too short at {rate} Hz")
    white = rng.standard_normal(n)
    if model.rms == 0:
        return SensorTrace(rate, np.zeros(n), start_time, "m/s^2")

    freqs = fft.rfftfreq(n, d=1.0 / rate)
    gain = np.sqrt(model.psd_shape(freqs))
    shaped = fft.irfft(fft.rfft(white) * gain, n)

    # expected variance of the filtered unit white sequence
    weights = np.full(gain.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    power = float(np.sum(weights * gain ** 2) / n)
    if power == 0:
        raise RateTooLow(f"{duration} s at {rate} Hz does not resolve the vibration band")
    return SensorTrace(rate, shaped * (model.rms / np.sqrt(power)), start_time, "m/s^2")


def sensitivity_weight(t, T: float):
    """Triangle sensitivity h(t): (T − |t|)/T² on [−T, T], zero outside."""
    t = np.asarray(t, dtype=float)
    h = np.clip(T - np.abs(t), 0.0, None) / T ** 2
    return float(h) if h.ndim == 0 else h


def _kernel_grid(trace: SensorTrace, T: float) -> np.ndarray:
    n_side = max(int(round(T * trace.sample_rate)), MIN_POINTS_PER_SIDE)
    return np.linspace(-T, T, 2 * n_side + 1)


def convolve_sensitivity_many(trace: SensorTrace, t_pis, T: float) -> np.ndarray:
    """Sensitivity-weighted acceleration ∫a(t_π + t)h(t)dt for each π-pulse time."""
    t_pis = np.atleast_1d(np.asarray(t_pis, dtype=float))
    tolerance = 1e-9 * trace.dt
    if t_pis.size and (t_pis.min() - T < trace.start_time - tolerance or t_pis.max() + T > trace.end_time + tolerance):
        raise TraceTooShort(
            f"window [{t_pis.min() - T:.4f}, {t_pis.max() + T:.4f}] s outside trace "
            f"[{trace.start_time:.4f}, {trace.end_time:.4f}] s"
        )
    offsets = _kernel_grid(trace, T)
    grid = t_pis[:, None] + offsets[None, :]
    values = np.interp(grid.ravel(), trace.times, trace.samples).reshape(grid.shape)
    return trapezoid(values * sensitivity_weight(offsets, T)[None, :], offsets, axis=1)


def convolve_sensitivity(trace: SensorTrace, t_pi: float, T: float) -> float:
    """a_conv for one π pulse (trapezoid at the trace rate)."""
    return float(convolve_sensitivity_many(trace, [t_pi], T)[0])


def sample_classical(model: ClassicalSensorModel, truth: SensorTrace, rng: np.random.Generator) -> SensorTrace:
    """Classical sensor output: truth·(1 + scale) + random-walk bias + white noise."""
    n = len(truth)
    output = truth.samples * (1.0 + model.scale_error)
    if model.white_psd > 0:
        output = output + rng.normal(0.0, model.white_psd * np.sqrt(truth.sample_rate), n)
    bias = np.full(n, model.initial_bias)
    if model.bias_rw_coeff > 0:
        bias = bias + np.cumsum(rng.normal(0.0, model.bias_rw_coeff * np.sqrt(truth.dt), n))
    return SensorTrace(truth.sample_rate, output + bias, truth.start_time, truth.units)


def gen_flicker(n_samples: int, floor: float, rng: np.random.Generator) -> np.ndarray:
    """
    Flicker (1/f) sequence whose Allan deviation plateaus at `floor`.

    Fractional differencing: unit white noise convolved with the expansion of
    (1 − z⁻¹)^(−1/2).
    """
    if floor == 0 or n_samples == 0:
        return np.zeros(n_samples)
    steps = np.arange(1, n_samples)
    h = np.concatenate(([1.0], np.cumprod((steps - 0.5) / steps)))
    white = rng.standard_normal(n_samples)
    return floor / FLICKER_FLOOR_FACTOR * fftconvolve(h, white)[:n_samples]


def gen_random_walk(n_samples: int, coeff: float, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Random walk with intensity coeff (unit/√s) sampled every dt."""
    if coeff == 0 or n_samples == 0:
        return np.zeros(n_samples)
    return np.cumsum(rng.normal(0.0, coeff * np.sqrt(dt), n_samples))
