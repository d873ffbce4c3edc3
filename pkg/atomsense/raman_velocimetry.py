# [file name]: atomsense/raman_velocimetry.py
"""
Raman velocimetry: retro-reflected spectra, two-photon light-shift (TPLS)
correction and launch-velocity extraction.

Frequencies are Raman detunings from the hyperfine splitting. The two
counter-propagating lines sit at ω_r ± (ω_D + δω_TPLS(ω_D)); the recoil is
common to both and drops out of their splitting Δν.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from atomsense.errors import AmbiguousPeaks, DegenerateDoppler, FitFailed, GridTooNarrow, PeakNotFound
from atomsense.physics_core import Species
from atomsense.rng import stream
from utils.log import get_logger

logger = get_logger("Raman")

TWO_PI = 2.0 * np.pi
PEAK_THRESHOLD = 0.5
MAX_TPLS_ITERATIONS = 50


class Branch(Enum):
    """Transition families of a retro-reflected spectrum"""
    CO_PROP = "co_prop"
    COUNTER_PLUS = "counter_prop_plus"
    COUNTER_MINUS = "counter_prop_minus"


@dataclass(frozen=True)
class RamanLine:
    center: float  # Hz
    width: float  # Hz
    amplitude: float
    branch: Branch

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"line width must be positive, got {self.width}")
        if self.amplitude < 0:
            raise ValueError(f"line amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class TplsParams:
    rabi: float  # rad/s
    doppler: float  # rad/s
    recoil: float  # rad/s

    def __post_init__(self):
        if self.recoil <= 0:
            raise ValueError(f"recoil must be positive, got {self.recoil}")


@dataclass(frozen=True)
class RamanSpectrum:
    freq_offset_hz: np.ndarray
    p2: np.ndarray
    p2_err: np.ndarray
    pulse_duration: float
    rabi: float
    lines: tuple = ()


def tpls_shift(p: TplsParams, epsilon: Optional[float] = None) -> float:
    """
    Two-photon light shift of each counter-propagating line (rad/s).

    δω = −Ω²[1/(4ω_D) + 1/(8ω_D + 16ω_r) + 1/(8ω_D − 16ω_r)]

    The shift is odd in ω_D; subtract it from a measured line position to
    correct it.
    """
    if epsilon is None:
        epsilon = 1e-6 * 16.0 * p.recoil
    d, r = p.doppler, p.recoil
    if abs(d) < epsilon or abs(8.0 * d - 16.0 * r) < epsilon or abs(8.0 * d + 16.0 * r) < epsilon:
        raise DegenerateDoppler(f"ω_D = {d:.6e} rad/s is at a pole of the light-shift formula (ω_r = {r:.6e})")
    return float(-p.rabi ** 2 * (1.0 / (4.0 * d) + 1.0 / (8.0 * d + 16.0 * r) + 1.0 / (8.0 * d - 16.0 * r)))


def rabi_lineshape(freqs, center: float, rabi: float, pulse_duration: float) -> np.ndarray:
    """Two-level transfer probability Ω²/(Ω²+Δ²)·sin²(√(Ω²+Δ²)·τ/2)."""
    detuning = TWO_PI * (np.asarray(freqs, dtype=float) - center)
    generalized = np.sqrt(rabi ** 2 + detuning ** 2)
    return rabi ** 2 / generalized ** 2 * np.sin(0.5 * generalized * pulse_duration) ** 2


def line_centers(v: float, k_eff: float, rabi: float, recoil: float, include_tpls: bool = True) -> tuple:
    """(plus, minus) counter-propagating line centres in Hz."""
    doppler = k_eff * v
    shift = 0.0
    if include_tpls and doppler != 0:
        shift = tpls_shift(TplsParams(rabi, doppler, recoil))
    plus = (recoil + doppler + shift) / TWO_PI
    minus = (recoil - doppler - shift) / TWO_PI
    return plus, minus


def default_grid(v: float, k_eff: float, pulse_duration: float, n_points: int = 100) -> np.ndarray:
    """Symmetric grid reaching four main-lobe widths past the side lines."""
    reach = abs(k_eff * v) / TWO_PI + 4.0 / pulse_duration
    return np.linspace(-reach, reach, n_points)


def simulate_spectrum(
    v: float,
    pulse_duration: float,
    rabi: float,
    grid,
    rng: np.random.Generator,
    species: Optional[Species] = None,
    noise: float = 0.01,
    copropagating_amplitude: float = 0.3,
    counter_amplitude: float = 1.0,
) -> RamanSpectrum:
    """
    Synthetic spectrum: two counter-propagating lines plus the degenerate
    co-propagating line at zero detuning, Rabi line shapes, Gaussian noise.

    Args:
        v: launch velocity (m/s)
        pulse_duration: Raman pulse length τ (s)
        rabi: effective Rabi frequency Ω_eff (rad/s)
        grid: detunings (Hz)
        rng: random generator
        species: atom data (Rb-87 if None)
        noise: rms of the additive noise on P₂
        copropagating_amplitude: height of the centre line
        counter_amplitude: height of each side line

    Returns:
        RamanSpectrum
    """
    species = species or Species.rb87()
    grid = np.asarray(grid, dtype=float)
    k_eff, recoil = species.k_eff, species.recoil_frequency
    plus, minus = line_centers(v, k_eff, rabi, recoil)

    lobe = 1.0 / pulse_duration
    if grid.min() > min(plus, minus) - lobe or grid.max() < max(plus, minus) + lobe:
        raise GridTooNarrow(
            f"grid [{grid.min():.0f}, {grid.max():.0f}] Hz does not reach lines at "
            f"{minus:.0f} and {plus:.0f} Hz with a {lobe:.0f} Hz margin"
        )

    width = 0.8 / pulse_duration
    lines = (
        RamanLine(0.0, width, copropagating_amplitude, Branch.CO_PROP),
        RamanLine(plus, width, counter_amplitude, Branch.COUNTER_PLUS),
        RamanLine(minus, width, counter_amplitude, Branch.COUNTER_MINUS),
    )
    p2 = np.zeros_like(grid)
    for line in lines:
        p2 += line.amplitude * rabi_lineshape(grid, line.center, rabi, pulse_duration)
    if noise > 0:
        p2 = p2 + rng.normal(0.0, noise, grid.size)
    return RamanSpectrum(grid, p2, np.full(grid.size, noise), pulse_duration, rabi, lines)


def velocity_from_splitting(delta_nu: float, k_eff: float, tpls: Optional[TplsParams] = None) -> float:
    """
    Launch velocity v = πΔν/k, optionally after removing 2·δω_TPLS/2π.

    The light shift depends on ω_D = k·v, so the correction is iterated to
    its fixed point.
    """
    v = np.pi * delta_nu / k_eff
    if tpls is None or delta_nu == 0:
        return float(v)
    for _ in range(MAX_TPLS_ITERATIONS):
        shift = tpls_shift(TplsParams(tpls.rabi, k_eff * v, tpls.recoil))
        updated = np.pi * (delta_nu - 2.0 * shift / TWO_PI) / k_eff
        if abs(updated - v) <= 1e-14 * abs(updated):
            return float(updated)
        v = updated
    logger.warning("TPLS correction did not reach its fixed point")
    return float(v)


def _local_maxima(p2: np.ndarray) -> np.ndarray:
    inner = (p2[1:-1] > p2[:-2]) & (p2[1:-1] >= p2[2:])
    return np.flatnonzero(inner) + 1


def _merge_candidates(freqs: np.ndarray, p2: np.ndarray, indices: np.ndarray, separation: float) -> list:
    """Keep the highest maximum of each cluster closer than `separation`."""
    groups = []
    for index in indices:
        if groups and freqs[index] - freqs[groups[-1][-1]] < separation:
            groups[-1].append(index)
        else:
            groups.append([index])
    return [max(group, key=lambda i: p2[i]) for group in groups]


def _parabolic_peak(freqs: np.ndarray, p2: np.ndarray, i: int) -> float:
    if i <= 0 or i >= freqs.size - 1:
        return float(freqs[i])
    y0, y1, y2 = p2[i - 1], p2[i], p2[i + 1]
    curvature = y0 - 2.0 * y1 + y2
    if curvature >= 0:
        return float(freqs[i])
    step = 0.5 * (freqs[i + 1] - freqs[i - 1])
    return float(freqs[i] + 0.5 * (y0 - y2) / curvature * step)


def find_side_peaks(spectrum: RamanSpectrum) -> tuple:
    """
    Seed positions of the two counter-propagating lines.

    Local maxima above half the spectrum maximum outside the central
    exclusion window (0.5/τ, inside the first zero of
    the co-propagating line), merged within half a line width, refined by a
    three-point parabola.
    """
    f, p2 = np.asarray(spectrum.freq_offset_hz), np.asarray(spectrum.p2)
    exclusion = 0.5 / spectrum.pulse_duration
    outside = np.abs(f) > exclusion
    if not np.any(outside):
        raise PeakNotFound("no grid points outside the central exclusion window")
    threshold = PEAK_THRESHOLD * p2.max()
    candidates = [i for i in _local_maxima(p2) if outside[i] and p2[i] >= threshold]
    candidates = _merge_candidates(f, p2, np.array(candidates, dtype=int), 0.4 / spectrum.pulse_duration)

    positive = [i for i in candidates if f[i] > 0]
    negative = [i for i in candidates if f[i] < 0]
    if not positive or not negative:
        raise PeakNotFound(f"found {len(positive)} positive and {len(negative)} negative side peaks")
    if len(positive) > 1 or len(negative) > 1:
        raise AmbiguousPeaks(f"{len(positive) + len(negative)} side-peak candidates")
    return _parabolic_peak(f, p2, positive[0]), _parabolic_peak(f, p2, negative[0])


def fit_velocity(spectrum: RamanSpectrum, k_eff: float, correct_tpls: bool, tpls: TplsParams) -> tuple:
    """
    Launch velocity and its statistical error from a spectrum.

    Side peaks are located and refined, then a least-squares fit of the
    three-line model gives the two centres and their covariance.

    Args:
        spectrum: measured spectrum
        k_eff: effective wave number (rad/m)
        correct_tpls: remove the two-photon light shift
        tpls: Rabi frequency and recoil used by the correction

    Returns:
        (v, stat_err) in m/s
    """
    f = np.asarray(spectrum.freq_offset_hz, dtype=float)
    p2 = np.asarray(spectrum.p2, dtype=float)
    plus_seed, minus_seed = find_side_peaks(spectrum)
    rabi, tau = spectrum.rabi, spectrum.pulse_duration
    center_index = int(np.argmin(np.abs(f)))

    def model(freqs, f_plus, f_minus, f_zero, a_plus, a_minus, a_zero, baseline):
        return (
            baseline
            + a_plus * rabi_lineshape(freqs, f_plus, rabi, tau)
            + a_minus * rabi_lineshape(freqs, f_minus, rabi, tau)
            + a_zero * rabi_lineshape(freqs, f_zero, rabi, tau)
        )

    p0 = [plus_seed, minus_seed, 0.0,
          p2[np.argmin(np.abs(f - plus_seed))], p2[np.argmin(np.abs(f - minus_seed))],
          max(p2[center_index], 0.0), 0.0]
    sigma = np.asarray(spectrum.p2_err, dtype=float)
    use_sigma = bool(np.all(sigma > 0))
    try:
        params, covariance = curve_fit(
            model, f, p2, p0=p0,
            sigma=sigma if use_sigma else None, absolute_sigma=use_sigma,
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as e:
        raise FitFailed(f"spectrum fit failed: {e}") from e

    delta_nu = params[0] - params[1]
    variance = covariance[0, 0] + covariance[1, 1] - 2.0 * covariance[0, 1]
    if not np.isfinite(variance):
        variance = 0.0
    stat_err = np.pi * np.sqrt(max(variance, 0.0)) / k_eff

    correction = TplsParams(tpls.rabi, tpls.doppler, tpls.recoil) if correct_tpls else None
    v = velocity_from_splitting(delta_nu, k_eff, correction)
    return v, float(stat_err)


@dataclass(frozen=True)
class VelocityDriftModel:
    """White jitter plus a first-order Gauss-Markov wander of the launch velocity."""

    white: float = 0.0  # m/s per spectrum
    gm_sigma: float = 0.0  # m/s
    gm_tau: float = 3600.0  # s

    @staticmethod
    def gm_adev(sigma: float, correlation_time: float, tau) -> np.ndarray:
        """Allan deviation of a Gauss-Markov process of standard deviation sigma."""
        x = np.asarray(tau, dtype=float) / correlation_time
        variance = sigma ** 2 / x ** 2 * (2.0 * x - 3.0 + 4.0 * np.exp(-x) - np.exp(-2.0 * x))
        return np.sqrt(variance)

    @classmethod
    def calibrated(cls, target_adev: float, horizon: float, white: float = 0.0,
                   gm_tau: Optional[float] = None) -> "VelocityDriftModel":
        """Gauss-Markov amplitude giving `target_adev` at averaging time `horizon`."""
        gm_tau = gm_tau or horizon
        unit = float(cls.gm_adev(1.0, gm_tau, horizon))
        return cls(white, target_adev / unit, gm_tau)

    def sample(self, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
        """Velocity offsets at n instants spaced by dt (exact AR(1) discretisation)."""
        white = rng.normal(0.0, self.white, n) if self.white > 0 else np.zeros(n)
        if self.gm_sigma == 0 or n == 0:
            return white
        phi = np.exp(-dt / self.gm_tau)
        innovations = rng.normal(0.0, self.gm_sigma * np.sqrt(1.0 - phi ** 2), n)
        wander = np.empty(n)
        wander[0] = rng.normal(0.0, self.gm_sigma)
        for i in range(1, n):
            wander[i] = phi * wander[i - 1] + innovations[i]
        return white + wander


@dataclass(frozen=True)
class VelocimetrySettings:
    """Spectrum acquisition parameters."""

    species: Species = field(default_factory=Species.rb87)
    pulse_duration: float = 20e-6
    n_points: int = 100
    noise: float = 0.01
    copropagating_amplitude: float = 0.3
    spectrum_period: float = 100.0
    correct_tpls: bool = True

    @property
    def rabi(self) -> float:
        """π-pulse Rabi frequency for the configured duration."""
        return np.pi / self.pulse_duration


@dataclass(frozen=True)
class VelocitySeries:
    t: np.ndarray
    v: np.ndarray
    stat_err: np.ndarray
    v_true: np.ndarray


def run_velocimetry_campaign(v0: float, n_spectra: int, settings: VelocimetrySettings,
                             drift: VelocityDriftModel, seed: int, pool=None) -> VelocitySeries:
    """One spectrum per period, each fitted for the launch velocity."""
    species = settings.species
    k_eff, recoil = species.k_eff, species.recoil_frequency
    t = np.arange(n_spectra) * settings.spectrum_period
    v_true = v0 + drift.sample(n_spectra, settings.spectrum_period, stream(seed, "velocity_drift"))
    grid = default_grid(v0, k_eff, settings.pulse_duration, settings.n_points)
    tpls = TplsParams(settings.rabi, k_eff * v0, recoil)

    def measure(index):
        spectrum = simulate_spectrum(
            v_true[index], settings.pulse_duration, settings.rabi, grid, stream(seed, "spectrum", index),
            species, settings.noise, settings.copropagating_amplitude,
        )
        return fit_velocity(spectrum, k_eff, settings.correct_tpls, tpls)

    indices = list(range(n_spectra))
    results = pool.map(measure, indices) if pool is not None else [measure(i) for i in indices]
    v = np.array([r[0] for r in results])
    err = np.array([r[1] for r in results])
    return VelocitySeries(t, v, err, v_true)


@dataclass(frozen=True)
class TplsComparisonRow:
    pulse_duration: float
    v_uncorrected: float
    v_corrected: float
    stat_err: float


def tpls_comparison(v: float, pulse_durations, settings: VelocimetrySettings, seed: int) -> list[TplsComparisonRow]:
    """Corrected and uncorrected velocity over a pulse-duration sweep at Ω_eff·τ = π."""
    species = settings.species
    k_eff, recoil = species.k_eff, species.recoil_frequency
    rows = []
    for index, tau in enumerate(pulse_durations):
        rabi = np.pi / tau
        grid = default_grid(v, k_eff, tau, settings.n_points)
        spectrum = simulate_spectrum(v, tau, rabi, grid, stream(seed, "spectrum", 100000 + index), species,
                                     settings.noise, settings.copropagating_amplitude)
        tpls = TplsParams(rabi, k_eff * v, recoil)
        v_raw, err = fit_velocity(spectrum, k_eff, False, tpls)
        v_corr, _ = fit_velocity(spectrum, k_eff, True, tpls)
        rows.append(TplsComparisonRow(float(tau), v_raw, v_corr, err))
    return rows
