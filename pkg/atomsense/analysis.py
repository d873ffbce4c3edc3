# [file name]: atomsense/analysis.py
"""
Allan deviation, fringe fitting and the systematic-error budget.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit, nnls
from scipy.stats import chi2

from atomsense.errors import FitFailed, SeriesTooShort
from atomsense.physics_core import Species

ONE_SIGMA_TAIL = 0.5 * (1.0 - 0.682689492137086)


@dataclass(frozen=True)
class AdevCurve:
    """Overlapping Allan deviation with 1σ chi-square intervals."""

    taus: np.ndarray
    sigmas: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    edf: np.ndarray

    @property
    def conf_intervals(self) -> np.ndarray:
        return np.column_stack([self.ci_low, self.ci_high])

    def at(self, tau: float) -> float:
        """Sigma at the analysed tau closest to `tau` (log distance)."""
        index = int(np.argmin(np.abs(np.log(self.taus / tau))))
        return float(self.sigmas[index])


def default_taus(n_samples: int, dt: float) -> np.ndarray:
    """Octave-spaced averaging times up to a third of the series."""
    m_max = max(n_samples // 3, 1)
    ms = 2 ** np.arange(int(np.floor(np.log2(m_max))) + 1)
    return ms * dt


def _white_fm_edf(n: int, m: int) -> float:
    edf = (3.0 * (n - 1) / (2.0 * m) - 2.0 * (n - 2) / n) * 4.0 * m ** 2 / (4.0 * m ** 2 + 5.0)
    return max(edf, 1.0)


def allan_deviation(series, dt: float, taus=None) -> AdevCurve:
    """
    Overlapping Allan deviation.

    Args:
        series: uniformly sampled values
        dt: sample interval (s)
        taus: averaging times (s); rounded to multiples of dt, octaves if None

    Returns:
        AdevCurve at the distinct averaging times
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if taus is None:
        taus = default_taus(n, dt)
    ms = np.unique(np.maximum(np.rint(np.asarray(taus, dtype=float) / dt).astype(np.int64), 1))
    if n < 3 or n < 3 * ms.max():
        raise SeriesTooShort(f"{n} samples cannot support tau = {ms.max() * dt:g} s (need >= {3 * ms.max()})")

    cumulative = np.concatenate(([0.0], np.cumsum(x - x.mean())))
    sigmas, lows, highs, edfs = [], [], [], []
    for m in ms:
        averages = (cumulative[m:] - cumulative[:-m]) / m
        diffs = averages[m:] - averages[:-m]
        sigma = float(np.sqrt(0.5 * np.mean(diffs ** 2)))
        edf = _white_fm_edf(n, int(m))
        sigmas.append(sigma)
        lows.append(sigma * np.sqrt(edf / chi2.ppf(1.0 - ONE_SIGMA_TAIL, edf)))
        highs.append(sigma * np.sqrt(edf / chi2.ppf(ONE_SIGMA_TAIL, edf)))
        edfs.append(edf)
    return AdevCurve(ms * dt, np.array(sigmas), np.array(lows), np.array(highs), np.array(edfs))


@dataclass(frozen=True)
class NoiseFloors:
    """Coefficients of σ²(τ) = W²/τ + F² + K²τ/3."""

    white: float
    flicker: float
    random_walk: float

    def sigma(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return np.sqrt(self.white ** 2 / tau + self.flicker ** 2 + self.random_walk ** 2 * tau / 3.0)


def fit_noise_floors(curve: AdevCurve, max_tau: Optional[float] = None) -> NoiseFloors:
    """Non-negative least squares on relative variance residuals."""
    keep = curve.sigmas > 0
    if max_tau is not None:
        keep &= curve.taus <= max_tau
    taus, variances = curve.taus[keep], curve.sigmas[keep] ** 2
    if taus.size == 0:
        return NoiseFloors(0.0, 0.0, 0.0)
    basis = np.column_stack([1.0 / taus, np.ones_like(taus), taus / 3.0]) / variances[:, None]
    coeffs, _ = nnls(basis, np.ones_like(taus))
    white, flicker, walk = np.sqrt(coeffs)
    return NoiseFloors(float(white), float(flicker), float(walk))


@dataclass(frozen=True)
class FringeFit:
    """P₂(α) = mean − (contrast/2)·cos(α·T² + phase_offset)."""

    mean: float
    contrast: float
    phase_offset: float
    residuals: np.ndarray
    covariance: np.ndarray

    def model(self, alphas, T: float) -> np.ndarray:
        x = np.asarray(alphas, dtype=float) * T ** 2
        return self.mean - 0.5 * self.contrast * np.cos(x + self.phase_offset)


def fit_fringe(alphas, p2s, T: float, contrast_threshold: float = 0.02,
               phase_guess: Optional[float] = None) -> FringeFit:
    """
    Least-squares sinusoid at the known fringe period 2π/T².

    At a fixed period the model is linear in (mean, A, B) with
    P = mean + A·cos(αT²) + B·sin(αT²); the projection onto cos/sin is the
    periodogram value at that period and the linear solve is the exact
    least-squares optimum. The phase is returned in (−π, π], or on the
    2π branch nearest `phase_guess`.

    Args:
        alphas: chirp rates (rad/s²)
        p2s: measured populations
        T: pulse separation (s)
        contrast_threshold: minimum fitted contrast
        phase_guess: optional branch reference (rad)

    Returns:
        FringeFit with the covariance of (mean, contrast, phase_offset)
    """
    x = np.asarray(alphas, dtype=float) * T ** 2
    y = np.asarray(p2s, dtype=float)
    if x.size != y.size or x.size < 4:
        raise FitFailed(f"need at least 4 matched points, got {x.size} and {y.size}")
    fringes = (x.max() - x.min()) / (2.0 * np.pi)
    if fringes < 1.5:
        raise FitFailed(f"scan spans {fringes:.2f} fringes, need at least 1.5")

    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise FitFailed("degenerate fringe design matrix")
    mean, a, b = coeffs
    half = float(np.hypot(a, b))
    contrast = 2.0 * half
    if not np.isfinite(contrast) or contrast < contrast_threshold:
        raise FitFailed(f"fitted contrast {contrast:.4f} below threshold {contrast_threshold}")
    phase = float(np.arctan2(b, -a))
    if phase_guess is not None:
        phase += 2.0 * np.pi * np.round((phase_guess - phase) / (2.0 * np.pi))

    residuals = y - design @ coeffs
    dof = max(x.size - 3, 1)
    cov_lin = float(residuals @ residuals) / dof * np.linalg.inv(design.T @ design)
    # (mean, A, B) -> (mean, C, φ)
    jacobian = np.zeros((3, 3))
    jacobian[0, 0] = 1.0
    jacobian[1, 1:] = 2.0 * np.array([a, b]) / half
    jacobian[2, 1:] = np.array([b, -a]) / half ** 2
    covariance = jacobian @ cov_lin @ jacobian.T
    return FringeFit(float(mean), contrast, phase, residuals, covariance)


def alpha_star_from_fit(fit: FringeFit, T: float, center: float) -> float:
    """Fringe-centring chirp α* (dark fringe, α*·T² + φ ≡ 0) nearest `center`."""
    turns = np.round((center * T ** 2 + fit.phase_offset) / (2.0 * np.pi))
    return float((2.0 * np.pi * turns - fit.phase_offset) / T ** 2)


@dataclass(frozen=True)
class ContrastDecayFit:
    c0: float
    sigma_v: float
    temperature: float


def fit_contrast_decay(omega_ds, contrasts, k_eff: float, T: float, species: Species) -> ContrastDecayFit:
    """Fit C₀·exp(−2k²σ_v²T⁴Ω²) and convert σ_v to a temperature."""
    omegas = np.asarray(omega_ds, dtype=float)
    values = np.asarray(contrasts, dtype=float)
    if np.count_nonzero(omegas) == 0:
        raise FitFailed("contrast decay needs at least one nonzero rotation rate")

    def model(w, c0, scale):
        return c0 * np.exp(-2.0 * (scale * w) ** 2)

    p0 = (values[np.argmin(omegas)], 0.5 / np.abs(omegas).max())
    try:
        (c0, scale), _ = curve_fit(model, omegas, values, p0=p0)
    except (RuntimeError, ValueError) as e:
        raise FitFailed(f"contrast decay fit failed: {e}") from e
    sigma_v = abs(scale) / (k_eff * T ** 2)
    return ContrastDecayFit(float(c0), float(sigma_v), float(species.temperature_from_dispersion(sigma_v)))


def correlation_coefficient(x, y) -> float:
    return float(np.corrcoef(np.asarray(x, dtype=float), np.asarray(y, dtype=float))[0, 1])


@dataclass(frozen=True)
class WavefrontSpec:
    """Polynomial wavefront phase A_k·x^k across the Raman beam."""

    order: int
    amplitude: float
    waist: float
    optical_quality: Optional[float] = None
    wavelength: float = 780.241e-9

    def __post_init__(self):
        if self.order < 2:
            raise ValueError(f"wavefront order must be >= 2, got {self.order}")
        if self.waist <= 0:
            raise ValueError(f"waist must be positive, got {self.waist}")

    @classmethod
    def from_optical_quality(cls, optical_quality: float, waist: float, wavelength: float = 780.241e-9,
                             order: int = 3) -> "WavefrontSpec":
        """Double-pass wavefront error OQ (m) reached at the beam waist."""
        amplitude = (2.0 * np.pi / wavelength * 2.0 * optical_quality) / waist ** order
        return cls(order, amplitude, waist, optical_quality, wavelength)

    @classmethod
    def from_peak_to_valley(cls, peak_to_valley: float, waist: float, wavelength: float = 780.241e-9,
                            order: int = 3) -> "WavefrontSpec":
        """Phase excursion (rad) reached at the beam waist."""
        return cls(order, peak_to_valley / waist ** order, waist, None, wavelength)

    def phase(self, x) -> np.ndarray:
        return self.amplitude * np.asarray(x, dtype=float) ** self.order


def wavefront_phase_polynomial(spec: WavefrontSpec, v_l: float, dx: float, T: float, x0: float = 0.0):
    """Three-pulse wavefront phase of the two launch branches x₀ ± (δx + v·tᵢ)."""
    t = np.array([-T, 0.0, T])
    weights = np.array([1.0, -2.0, 1.0])
    plus = float(weights @ spec.phase(x0 + (dx + v_l * t)))
    minus = float(weights @ spec.phase(x0 - (dx + v_l * t)))
    return plus, minus


def wavefront_rotation_bias(spec: WavefrontSpec, v_l: float, dx: float, k_eff: float, T: float,
                            x0: float = 0.0, exact_polynomial: bool = False) -> float:
    """
    Rotation bias from a wavefront aberration and a launch dissymmetry δx.

    With the branches centred on the beam (x₀ = 0), cubic order uses
    3·A₃·v·δx/k and even orders cancel between the two launch branches.
    Otherwise (x₀ ≠ 0, other odd orders or exact_polynomial=True) the
    polynomial three-point combination is divided by 4·v·k·T².
    """
    centred = x0 == 0.0 and not exact_polynomial
    if centred and spec.order % 2 == 0:
        return 0.0
    if centred and spec.order == 3:
        return 3.0 * spec.amplitude * v_l * dx / k_eff
    plus, minus = wavefront_phase_polynomial(spec, v_l, dx, T, x0)
    return (plus - minus) / (4.0 * v_l * k_eff * T ** 2)


def euler_coriolis_ratio(offset: float, phi0: float, drive_period: float, v_l: float, T: float,
                         sensitivity_weighted: bool = False) -> float:
    """
    Euler over Coriolis phase for a sinusoidal drive, atoms offset along the launch axis.

    By default the Euler phase k·d₀·Ω̇(tᵢ)·T² is accumulated at the three
    pulse times and compared with 2k·v·Ω_eff·T², the budget estimate.
    sensitivity_weighted=True returns the interferometer's actual response,
    the (1, −2, 1) combination of the mirror angle seen at d₀.
    """
    w = 2.0 * np.pi / drive_period
    wT = w * T
    if sensitivity_weighted:
        return float(offset * np.tan(phi0) * np.tan(0.5 * wT) / (abs(v_l) * T))
    # Σ Ω̇(tᵢ) over t = 0, T, 2T is −Ω_d·w·sin φ₀·(1 + 2 cos wT)
    pulses = 1.0 + 2.0 * np.cos(wT)
    return float(offset * np.tan(phi0) * w * pulses / (2.0 * abs(v_l) * np.sinc(wT / np.pi)))


@dataclass(frozen=True)
class BudgetInputs:
    """Geometry and imperfections entering the systematic budget."""

    species: Species
    T: float = 0.04
    v_l: float = 0.082
    g: float = 9.80883
    omega: float = 4.82e-5
    waist: float = 10.1e-3
    wavefront_order: int = 3
    optical_quality: float = 0.0
    asymmetry: float = 0.0
    peak_to_valley: float = 0.0
    dissymmetry: float = 0.0
    x0: float = 0.0
    euler_offset: float = 0.0
    euler_phi0: float = 0.0
    omega_d: float = 0.0
    drive_period: float = 0.5
    mirror_height: float = 0.0
    tilt: float = 0.0
    velocity_instability: float = 0.0


@dataclass(frozen=True)
class BudgetEntry:
    term: str
    axis: str
    value: float
    units: str
    inputs: dict = field(default_factory=dict)

    @property
    def inputs_hash(self) -> str:
        payload = json.dumps(self.inputs, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def systematic_budget(scene: BudgetInputs) -> list[BudgetEntry]:
    """
    Named bias terms on the rotation and acceleration outputs.

    Args:
        scene: geometry, wavefront and drive parameters

    Returns:
        Budget entries in a fixed order
    """
    k_eff = scene.species.k_eff
    lam = scene.species.lambda_raman
    entries = []

    oq_spec = WavefrontSpec.from_optical_quality(scene.optical_quality, scene.waist, lam, scene.wavefront_order)
    entries.append(BudgetEntry(
        "wavefront_optical_quality", "rotation",
        wavefront_rotation_bias(oq_spec, scene.v_l, scene.asymmetry, k_eff, scene.T, scene.x0),
        "rad/s",
        {"order": scene.wavefront_order, "optical_quality_m": scene.optical_quality,
         "asymmetry_m": scene.asymmetry, "waist_m": scene.waist, "v_mps": scene.v_l},
    ))

    pv_spec = WavefrontSpec.from_peak_to_valley(scene.peak_to_valley, scene.waist, lam, scene.wavefront_order)
    entries.append(BudgetEntry(
        "wavefront_peak_to_valley", "rotation",
        wavefront_rotation_bias(pv_spec, scene.v_l, 0.5 * scene.dissymmetry, k_eff, scene.T, scene.x0),
        "rad/s",
        {"order": scene.wavefront_order, "peak_to_valley_rad": scene.peak_to_valley,
         "dissymmetry_m": scene.dissymmetry, "waist_m": scene.waist, "v_mps": scene.v_l},
    ))

    ratio = euler_coriolis_ratio(scene.euler_offset, scene.euler_phi0, scene.drive_period, scene.v_l, scene.T)
    w_t = 2.0 * np.pi * scene.T / scene.drive_period
    effective = scene.omega_d * np.cos(scene.euler_phi0) * np.sinc(w_t / np.pi)
    euler_inputs = {"offset_m": scene.euler_offset, "phi0_rad": scene.euler_phi0,
                    "omega_d_rad_s": scene.omega_d, "drive_period_s": scene.drive_period}
    entries.append(BudgetEntry("euler_fraction", "rotation", ratio, "1", euler_inputs))
    entries.append(BudgetEntry("euler_rotation", "rotation", float(ratio * effective), "rad/s", euler_inputs))

    centrifugal_inputs = {"omega_rad_s": scene.omega, "height_m": scene.mirror_height}
    entries.append(BudgetEntry(
        "centrifugal_acceleration", "acceleration", scene.omega ** 2 * scene.mirror_height, "m/s^2",
        centrifugal_inputs,
    ))
    # even in the launch direction, removed by the ±v alternation
    entries.append(BudgetEntry("centrifugal_rotation", "rotation", 0.0, "rad/s", centrifugal_inputs))

    entries.append(BudgetEntry(
        "tilt_gravity", "acceleration", float(scene.g * (1.0 - np.cos(scene.tilt))), "m/s^2",
        {"g_mps2": scene.g, "tilt_rad": scene.tilt},
    ))
    entries.append(BudgetEntry(
        "velocity_scale_factor", "rotation", scene.omega * scene.velocity_instability, "rad/s",
        {"omega_rad_s": scene.omega, "relative_instability": scene.velocity_instability},
    ))
    return entries


def budget_entry(entries: list[BudgetEntry], term: str) -> BudgetEntry:
    for entry in entries:
        if entry.term == term:
            return entry
    raise KeyError(term)
