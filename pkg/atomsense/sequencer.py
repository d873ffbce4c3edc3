# [file name]: atomsense/sequencer.py
"""
Measurement protocol: mid-fringe lock, ±k/±v alternation, static demodulation
into (a, Ω), fringe scans and dynamic rotation extraction.

Sign table (Φ = k_s·k·(a − 2·v_s·v·Ω_x)·T²):

    config     α (locked)
    +k +v      +k(a − 2vΩ)
    +k −v      +k(a + 2vΩ)
    −k +v      −k(a − 2vΩ)
    −k −v      −k(a + 2vΩ)

Static demodulation then returns +a and +Ω. Dynamic extraction is applied
with the signed launch velocity v_l = v_s·v.
"""

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from atomsense.analysis import FringeFit, alpha_star_from_fit, euler_coriolis_ratio, fit_fringe
from atomsense.errors import FringeLost
from atomsense.interferometer import (
    AtomEnsemble,
    FringeOutput,
    InterferometerConfig,
    detect,
    ensemble_phases,
    phase_closed_form,
    rabi_weighting,
)
from atomsense.physics_core import G_LOCAL, Species
from atomsense.rng import stream
from atomsense.sensors_and_noise import (
    ClassicalSensorModel,
    SensorTrace,
    VibrationModel,
    convolve_sensitivity_many,
    gen_flicker,
    gen_vibration,
    sample_classical,
)
from utils.log import get_logger

logger = get_logger("Sequencer")

LOST_UPDATES = 3


class AlphaSet(NamedTuple):
    """Locked chirp rates of one 8-shot block (rad/s²)."""

    pk_pv: float
    pk_mv: float
    mk_pv: float
    mk_mv: float


# Canonical configuration order, the one AlphaSet and per-configuration a_conv use.
BLOCK_CONFIGS = ((1, 1), (-1, 1), (1, -1), (-1, -1))
CONFIG_NAMES = {(1, 1): "pk_pv", (1, -1): "pk_mv", (-1, 1): "mk_pv", (-1, -1): "mk_mv"}


@dataclass(frozen=True)
class CycleConfig:
    """Timing and schedule of the static protocol."""

    cycle_period: float = 0.5
    shots_per_point: int = 40
    T: float = 0.04
    v_l: float = 0.082
    first_pulse: float = 0.3
    lock_gain: float = 0.6
    fringe_lost_fraction: float = 0.9
    k_pattern: tuple = (1, 1, -1, -1, 1, 1, -1, -1)
    v_pattern: tuple = (1, 1, 1, 1, -1, -1, -1, -1)

    def __post_init__(self):
        if self.T <= 0 or self.cycle_period <= 0:
            raise ValueError("T and cycle_period must be positive")
        if self.cycle_period <= self.first_pulse + 2.0 * self.T:
            raise ValueError(
                f"cycle_period {self.cycle_period} s shorter than the interferometer "
                f"(first pulse {self.first_pulse} s + 2T)"
            )
        if len(self.k_pattern) != 8 or len(self.v_pattern) != 8:
            raise ValueError("static patterns must have period 8 shots")
        if any(s not in (1, -1) for s in self.k_pattern + self.v_pattern):
            raise ValueError("pattern entries must be +1 or -1")
        pairs = list(zip(self.k_pattern, self.v_pattern))
        if any(pairs[i] != pairs[i + 1] for i in range(0, 8, 2)):
            raise ValueError("patterns must keep each configuration for a (+δ, −δ) shot pair")
        if sorted(pairs[::2]) != sorted(BLOCK_CONFIGS):
            raise ValueError("each block must visit all four ±k/±v configurations once")
        if self.shots_per_point < 8:
            raise ValueError(f"shots_per_point must be >= 8, got {self.shots_per_point}")
        if not 0.0 < self.lock_gain <= 1.0:
            raise ValueError(f"lock gain must be in (0, 1], got {self.lock_gain}")

    @property
    def block_configs(self) -> tuple:
        """(k_sign, v_sign) of each shot pair of a block, in schedule order."""
        return tuple(zip(self.k_pattern[::2], self.v_pattern[::2]))

    def canonical_shots(self) -> np.ndarray:
        """Shot indices inside a block, reordered to BLOCK_CONFIGS order."""
        order = [self.block_configs.index(c) for c in BLOCK_CONFIGS]
        return np.array([[2 * j, 2 * j + 1] for j in order]).ravel()

    @property
    def block_duration(self) -> float:
        return 8.0 * self.cycle_period

    def t_pi(self, shot_index) -> np.ndarray:
        return np.asarray(shot_index) * self.cycle_period + self.first_pulse + self.T


@dataclass
class LockState:
    """Mid-fringe servo of one (k, v) configuration."""

    alpha: float
    lost_count: int = 0
    updates: int = 0


@dataclass(frozen=True)
class LockSettings:
    contrast: float
    T: float
    gain: float = 0.6
    lost_fraction: float = 0.9


def modulation_depth(T: float) -> float:
    """Chirp offset δ with δ·T² = π/2."""
    return 0.5 * np.pi / T ** 2


def measured_alpha(alpha: float, p2_pair: Sequence[FringeOutput], contrast: float, T: float) -> float:
    """Chirp rate centring the fringe, inverted exactly from a (+δ, −δ) pair."""
    plus, minus = p2_pair
    ratio = np.clip(-(plus.p2 - minus.p2) / contrast, -1.0, 1.0)
    return float(alpha + np.arcsin(ratio) / T ** 2)


def mid_fringe_step(state: LockState, p2_pair: Sequence[FringeOutput], cfg: LockSettings) -> float:
    """
    One lock update from the two sides of the fringe.

    α ← α − gain·(P₂⁺ − P₂⁻)/(C·T²). The lock state is updated in place.

    Args:
        state: lock of one configuration
        p2_pair: shots taken at α + δ and α − δ
        cfg: contrast, T, gain and loss threshold

    Returns:
        The updated α (rad/s²)
    """
    plus, minus = p2_pair
    error = plus.p2 - minus.p2
    if abs(error) > cfg.lost_fraction * cfg.contrast:
        state.lost_count += 1
        if state.lost_count >= LOST_UPDATES:
            raise FringeLost(
                f"|P+ - P-| = {abs(error):.3f} above {cfg.lost_fraction:.2f}·C for "
                f"{state.lost_count} consecutive updates"
            )
    else:
        state.lost_count = 0
    state.alpha = state.alpha - cfg.gain * error / (cfg.contrast * cfg.T ** 2)
    state.updates += 1
    return state.alpha


def forward_static_alphas(a, omega, v_l: float, k_eff: float) -> AlphaSet:
    """Noiseless locked chirp rates for given (a, Ω)."""
    a = np.asarray(a, dtype=float)
    omega = np.asarray(omega, dtype=float)
    coriolis = 2.0 * v_l * omega
    return AlphaSet(
        pk_pv=k_eff * (a - coriolis),
        pk_mv=k_eff * (a + coriolis),
        mk_pv=-k_eff * (a - coriolis),
        mk_mv=-k_eff * (a + coriolis),
    )


def _config_means(a_conv) -> np.ndarray:
    values = np.asarray(a_conv, dtype=float)
    if values.shape[-1] == 8:
        # per-shot values in BLOCK_CONFIGS order, one (+δ, −δ) pair per configuration
        values = values.reshape(values.shape[:-1] + (4, 2)).mean(axis=-1)
    return values


def vibration_correction_term(a_conv) -> float:
    """Δa_corr = a(+k,+v) + a(−k,+v) − a(+k,−v) − a(−k,−v), block order."""
    per_config = _config_means(a_conv)
    return per_config[..., 0] + per_config[..., 1] - per_config[..., 2] - per_config[..., 3]


def demodulate_static(rec, a_conv=None, v_l: float = 0.082, k_eff: float = 0.0):
    """
    Acceleration and rotation from the four locked chirp rates.

    a = [(α₊ₖ₋ᵥ − α₋ₖ₋ᵥ) + (α₊ₖ₊ᵥ − α₋ₖ₊ᵥ)]/4k − ⟨a_conv⟩
    Ω = [(α₊ₖ₋ᵥ − α₋ₖ₋ᵥ) − (α₊ₖ₊ᵥ − α₋ₖ₊ᵥ)]/8vk + Δa_corr/8v

    Args:
        rec: AlphaSet (scalars or arrays)
        a_conv: classical vibration estimates, 4 per-configuration values
            or 8 per-shot values in block order; None for no correction
        v_l: launch velocity magnitude (m/s)
        k_eff: effective wave number (rad/m)

    Returns:
        (a, omega)
    """
    minus_v = np.asarray(rec.pk_mv) - np.asarray(rec.mk_mv)
    plus_v = np.asarray(rec.pk_pv) - np.asarray(rec.mk_pv)
    a = (minus_v + plus_v) / (4.0 * k_eff)
    omega = (minus_v - plus_v) / (8.0 * v_l * k_eff)
    if a_conv is not None:
        per_config = _config_means(a_conv)
        a = a - per_config.mean(axis=-1)
        omega = omega + vibration_correction_term(per_config) / (8.0 * v_l)
    return a, omega


@dataclass(frozen=True)
class MeasurementRecord:
    """One 8-shot block."""

    t: float
    alpha_pk_pv: float
    alpha_pk_mv: float
    alpha_mk_pv: float
    alpha_mk_mv: float
    a: float
    omega: float
    a_conv: tuple
    a_conv_correction: float
    a_uncorrected: float
    omega_uncorrected: float

    @property
    def alphas(self) -> AlphaSet:
        return AlphaSet(self.alpha_pk_pv, self.alpha_pk_mv, self.alpha_mk_pv, self.alpha_mk_mv)


@dataclass(frozen=True)
class StaticScene:
    """Ground truth and noise models of a static campaign."""

    species: Species
    g: float = G_LOCAL
    omega: float = 4.82e-5
    tilt: float = 0.0
    contrast: float = 0.5
    mean_population: float = 0.5
    atom_number: int = 914000
    detection_noise: float = 4.63e-3
    launch_phase_noise: float = 7.17e-3
    accel_floor: float = 1e-7
    rotation_floor: float = 4e-7
    common_mode_asd: float = 2.4e-6
    vibration: VibrationModel = field(default_factory=VibrationModel)
    vibration_rate: float = 250.0
    vibration_correction: bool = True
    accelerometer: ClassicalSensorModel = field(default_factory=lambda: ClassicalSensorModel(0.0, 0.0))
    gyroscope: ClassicalSensorModel = field(default_factory=lambda: ClassicalSensorModel(0.0, 0.0))
    master_seed: int = 0

    @property
    def vertical_g(self) -> float:
        return self.g * np.cos(self.tilt)


@dataclass
class ShotLog:
    """Per-configuration lock measurements kept for the correlation study."""

    t: list = field(default_factory=list)
    config: list = field(default_factory=list)
    alpha_accel: list = field(default_factory=list)
    a_conv: list = field(default_factory=list)
    clamped: int = 0

    def centered_alpha(self) -> np.ndarray:
        """
        Locked α in acceleration units with each configuration's campaign mean
        removed, so the g ± 2vΩ offsets between configurations drop out and
        what remains is comparable with a_conv.
        """
        alpha = np.asarray(self.alpha_accel, dtype=float)
        config = np.asarray(self.config)
        centered = np.empty_like(alpha)
        for name in np.unique(config):
            mask = config == name
            centered[mask] = alpha[mask] - alpha[mask].mean()
        return centered


class StaticCampaign:
    """
    Static acquisition: builds the environment, then runs the locked
    ±k/±v protocol block by block.
    """

    def __init__(self, duration: float, scene: StaticScene, cfg: CycleConfig):
        self.scene = scene
        self.cfg = cfg
        self.n_blocks = int(duration // cfg.block_duration)
        if self.n_blocks < 1:
            raise ValueError(f"duration {duration} s shorter than one block ({cfg.block_duration} s)")
        self.n_shots = 8 * self.n_blocks
        self.k_eff = scene.species.k_eff
        self.shots = ShotLog()
        self.vibration: Optional[SensorTrace] = None
        self.classical_accel: Optional[SensorTrace] = None
        self.classical_gyro: Optional[SensorTrace] = None
        self._prepared = False

    @property
    def duration(self) -> float:
        return self.n_blocks * self.cfg.block_duration

    def prepare(self):
        """Generate vibration, classical outputs and slow atomic noise."""
        if self._prepared:
            return
        scene, cfg, seed = self.scene, self.cfg, self.scene.master_seed
        span = self.duration + cfg.cycle_period
        logger.info(f"Preparing {self.n_blocks} blocks ({self.duration:.0f} s) at seed {seed}")

        self.vibration = gen_vibration(scene.vibration, span, scene.vibration_rate, stream(seed, "vibration"))
        residual = gen_vibration(scene.vibration, span, scene.vibration_rate, stream(seed, "vibration_residual"))

        t_pis = cfg.t_pi(np.arange(self.n_shots))
        self.a_conv_true = convolve_sensitivity_many(self.vibration, t_pis, cfg.T)
        self.a_conv_classical = self.a_conv_true + scene.vibration.residual_fraction * convolve_sensitivity_many(
            residual, t_pis, cfg.T
        )

        # classical sensors on the platform, recorded as one average per cycle
        accel_truth = SensorTrace(
            scene.vibration_rate, scene.vertical_g + self.vibration.samples, 0.0, "m/s^2"
        )
        gyro_truth = SensorTrace(scene.vibration_rate, np.full(len(self.vibration), scene.omega), 0.0, "rad/s")
        accel = sample_classical(scene.accelerometer, accel_truth, stream(seed, "classical_accelerometer"))
        gyro = sample_classical(scene.gyroscope, gyro_truth, stream(seed, "classical_gyroscope"))
        cycle_starts = np.arange(self.n_shots) * cfg.cycle_period
        rate = 1.0 / cfg.cycle_period
        self.classical_accel = SensorTrace(rate, accel.block_means(cycle_starts, cfg.cycle_period), 0.0, "m/s^2")
        self.classical_gyro = SensorTrace(rate, gyro.block_means(cycle_starts, cfg.cycle_period), 0.0, "rad/s")

        self.accel_drift = gen_flicker(self.n_blocks, scene.accel_floor, stream(seed, "accel_floor"))
        self.rotation_drift = gen_flicker(self.n_blocks, scene.rotation_floor, stream(seed, "rotation_floor"))
        self.common_mode = stream(seed, "common_mode").normal(
            0.0, scene.common_mode_asd / np.sqrt(cfg.block_duration), self.n_blocks
        )
        self.launch_noise = stream(seed, "launch").normal(0.0, scene.launch_phase_noise, self.n_shots)
        self._prepared = True

    def _inertial_phase(self, k_sign: int, v_sign: int, alpha: float, block: int) -> float:
        cfg, scene = self.cfg, self.scene
        ifo = InterferometerConfig(T=cfg.T, k_eff=self.k_eff, k_sign=k_sign, v_sign=v_sign, alpha=alpha)
        a = (0.0, 0.0, scene.vertical_g + self.accel_drift[block] + self.common_mode[block])
        omega = (scene.omega + self.rotation_drift[block], 0.0, 0.0)
        return phase_closed_form(ifo, a, omega, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, cfg.v_l, 0.0))

    def records(self) -> Iterator[MeasurementRecord]:
        """Run the protocol; yields one record per block, in time order."""
        self.prepare()
        scene, cfg = self.scene, self.cfg
        k_eff, T = self.k_eff, cfg.T
        delta = modulation_depth(T)
        lock_cfg = LockSettings(scene.contrast, T, cfg.lock_gain, cfg.fringe_lost_fraction)
        locks = {
            (ks, vs): LockState(alpha=ks * k_eff * scene.g) for ks, vs in BLOCK_CONFIGS
        }
        rng = stream(scene.master_seed, "detection")
        use_qpn = scene.atom_number > 0
        n_atoms = max(int(scene.atom_number), 1)

        for block in range(self.n_blocks):
            alphas = {}
            shot = 8 * block
            for ks, vs in cfg.block_configs:
                lock = locks[(ks, vs)]
                pair = []
                for side in (1, -1):
                    applied = lock.alpha + side * delta
                    phase = (
                        self._inertial_phase(ks, vs, applied, block)
                        + ks * k_eff * self.a_conv_true[shot] * T ** 2
                        + vs * self.launch_noise[shot]
                    )
                    out = detect(
                        [phase], n_atoms, scene.detection_noise, rng,
                        contrast=scene.contrast, mean=scene.mean_population, projection_noise=use_qpn,
                    )
                    self.shots.clamped += out.clamped
                    pair.append(out)
                    shot += 1
                alpha = measured_alpha(lock.alpha, pair, scene.contrast, T)
                alphas[CONFIG_NAMES[(ks, vs)]] = alpha
                mid_fringe_step(lock, pair, lock_cfg)

                config_conv = 0.5 * (self.a_conv_classical[shot - 2] + self.a_conv_classical[shot - 1])
                self.shots.t.append(float(cfg.t_pi(shot - 2)))
                self.shots.config.append(CONFIG_NAMES[(ks, vs)])
                self.shots.alpha_accel.append(alpha / (ks * k_eff))
                self.shots.a_conv.append(float(config_conv))

            yield self._make_record(block, AlphaSet(**alphas))

        if self.shots.clamped:
            logger.warning(f"{self.shots.clamped} detections clamped to [0, 1]")

    def _make_record(self, block: int, alphas: AlphaSet) -> MeasurementRecord:
        cfg = self.cfg
        conv = self.a_conv_classical[8 * block: 8 * block + 8][cfg.canonical_shots()]
        a_raw, omega_raw = demodulate_static(alphas, None, cfg.v_l, self.k_eff)
        if self.scene.vibration_correction:
            a, omega = demodulate_static(alphas, conv, cfg.v_l, self.k_eff)
            correction = float(vibration_correction_term(conv))
        else:
            a, omega, correction = a_raw, omega_raw, 0.0
        return MeasurementRecord(
            t=block * cfg.block_duration,
            alpha_pk_pv=alphas.pk_pv,
            alpha_pk_mv=alphas.pk_mv,
            alpha_mk_pv=alphas.mk_pv,
            alpha_mk_mv=alphas.mk_mv,
            a=float(a),
            omega=float(omega),
            a_conv=tuple(float(x) for x in conv),
            a_conv_correction=correction,
            a_uncorrected=float(a_raw),
            omega_uncorrected=float(omega_raw),
        )


def run_static_campaign(duration: float, scene: StaticScene, cfg: CycleConfig) -> Iterator[MeasurementRecord]:
    """Record stream of a static campaign (see StaticCampaign for the environment)."""
    return StaticCampaign(duration, scene, cfg).records()


@dataclass(frozen=True)
class DynamicDrive:
    """
    Loudspeaker-driven rotation Ω(t) = Ω_d·cos(2π(t − T)/T_c + φ₀)·axis,
    t measured from the first pulse of each cycle.
    """

    omega_d: float
    phi0: float = 0.0
    axis: tuple = (1.0, 0.0, 0.0)
    beta_plus: float = 0.0
    beta_minus: float = 0.0
    cycle_period: float = 0.5

    def __post_init__(self):
        if self.omega_d < 0:
            raise ValueError(f"omega_d must be >= 0, got {self.omega_d}")
        norm = np.linalg.norm(self.axis)
        if not np.isclose(norm, 1.0):
            raise ValueError(f"axis must be a unit vector, got norm {norm}")

    @property
    def angular_frequency(self) -> float:
        return 2.0 * np.pi / self.cycle_period

    def beta(self, v_sign: int) -> float:
        return self.beta_plus if v_sign > 0 else self.beta_minus

    def rate(self, t, T: float) -> np.ndarray:
        w = self.angular_frequency
        return self.omega_d * np.cos(w * (t - T) + self.phi0) * np.asarray(self.axis)

    def angle(self, t, T: float) -> np.ndarray:
        """Mirror rotation angle (zero at the first pulse)."""
        w = self.angular_frequency
        value = self.omega_d / w * (np.sin(w * (t - T) + self.phi0) - np.sin(self.phi0 - w * T))
        return value * np.asarray(self.axis)

    def effective_rate(self, T: float) -> float:
        """Mean of Ω over the interferometer [0, 2T], the rate the Coriolis phase records."""
        wT = self.angular_frequency * T
        return float(self.omega_d * np.cos(self.phi0) * np.sinc(wT / np.pi))

    def euler_fraction(self, offset: float, v_l: float, T: float, sensitivity_weighted: bool = False) -> float:
        """Euler phase over Coriolis phase for atoms offset by `offset` along the launch axis."""
        return euler_coriolis_ratio(offset, self.phi0, self.cycle_period, v_l, T, sensitivity_weighted)


def launch_direction(beta: float) -> np.ndarray:
    """Horizontal launch unit vector rotated by β away from ŷ."""
    return np.array([-np.sin(beta), np.cos(beta), 0.0])


def project_classical_rotation(omega_x, omega_y, beta):
    """Classical rotation seen along a launch axis misaligned by β."""
    return omega_x * np.cos(beta) + omega_y * np.sin(beta)


def demodulate_dynamic(alpha_stars: Sequence[float], v_l: float, k_eff: float) -> float:
    """
    Rotation from fringe shifts between driven and undriven scans.

    Args:
        alpha_stars: (α₊ₖ^Ωd, α₋ₖ^Ωd, α₊ₖ^0, α₋ₖ^0)
        v_l: signed launch velocity v_s·v (m/s)
        k_eff: effective wave number (rad/m)

    Returns:
        Ω (rad/s)
    """
    plus_d, minus_d, plus_0, minus_0 = (float(x) for x in alpha_stars)
    return -((plus_d - minus_d) - (plus_0 - minus_0)) / (4.0 * v_l * k_eff)


@dataclass(frozen=True)
class DynamicSettings:
    """Everything a fringe scan needs besides the drive."""

    species: Species
    T: float = 0.04
    v_l: float = 0.082
    cycle_period: float = 0.5
    g: float = G_LOCAL
    static_omega: float = 4.82e-5
    contrast: float = 0.5
    mean_population: float = 0.5
    atom_number: int = 914000
    detection_noise: float = 4.63e-3
    temperature: float = 1e-6
    n_mc_atoms: int = 20000
    cloud_radius: float = 1e-3
    offset: float = 0.0
    scan_fringes: float = 2.0
    rabi_weighting: bool = False
    beam_waist: float = 10.1e-3
    vibration: VibrationModel = field(default_factory=VibrationModel)
    vibration_rate: float = 250.0
    vibration_correction: bool = True
    contrast_threshold: float = 0.02
    gyroscope: ClassicalSensorModel = field(default_factory=lambda: ClassicalSensorModel(0.0, 0.0))
    master_seed: int = 0


@dataclass(frozen=True)
class FringeScan:
    """Result of one scanned fringe."""

    alpha_star: float
    contrast: float
    fit: FringeFit
    alphas: np.ndarray
    alphas_corrected: np.ndarray
    p2: np.ndarray
    ensemble_contrast: float
    classical_rate: float = 0.0


def run_fringe_scan(drive: DynamicDrive, k_sign: int, v_sign: int, n_shots: int, cfg: DynamicSettings,
                    scan_index: int = 0, pool=None) -> FringeScan:
    """
    Scan the chirp rate across the fringe under a driven rotation and fit it.

    The atom phases come from the oracle over a Monte Carlo ensemble; each
    shot's chirp is corrected by its classical vibration estimate before
    the sinusoid fit.

    Args:
        drive: rotation waveform and launch misalignments
        k_sign: wave-vector direction
        v_sign: launch direction
        n_shots: points in the scan
        cfg: physics and noise settings
        scan_index: selects independent random streams per scan
        pool: optional ParallelMap for the ensemble

    Returns:
        FringeScan with the fringe-centring α* and the fitted contrast
    """
    species = cfg.species
    k_eff = species.k_eff
    T = cfg.T
    seed = cfg.master_seed
    direction = launch_direction(drive.beta(v_sign))

    # atoms sit at `offset` along the launch axis at the π pulse
    center = (cfg.offset - v_sign * cfg.v_l * T) * direction
    ensemble = AtomEnsemble.generate(
        cfg.n_mc_atoms, cfg.temperature, species, v_sign * cfg.v_l * direction, seed,
        cloud_radius=cfg.cloud_radius, center=center, time=0.0, pool=pool,
    )
    ifo = InterferometerConfig(T=T, k_eff=k_eff, k_sign=k_sign, v_sign=1, alpha=0.0,
                               beam_waist=cfg.beam_waist, t_pi=T)

    def tilt(t):
        angle = drive.angle(t, T)
        return np.array([angle[0] + cfg.static_omega * t, angle[1]])

    phases = ensemble_phases(ifo, ensemble, tilt, None, (0.0, 0.0, -cfg.g), pool=pool)
    phasor = np.mean(np.exp(1j * phases))
    ensemble_contrast = float(np.abs(phasor))
    if cfg.rabi_weighting:
        ensemble_contrast *= rabi_weighting(ensemble, cfg.beam_waist)
    offset_phase = float(np.angle(phasor))

    # the classical gyroscope, averaged over the scan, centres it and picks the fringe branch
    duration = (n_shots + 1) * cfg.cycle_period
    gyro = cfg.gyroscope
    gyro_rng = stream(seed, "fringe_scan", scan_index, 3)
    rate = drive.effective_rate(T) * np.asarray(drive.axis)
    reading = (rate + np.array([cfg.static_omega, 0.0, 0.0])) * (1.0 + gyro.scale_error)
    reading[0] += gyro.initial_bias
    if gyro.white_psd > 0:
        reading[:2] += gyro_rng.normal(0.0, gyro.white_psd / np.sqrt(duration), 2)
    predicted = float(project_classical_rotation(reading[0], reading[1], drive.beta(v_sign)))
    center_alpha = k_sign * k_eff * (cfg.g - 2.0 * v_sign * cfg.v_l * predicted)
    span = cfg.scan_fringes * 2.0 * np.pi / T ** 2
    alphas = center_alpha + np.linspace(-0.5 * span, 0.5 * span, n_shots)

    vib_rng = stream(seed, "fringe_scan", scan_index, 0)
    res_rng = stream(seed, "fringe_scan", scan_index, 1)
    vibration = gen_vibration(cfg.vibration, duration, cfg.vibration_rate, vib_rng)
    residual = gen_vibration(cfg.vibration, duration, cfg.vibration_rate, res_rng)
    t_pis = np.arange(n_shots) * cfg.cycle_period + T
    a_true = convolve_sensitivity_many(vibration, t_pis, T)
    a_class = a_true + cfg.vibration.residual_fraction * convolve_sensitivity_many(residual, t_pis, T)

    det_rng = stream(seed, "fringe_scan", scan_index, 2)
    use_qpn = cfg.atom_number > 0
    p2 = np.empty(n_shots)
    for i, alpha in enumerate(alphas):
        phase = offset_phase + k_sign * k_eff * a_true[i] * T ** 2 - alpha * T ** 2
        out = detect([phase], max(int(cfg.atom_number), 1), cfg.detection_noise, det_rng,
                     contrast=cfg.contrast * ensemble_contrast, mean=cfg.mean_population,
                     projection_noise=use_qpn)
        p2[i] = out.p2

    corrected = alphas - k_sign * k_eff * a_class if cfg.vibration_correction else alphas.copy()
    fit = fit_fringe(corrected, p2, T, contrast_threshold=cfg.contrast_threshold)
    alpha_star = alpha_star_from_fit(fit, T, center_alpha)
    logger.debug(
        f"Scan k={k_sign:+d} v={v_sign:+d} Ωd={drive.omega_d:.2e}: α*={alpha_star:.6e}, C={fit.contrast:.4f}"
    )
    return FringeScan(alpha_star, fit.contrast, fit, alphas, corrected, p2, ensemble_contrast, predicted)
