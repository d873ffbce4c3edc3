# [file name]: atomsense/interferometer.py
"""
Mach-Zehnder phase models and population readout.

Coordinates: ẑ is the vertical Raman axis, ŷ the launch axis and x̂ the
gyroscope sensitive axis. Two phase models are provided: the closed form
for constant inertial inputs, and a three-pulse laser-phase oracle that
handles time-varying mirror rotation.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from atomsense.errors import SmallAngleViolation
from atomsense.physics_core import G_LOCAL, BallisticState, Species
from atomsense.rng import stream

SMALL_ANGLE_LIMIT = 10e-3  # rad
ENSEMBLE_CHUNK = 16384


@dataclass(frozen=True)
class InterferometerConfig:
    """Timing, wave-vector and chirp of one interferometer configuration."""

    T: float
    k_eff: float
    k_sign: int = 1
    v_sign: int = 1
    alpha: float = 0.0
    beam_waist: float = 10.1e-3
    t_pi: float = 0.0

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.beam_waist <= 0:
            raise ValueError(f"beam_waist must be positive, got {self.beam_waist}")
        if self.k_sign not in (-1, 1) or self.v_sign not in (-1, 1):
            raise ValueError("k_sign and v_sign must be +1 or -1")

    @property
    def pulse_times(self) -> np.ndarray:
        return self.t_pi + np.array([-self.T, 0.0, self.T])

    @property
    def k_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.k_sign * self.k_eff])

    def with_alpha(self, alpha: float) -> "InterferometerConfig":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class FringeOutput:
    """Measured population of one shot."""

    p2: float
    contrast: float
    mean: float
    delta_phi: float
    clamped: int = 0


def phase_closed_form(cfg: InterferometerConfig, a, omega, omega_dot, r, v_l) -> float:
    """
    Closed-form phase for constant inertial inputs.

    ΔΦ = [k·(a − 2Ω×v − Ω̇×r − Ω×(Ω×r)) − α]·T², with k = k_sign·k_eff·ẑ and
    v = v_sign·v_l.

    Args:
        cfg: interferometer configuration
        a: specific force on the frame (m/s², 3-vector; +g ẑ at rest)
        omega: rotation rate (rad/s, 3-vector)
        omega_dot: angular acceleration (rad/s², 3-vector)
        r: atom position relative to the rotation centre at the π pulse (m)
        v_l: launch velocity before the sign flip (m/s, 3-vector)

    Returns:
        Phase in rad
    """
    a = np.asarray(a, dtype=float)
    omega = np.asarray(omega, dtype=float)
    omega_dot = np.asarray(omega_dot, dtype=float)
    r = np.asarray(r, dtype=float)
    v = cfg.v_sign * np.asarray(v_l, dtype=float)

    inertial = (
        a
        - 2.0 * np.cross(omega, v)
        - np.cross(omega_dot, r)
        - np.cross(omega, np.cross(omega, r))
    )
    return float((cfg.k_vector @ inertial - cfg.alpha) * cfg.T ** 2)


def _tilt_pair(value) -> tuple[float, float]:
    tilt = np.atleast_1d(np.asarray(value, dtype=float))
    theta_x = float(tilt[0])
    theta_y = float(tilt[1]) if tilt.size > 1 else 0.0
    if max(abs(theta_x), abs(theta_y)) > SMALL_ANGLE_LIMIT:
        raise SmallAngleViolation(
            f"mirror tilt {max(abs(theta_x), abs(theta_y)):.3e} rad exceeds {SMALL_ANGLE_LIMIT} rad"
        )
    return theta_x, theta_y


def _static_mirror(t: float) -> float:
    return 0.0


def phase_oracle(
    cfg: InterferometerConfig,
    atom: BallisticState,
    mirror_tilt: Optional[Callable[[float], float]] = None,
    mirror_accel_displacement: Optional[Callable[[float], float]] = None,
    gravity=(0.0, 0.0, -G_LOCAL),
) -> np.ndarray:
    """
    Phase from the laser phase imprinted at the three pulse times.

    φᵢ = k_sign·k_eff·(z_mirror − z_atom − y_atom·θx + x_atom·θy) − α(tᵢ − t_π)²/2,
    ΔΦ = φ₁ − 2φ₂ + φ₃. The tilt θx is about the sensitive axis, signed so a
    tilt rate equals the rotation rate of the closed form; mirror_tilt may
    return a scalar θx or a (θx, θy) pair.

    Args:
        cfg: interferometer configuration
        atom: state of one atom (3-vectors) or an ensemble ((N, 3) arrays)
        mirror_tilt: t -> rad
        mirror_accel_displacement: t -> vertical mirror displacement (m)
        gravity: free-fall acceleration vector (m/s²)

    Returns:
        Phase per atom (rad); a 0-d array for a single atom
    """
    tilt_fn = mirror_tilt or _static_mirror
    mirror_fn = mirror_accel_displacement or _static_mirror
    g = np.asarray(gravity, dtype=float)
    r0 = np.asarray(atom.position, dtype=float)
    v0 = np.asarray(atom.velocity, dtype=float)
    kk = cfg.k_sign * cfg.k_eff

    total = 0.0
    for weight, t_i in zip((1.0, -2.0, 1.0), cfg.pulse_times):
        dt = t_i - atom.time
        pos = r0 + v0 * dt + 0.5 * g * dt * dt
        theta_x, theta_y = _tilt_pair(tilt_fn(t_i))
        z_mirror = float(mirror_fn(t_i))
        x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
        laser = kk * (z_mirror - z - y * theta_x + x * theta_y)
        chirp = 0.5 * cfg.alpha * (t_i - cfg.t_pi) ** 2
        total = total + weight * (laser - chirp)
    return np.asarray(total)


def contrast_decay(k_eff: float, sigma_v: float, T: float, omega_d: float) -> float:
    """Ensemble contrast loss exp(−2k²σ_v²T⁴Ω²) under a rotation rate Ω."""
    if min(k_eff, sigma_v, T, omega_d) < 0:
        raise ValueError("contrast_decay inputs must be non-negative")
    return float(np.exp(-2.0 * (k_eff * sigma_v * omega_d) ** 2 * T ** 4))


@dataclass(frozen=True)
class AtomEnsemble:
    """Monte Carlo cloud at a reference time (usually the first pulse)."""

    n_atoms: int
    positions: np.ndarray
    velocities: np.ndarray
    rng_seed: int
    temperature: float
    time: float = 0.0

    @classmethod
    def generate(
        cls,
        n_atoms: int,
        temperature: float,
        species: Species,
        mean_velocity,
        seed: int,
        cloud_radius: float = 1e-3,
        center=(0.0, 0.0, 0.0),
        time: float = 0.0,
        pool=None,
    ) -> "AtomEnsemble":
        """
        Draw a thermal cloud in fixed-size chunks, one random stream per chunk.

        Args:
            n_atoms: number of atoms
            temperature: cloud temperature (K)
            species: atom data
            mean_velocity: mean velocity 3-vector (m/s)
            seed: master seed
            cloud_radius: rms position spread per axis (m)
            center: mean position (m)
            time: reference time of the state
            pool: optional ParallelMap for chunk generation

        Returns:
            AtomEnsemble with (n_atoms, 3) positions and velocities
        """
        if n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
        sigma_v = species.velocity_dispersion(temperature)
        mean_v = np.asarray(mean_velocity, dtype=float)
        mean_r = np.asarray(center, dtype=float)
        sizes = [min(ENSEMBLE_CHUNK, n_atoms - start) for start in range(0, n_atoms, ENSEMBLE_CHUNK)]

        def draw(chunk):
            index, size = chunk
            rng = stream(seed, "ensemble", index)
            pos = mean_r + rng.normal(0.0, cloud_radius, (size, 3))
            vel = mean_v + rng.normal(0.0, sigma_v, (size, 3))
            return pos, vel

        chunks = list(enumerate(sizes))
        parts = pool.map(draw, chunks) if pool is not None else [draw(c) for c in chunks]
        positions = np.concatenate([p for p, _ in parts])
        velocities = np.concatenate([v for _, v in parts])
        return cls(n_atoms, positions, velocities, int(seed), float(temperature), float(time))

    @property
    def state(self) -> BallisticState:
        return BallisticState(self.positions, self.velocities, self.time)

    @property
    def velocity_dispersion(self) -> np.ndarray:
        """Sample rms velocity per axis."""
        return self.velocities.std(axis=0, ddof=1)


def ensemble_phases(
    cfg: InterferometerConfig,
    ensemble: AtomEnsemble,
    mirror_tilt=None,
    mirror_accel_displacement=None,
    gravity=(0.0, 0.0, -G_LOCAL),
    pool=None,
) -> np.ndarray:
    """Oracle phase for every atom, evaluated chunk by chunk."""
    bounds = [(s, min(s + ENSEMBLE_CHUNK, ensemble.n_atoms)) for s in range(0, ensemble.n_atoms, ENSEMBLE_CHUNK)]

    def evaluate(bound):
        lo, hi = bound
        atoms = BallisticState(ensemble.positions[lo:hi], ensemble.velocities[lo:hi], ensemble.time)
        return phase_oracle(cfg, atoms, mirror_tilt, mirror_accel_displacement, gravity)

    parts = pool.map(evaluate, bounds) if pool is not None else [evaluate(b) for b in bounds]
    return np.concatenate(parts)


def realized_contrast(phases) -> float:
    """Contrast factor |⟨exp(iΦ)⟩| left by a phase spread."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    return float(np.abs(np.mean(np.exp(1j * phases))))


def rabi_weighting(ensemble: AtomEnsemble, beam_waist: float) -> float:
    """Mean π-pulse transfer efficiency of the cloud in a Gaussian beam."""
    r2 = ensemble.positions[:, 0] ** 2 + ensemble.positions[:, 1] ** 2
    pulse_area = 0.5 * np.pi * np.exp(-2.0 * r2 / beam_waist ** 2)
    return float(np.mean(np.sin(pulse_area) ** 2))


def detect(
    phases,
    n_atoms: int,
    detection_noise: float,
    rng: np.random.Generator,
    contrast: float = 1.0,
    mean: float = 0.5,
    projection_noise: bool = True,
) -> FringeOutput:
    """
    Read out the F=2 population of one shot.

    One phase per atom draws a Bernoulli outcome per atom; any other number
    of phases draws a binomial count on the ensemble-mean probability.
    Detection noise is one Gaussian on P₂, then P₂ is clamped to [0, 1].
    """
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    probabilities = mean - 0.5 * contrast * np.cos(phases)

    if not projection_noise:
        p2 = float(np.mean(probabilities))
    elif phases.size == n_atoms:
        p2 = float(np.count_nonzero(rng.random(n_atoms) < probabilities)) / n_atoms
    else:
        p = float(np.clip(np.mean(probabilities), 0.0, 1.0))
        p2 = float(rng.binomial(n_atoms, p)) / n_atoms

    if detection_noise > 0:
        p2 += float(rng.normal(0.0, detection_noise))

    clamped = 0
    if p2 < 0.0 or p2 > 1.0:
        clamped = 1
        p2 = min(max(p2, 0.0), 1.0)

    phasor = np.mean(np.exp(1j * phases))
    return FringeOutput(
        p2=p2,
        contrast=float(contrast * np.abs(phasor)),
        mean=float(mean),
        delta_phi=float(np.angle(phasor)),
        clamped=clamped,
    )


def qpn_rotation_asd(contrast: float, n_atoms: float, k_eff: float, v_l: float, T: float, cycle_period: float) -> float:
    """Rotation noise density (rad/s/√Hz) set by projection noise 1/(C√N)."""
    sigma_phi = 1.0 / (contrast * np.sqrt(n_atoms))
    return float(sigma_phi / (2.0 * k_eff * abs(v_l) * T ** 2 * np.sqrt(1.0 / cycle_period)))
