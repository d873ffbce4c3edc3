# [file name]: atomsense/physics_core.py
"""
Physics Core - constants, species data, launch kinematics and free fall.
All other modules take their constants from here.
"""

from dataclasses import dataclass

import numpy as np

# CODATA 2018
MU_B = 9.2740100783e-24  # J/T
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K

RB87_MASS = 1.44316e-25  # kg
RB87_D2_WAVELENGTH = 780.241e-9  # m
RB87_HYPERFINE = 6.834682610904e9  # Hz

G_LOCAL = 9.80883  # m/s^2
EARTH_ROTATION_PROJECTION = 4.82e-5  # rad/s, projected on the gyroscope axis

VERTICAL = np.array([0.0, 0.0, 1.0])
LAUNCH_AXIS = np.array([0.0, 1.0, 0.0])
SENSITIVE_AXIS = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Species:
    """Atomic species and Raman wavelength."""

    mass: float
    lambda_raman: float
    g_F: float
    hyperfine_splitting: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.lambda_raman <= 0:
            raise ValueError(f"lambda_raman must be positive, got {self.lambda_raman}")

    @classmethod
    def rb87(cls) -> "Species":
        return cls(RB87_MASS, RB87_D2_WAVELENGTH, 0.5, RB87_HYPERFINE)

    @property
    def k_eff(self) -> float:
        """Effective two-photon wave number 4π/λ (rad/m)."""
        return 4.0 * np.pi / self.lambda_raman

    @property
    def recoil_frequency(self) -> float:
        """Two-photon recoil ω_r = ħk²/2m (rad/s)."""
        return HBAR * self.k_eff ** 2 / (2.0 * self.mass)

    def velocity_dispersion(self, temperature: float) -> float:
        """One-axis rms velocity √(k_B T / m) of a thermal cloud."""
        return float(np.sqrt(K_B * max(temperature, 0.0) / self.mass))

    def temperature_from_dispersion(self, sigma_v: float) -> float:
        return self.mass * sigma_v ** 2 / K_B


@dataclass(frozen=True)
class LaunchPulse:
    """Magnetic gradient pulse acting on a Zeeman sub-level."""

    gradient: float  # T/m
    duration: float  # s
    m_F: int
    sign: int = 1

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"launch duration must be positive, got {self.duration}")
        if abs(self.m_F) > 2:
            raise ValueError(f"|m_F| must be <= 2, got {self.m_F}")
        if self.sign not in (-1, 1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")


@dataclass(frozen=True)
class BallisticState:
    """Position and velocity at a given time; arrays may be (3,) or (N, 3)."""

    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("ballistic state has non-finite components")


def launch_velocity(species: Species, pulse: LaunchPulse) -> float:
    """
    Velocity imparted by a Stern-Gerlach pulse in the impulse approximation.

    Args:
        species: atom data (mass, Landé factor)
        pulse: gradient magnitude, duration, Zeeman index and launch sign

    Returns:
        Launch velocity in m/s, signed by the pulse direction
    """
    force = MU_B * pulse.m_F * species.g_F * abs(pulse.gradient)
    return pulse.sign * force / species.mass * pulse.duration


def propagate(state: BallisticState, dt: float, gravity) -> BallisticState:
    """Closed-form free fall: r' = r + v dt + g dt²/2, v' = v + g dt."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    g = np.asarray(gravity, dtype=float)
    r = np.asarray(state.position, dtype=float)
    v = np.asarray(state.velocity, dtype=float)
    return BallisticState(
        position=r + v * dt + 0.5 * g * dt * dt,
        velocity=v + g * dt,
        time=state.time + dt,
    )


def gravity_vector(g: float, tilt: float = 0.0) -> np.ndarray:
    """Gravity (pointing down) seen in a frame tilted by `tilt` rad about the launch-normal axis."""
    return -g * np.array([0.0, np.sin(tilt), np.cos(tilt)])
