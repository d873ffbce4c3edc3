# [file name]: config/defaults.py
"""
Default scenario tree and its schema.

Physical quantities carry their unit in the key suffix (`T_ms`, `rms_mps2`);
keys without a unit are declared dimensionless. Values marked "fitted" were
adjusted so the desk-scale campaign lands on the measured noise floors; they
are not independent measurements.
"""

import copy
import math
from typing import Any, NamedTuple, Optional

# Longest matching suffix wins.
UNIT_SCALES = {
    "_s": 1.0,
    "_ms": 1e-3,
    "_us": 1e-6,
    "_hz": 1.0,
    "_khz": 1e3,
    "_mps": 1.0,
    "_mps2": 1.0,
    "_rad_s": 1.0,
    "_mrad_s": 1e-3,
    "_mrad": 1e-3,
    "_rad": 1.0,
    "_deg": math.pi / 180.0,
    "_mm": 1e-3,
    "_nm": 1e-9,
    "_kg": 1.0,
    "_uk": 1e-6,
    "_g_per_cm": 1e-2,  # G/cm -> T/m
    "_mps2_sqrt_hz": 1.0,
    "_rad_s_sqrt_hz": 1.0,
    "_mps_sqrt_s": 1.0,
}


class Field(NamedTuple):
    kind: type
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    unitless: bool = False
    choices: tuple = ()
    exclusive_min: bool = False
    item: type = float


def _q(minimum=None, maximum=None, exclusive_min=False):
    return Field(float, minimum, maximum, exclusive_min=exclusive_min)


def _n(minimum=None, maximum=None, exclusive_min=False):
    return Field(float, minimum, maximum, unitless=True, exclusive_min=exclusive_min)


def _i(minimum=None, maximum=None):
    return Field(int, minimum, maximum, unitless=True)


def _flag():
    return Field(bool, unitless=True)


def _text(*choices):
    return Field(str, unitless=True, choices=choices)


def _list(minimum=None, unitless=False):
    return Field(list, minimum, None, unitless=unitless)


def _signs():
    return Field(list, -1, 1, unitless=True, item=int)


SCHEMA = {
    "run": {
        "master_seed": _i(0),
        "duration_s": _q(0.0, exclusive_min=True),
        "threads": _i(0, 256),
        "out_dir": _text(),
    },
    "species": {
        "name": _text("rb87", "custom"),
        "mass_kg": _q(0.0, exclusive_min=True),
        "lambda_raman_nm": _q(100.0, 3000.0),
        "g_f": _n(-1.0, 1.0),
        "hyperfine_hz": _q(0.0, exclusive_min=True),
    },
    "launch": {
        "velocity_mps": _q(0.0, 10.0, exclusive_min=True),
        "gradient_g_per_cm": _q(0.0),
        "pulse_ms": _q(0.0, exclusive_min=True),
        "m_f": _i(-2, 2),
        "temperature_uk": _q(0.0),
        "cloud_radius_mm": _q(0.0),
        "offset_mm": _q(),
    },
    "interferometer": {
        "T_ms": _q(0.0, 1000.0, exclusive_min=True),
        "beam_waist_mm": _q(0.0, exclusive_min=True),
        "contrast": _n(0.0, 1.0, exclusive_min=True),
        "mean_population": _n(0.0, 1.0),
        "rabi_weighting": _flag(),
    },
    "truth": {
        "g_mps2": _q(0.0, exclusive_min=True),
        "omega_rad_s": _q(-1.0, 1.0),
        "tilt_mrad": _q(-10.0, 10.0),
    },
    "atomic_noise": {
        "atom_number": _i(0),
        "detection_noise": _n(0.0, 1.0),
        "launch_phase_noise_rad": _q(0.0),
        "accel_floor_mps2": _q(0.0),
        "rotation_floor_rad_s": _q(0.0),
        "common_mode_mps2_sqrt_hz": _q(0.0),
    },
    "vibration": {
        "rms_mps2": _q(0.0),
        "corners_hz": _list(0.0),
        "levels": _list(0.0, unitless=True),
        "residual_fraction": _n(0.0, 1.0),
        "rate_hz": _q(0.0, exclusive_min=True),
        "correction": _flag(),
    },
    "classical_accelerometer": {
        "white_mps2_sqrt_hz": _q(0.0),
        "crossover_s": _q(0.0, exclusive_min=True),
        "initial_bias_mps2": _q(),
        "scale_error": _n(-1.0, 1.0),
    },
    "classical_gyroscope": {
        "white_rad_s_sqrt_hz": _q(0.0),
        "crossover_s": _q(0.0, exclusive_min=True),
        "initial_bias_rad_s": _q(),
        "scale_error": _n(-1.0, 1.0),
    },
    "sequencer": {
        "cycle_period_s": _q(0.0, exclusive_min=True),
        "first_pulse_ms": _q(0.0),
        "shots_per_point": _i(8),
        "k_pattern": _signs(),
        "v_pattern": _signs(),
        "lock_gain": _n(0.0, 1.0, exclusive_min=True),
        "fringe_lost_fraction": _n(0.0, 1.0, exclusive_min=True),
    },
    "fusion": {
        "accel_gain": _n(0.0, 1.0),
        "rotation_gain": _n(0.0, 1.0),
        "fallback_gain": _n(0.0, 1.0, exclusive_min=True),
    },
    "dynamic": {
        "omega_d_mrad_s": _list(0.0),
        "drive_period_s": _q(0.0, exclusive_min=True),
        "phi0_rad": _q(-math.pi, math.pi),
        "beta_plus_deg": _q(-90.0, 90.0),
        "beta_minus_deg": _q(-90.0, 90.0),
        "n_mc_atoms": _i(1),
        "scan_fringes": _n(0.0, 10.0, exclusive_min=True),
        "contrast_threshold": _n(0.0, 1.0),
    },
    "velocimetry": {
        "n_spectra": _i(1),
        "spectrum_period_s": _q(0.0, exclusive_min=True),
        "pulse_us": _q(0.0, exclusive_min=True),
        "n_points": _i(16),
        "noise": _n(0.0),
        "copropagating_amplitude": _n(0.0),
        "correct_tpls": _flag(),
        "drift_enabled": _flag(),
        "drift_target_mps": _q(0.0),
        "drift_horizon_s": _q(0.0, exclusive_min=True),
        "drift_white_mps": _q(0.0),
        "tpls_pulses_us": _list(0.0),
    },
    "systematics": {
        "wavefront_order": _i(2, 9),
        "optical_quality_nm": _q(0.0),
        "asymmetry_mm": _q(),
        "peak_to_valley_rad": _q(0.0),
        "dissymmetry_mm": _q(),
        "x0_mm": _q(),
        "euler_offset_mm": _q(),
        "euler_phi0_rad": _q(-math.pi, math.pi),
        "euler_omega_d_mrad_s": _q(0.0),
        "mirror_height_mm": _q(),
        "velocity_instability": _n(0.0),
    },
    "output": {
        "plot": _flag(),
        "save_traces": _flag(),
    },
}

DEFAULT_SCENARIO = {
    "run": {
        "master_seed": 0,
        "duration_s": 7200.0,  # desk scale of the 44 h acquisition
        "threads": 0,  # 0: one per core
        "out_dir": "out",
    },
    "species": {
        "name": "rb87",
        "mass_kg": 1.443160648e-25,
        "lambda_raman_nm": 780.241,
        "g_f": 0.5,
        "hyperfine_hz": 6.834682610904e9,
    },
    "launch": {
        "velocity_mps": 0.082,
        "gradient_g_per_cm": 0.0,  # 0: use velocity_mps
        "pulse_ms": 10.0,
        "m_f": 2,
        "temperature_uk": 1.0,
        "cloud_radius_mm": 1.0,
        "offset_mm": 0.0,
    },
    "interferometer": {
        "T_ms": 40.0,
        "beam_waist_mm": 10.1,
        "contrast": 0.5,  # fitted
        "mean_population": 0.5,
        "rabi_weighting": False,
    },
    "truth": {
        "g_mps2": 9.80883,
        "omega_rad_s": 4.82e-5,
        "tilt_mrad": 0.0,
    },
    "atomic_noise": {
        "atom_number": 914000,  # fitted
        "detection_noise": 4.63e-3,  # fitted
        "launch_phase_noise_rad": 7.17e-3,  # fitted
        "accel_floor_mps2": 1e-7,
        "rotation_floor_rad_s": 4e-7,
        "common_mode_mps2_sqrt_hz": 2.4e-6,  # fitted
    },
    "vibration": {
        "rms_mps2": 2.05e-5,  # fitted
        "corners_hz": [2.0, 20.0],
        "levels": [1.0, 1.0],
        "residual_fraction": 0.2,
        "rate_hz": 250.0,
        "correction": True,
    },
    "classical_accelerometer": {
        "white_mps2_sqrt_hz": 1.2e-6,
        "crossover_s": 50.0,
        "initial_bias_mps2": 0.0,
        "scale_error": 0.0,
    },
    "classical_gyroscope": {
        "white_rad_s_sqrt_hz": 1.8e-6,
        "crossover_s": 1000.0,
        "initial_bias_rad_s": 0.0,
        "scale_error": 0.0,
    },
    "sequencer": {
        "cycle_period_s": 0.5,
        "first_pulse_ms": 300.0,
        "shots_per_point": 40,  # one fringe scan; 200 at full scale
        "k_pattern": [1, 1, -1, -1, 1, 1, -1, -1],
        "v_pattern": [1, 1, 1, 1, -1, -1, -1, -1],
        "lock_gain": 0.6,
        "fringe_lost_fraction": 0.9,
    },
    "fusion": {
        "accel_gain": 0.0,  # 0: from the ADEV crossing
        "rotation_gain": 0.0,
        "fallback_gain": 0.01,
    },
    "dynamic": {
        "omega_d_mrad_s": [0.0, 1.0, 2.0, 3.0, 4.0],
        "drive_period_s": 0.5,
        "phi0_rad": 0.0,
        "beta_plus_deg": 0.0,
        "beta_minus_deg": 0.0,
        "n_mc_atoms": 20000,
        "scan_fringes": 2.0,
        "contrast_threshold": 0.02,
    },
    "velocimetry": {
        "n_spectra": 36,  # 1 h at 100 s per spectrum, desk scale of 24 h
        "spectrum_period_s": 100.0,
        "pulse_us": 20.0,
        "n_points": 100,
        "noise": 0.01,
        "copropagating_amplitude": 0.3,
        "correct_tpls": True,
        "drift_enabled": True,
        "drift_target_mps": 60e-6,
        "drift_horizon_s": 1200.0,
        "drift_white_mps": 0.0,
        "tpls_pulses_us": [5.0, 10.0, 15.0, 20.0, 30.0, 40.0],
    },
    "systematics": {
        "wavefront_order": 3,
        "optical_quality_nm": 130.04,  # λ/6
        "asymmetry_mm": 0.6,
        "peak_to_valley_rad": 1.9,
        "dissymmetry_mm": 1.2,
        "x0_mm": 0.0,
        "euler_offset_mm": 10.0,
        "euler_phi0_rad": 0.02,
        "euler_omega_d_mrad_s": 3.0,
        "mirror_height_mm": 300.0,
        "velocity_instability": 7.3e-4,  # 60 µm/s over 0.082 m/s
    },
    "output": {
        "plot": True,
        "save_traces": False,
    },
}

# excluded from the config hash
RUN_LOCAL_KEYS = (("run", "threads"), ("run", "out_dir"), ("run", "master_seed"))


def unit_scale(key: str) -> Optional[float]:
    """SI factor of a key's unit suffix, None if it has none."""
    best = None
    for suffix, scale in UNIT_SCALES.items():
        if key.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = (suffix, scale)
    return None if best is None else best[1]


class ScenarioDefaults:
    """Read-only access to the default tree."""

    def __init__(self, tree: dict = DEFAULT_SCENARIO, schema: dict = SCHEMA):
        self._tree = tree
        self.schema = schema

    def tree(self) -> dict:
        """Deep copy of the defaults, safe to merge into."""
        return copy.deepcopy(self._tree)

    def sections(self) -> list[str]:
        return list(self._tree)

    def get(self, section: str, key: str) -> Any:
        return copy.deepcopy(self._tree[section][key])


defaults = ScenarioDefaults()
