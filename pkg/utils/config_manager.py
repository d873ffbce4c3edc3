# [file name]: utils/config_manager.py
"""
Scenario Configuration Manager
Loads scenario files (TOML, YAML or JSON), merges them over the defaults,
validates against the schema and builds the simulator's typed settings.
"""

import functools
import hashlib
import json
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

import yaml

from atomsense.analysis import BudgetInputs
from atomsense.errors import ConfigError
from atomsense.physics_core import LaunchPulse, Species, launch_velocity
from atomsense.raman_velocimetry import VelocimetrySettings, VelocityDriftModel
from atomsense.sensors_and_noise import ClassicalSensorModel, VibrationModel
from atomsense.sequencer import CycleConfig, DynamicDrive, DynamicSettings, StaticScene
from config.defaults import RUN_LOCAL_KEYS, ScenarioDefaults, defaults, unit_scale
from utils.log import get_logger

logger = get_logger("ConfigManager")


def _builder(method):
    """Report constructor rejections of configured values as ConfigError."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        try:
            return method(self, *args, **kwargs)
        except ValueError as e:
            raise ConfigError(f"{method.__name__}: {e}") from e

    return wrapper


class ScenarioConfig:
    """A resolved, validated scenario tree."""

    def __init__(self, tree: dict, source: Optional[str] = None):
        self.tree = tree
        self.source = source

    @property
    def seed(self) -> int:
        return int(self.tree["run"]["master_seed"])

    @property
    def hash(self) -> str:
        return config_hash(self.tree)

    def value(self, section: str, key: str) -> Any:
        return self.tree[section][key]

    def si(self, section: str, key: str):
        """Value converted to SI through its unit suffix."""
        raw = self.tree[section][key]
        scale = unit_scale(key) or 1.0
        if isinstance(raw, list):
            return [float(x) * scale for x in raw]
        return float(raw) * scale

    # --- builders -------------------------------------------------------

    @_builder
    def species(self) -> Species:
        if self.value("species", "name") == "rb87":
            return Species.rb87()
        return Species(
            mass=self.si("species", "mass_kg"),
            lambda_raman=self.si("species", "lambda_raman_nm"),
            g_F=float(self.value("species", "g_f")),
            hyperfine_splitting=self.si("species", "hyperfine_hz"),
        )

    @_builder
    def launch_speed(self) -> float:
        """Launch velocity: from the magnetic pulse when a gradient is set."""
        gradient = self.si("launch", "gradient_g_per_cm")
        if gradient > 0:
            pulse = LaunchPulse(gradient, self.si("launch", "pulse_ms"), int(self.value("launch", "m_f")))
            return abs(launch_velocity(self.species(), pulse))
        return self.si("launch", "velocity_mps")

    @_builder
    def cycle_config(self) -> CycleConfig:
        seq = "sequencer"
        return CycleConfig(
            cycle_period=self.si(seq, "cycle_period_s"),
            shots_per_point=int(self.value(seq, "shots_per_point")),
            k_pattern=tuple(self.value(seq, "k_pattern")),
            v_pattern=tuple(self.value(seq, "v_pattern")),
            T=self.si("interferometer", "T_ms"),
            v_l=self.launch_speed(),
            first_pulse=self.si(seq, "first_pulse_ms"),
            lock_gain=float(self.value(seq, "lock_gain")),
            fringe_lost_fraction=float(self.value(seq, "fringe_lost_fraction")),
        )

    @_builder
    def vibration_model(self) -> VibrationModel:
        return VibrationModel(
            corners=tuple(self.si("vibration", "corners_hz")),
            levels=tuple(float(x) for x in self.value("vibration", "levels")),
            rms=self.si("vibration", "rms_mps2"),
            residual_fraction=float(self.value("vibration", "residual_fraction")),
        )

    @_builder
    def accelerometer(self) -> ClassicalSensorModel:
        s = "classical_accelerometer"
        return ClassicalSensorModel.from_crossover(
            self.si(s, "white_mps2_sqrt_hz"), self.si(s, "crossover_s"),
            initial_bias=self.si(s, "initial_bias_mps2"), scale_error=float(self.value(s, "scale_error")),
        )

    @_builder
    def gyroscope(self) -> ClassicalSensorModel:
        s = "classical_gyroscope"
        return ClassicalSensorModel.from_crossover(
            self.si(s, "white_rad_s_sqrt_hz"), self.si(s, "crossover_s"),
            initial_bias=self.si(s, "initial_bias_rad_s"), scale_error=float(self.value(s, "scale_error")),
        )

    @_builder
    def static_scene(self) -> StaticScene:
        noise = "atomic_noise"
        return StaticScene(
            species=self.species(),
            g=self.si("truth", "g_mps2"),
            omega=self.si("truth", "omega_rad_s"),
            tilt=self.si("truth", "tilt_mrad"),
            contrast=float(self.value("interferometer", "contrast")),
            mean_population=float(self.value("interferometer", "mean_population")),
            atom_number=int(self.value(noise, "atom_number")),
            detection_noise=float(self.value(noise, "detection_noise")),
            launch_phase_noise=self.si(noise, "launch_phase_noise_rad"),
            accel_floor=self.si(noise, "accel_floor_mps2"),
            rotation_floor=self.si(noise, "rotation_floor_rad_s"),
            common_mode_asd=self.si(noise, "common_mode_mps2_sqrt_hz"),
            vibration=self.vibration_model(),
            vibration_rate=self.si("vibration", "rate_hz"),
            vibration_correction=bool(self.value("vibration", "correction")),
            accelerometer=self.accelerometer(),
            gyroscope=self.gyroscope(),
            master_seed=self.seed,
        )

    @_builder
    def dynamic_settings(self) -> DynamicSettings:
        dyn = "dynamic"
        return DynamicSettings(
            species=self.species(),
            T=self.si("interferometer", "T_ms"),
            v_l=self.launch_speed(),
            cycle_period=self.si("sequencer", "cycle_period_s"),
            g=self.si("truth", "g_mps2"),
            static_omega=self.si("truth", "omega_rad_s"),
            contrast=float(self.value("interferometer", "contrast")),
            mean_population=float(self.value("interferometer", "mean_population")),
            atom_number=int(self.value("atomic_noise", "atom_number")),
            detection_noise=float(self.value("atomic_noise", "detection_noise")),
            temperature=self.si("launch", "temperature_uk"),
            n_mc_atoms=int(self.value(dyn, "n_mc_atoms")),
            cloud_radius=self.si("launch", "cloud_radius_mm"),
            offset=self.si("launch", "offset_mm"),
            scan_fringes=float(self.value(dyn, "scan_fringes")),
            rabi_weighting=bool(self.value("interferometer", "rabi_weighting")),
            beam_waist=self.si("interferometer", "beam_waist_mm"),
            vibration=self.vibration_model(),
            vibration_rate=self.si("vibration", "rate_hz"),
            vibration_correction=bool(self.value("vibration", "correction")),
            contrast_threshold=float(self.value(dyn, "contrast_threshold")),
            gyroscope=self.gyroscope(),
            master_seed=self.seed,
        )

    @_builder
    def dynamic_drive(self, omega_d: float) -> DynamicDrive:
        dyn = "dynamic"
        return DynamicDrive(
            omega_d=omega_d,
            phi0=self.si(dyn, "phi0_rad"),
            beta_plus=self.si(dyn, "beta_plus_deg"),
            beta_minus=self.si(dyn, "beta_minus_deg"),
            cycle_period=self.si(dyn, "drive_period_s"),
        )

    @_builder
    def velocimetry_settings(self) -> VelocimetrySettings:
        vel = "velocimetry"
        return VelocimetrySettings(
            species=self.species(),
            pulse_duration=self.si(vel, "pulse_us"),
            n_points=int(self.value(vel, "n_points")),
            noise=float(self.value(vel, "noise")),
            copropagating_amplitude=float(self.value(vel, "copropagating_amplitude")),
            spectrum_period=self.si(vel, "spectrum_period_s"),
            correct_tpls=bool(self.value(vel, "correct_tpls")),
        )

    @_builder
    def drift_model(self) -> VelocityDriftModel:
        vel = "velocimetry"
        white = self.si(vel, "drift_white_mps")
        if not self.value(vel, "drift_enabled") or self.si(vel, "drift_target_mps") == 0:
            return VelocityDriftModel(white=white)
        return VelocityDriftModel.calibrated(
            self.si(vel, "drift_target_mps"), self.si(vel, "drift_horizon_s"), white=white,
        )

    @_builder
    def budget_inputs(self) -> BudgetInputs:
        sys_ = "systematics"
        return BudgetInputs(
            species=self.species(),
            T=self.si("interferometer", "T_ms"),
            v_l=self.launch_speed(),
            g=self.si("truth", "g_mps2"),
            omega=self.si("truth", "omega_rad_s"),
            waist=self.si("interferometer", "beam_waist_mm"),
            wavefront_order=int(self.value(sys_, "wavefront_order")),
            optical_quality=self.si(sys_, "optical_quality_nm"),
            asymmetry=self.si(sys_, "asymmetry_mm"),
            peak_to_valley=self.si(sys_, "peak_to_valley_rad"),
            dissymmetry=self.si(sys_, "dissymmetry_mm"),
            x0=self.si(sys_, "x0_mm"),
            euler_offset=self.si(sys_, "euler_offset_mm"),
            euler_phi0=self.si(sys_, "euler_phi0_rad"),
            omega_d=self.si(sys_, "euler_omega_d_mrad_s"),
            drive_period=self.si("dynamic", "drive_period_s"),
            mirror_height=self.si(sys_, "mirror_height_mm"),
            tilt=self.si("truth", "tilt_mrad"),
            velocity_instability=float(self.value(sys_, "velocity_instability")),
        )


def config_hash(tree: dict) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON, run-local keys removed."""
    stripped = json.loads(json.dumps(tree))
    for section, key in RUN_LOCAL_KEYS:
        stripped.get(section, {}).pop(key, None)
    canonical = json.dumps(stripped, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class ScenarioConfigManager:
    """Loads and validates scenario files."""

    def __init__(self, scenario_defaults: ScenarioDefaults = defaults):
        self.defaults = scenario_defaults
        self.schema = scenario_defaults.schema
        self._check_schema()

    def _check_schema(self):
        """Every physical key must carry a known unit suffix."""
        for section, fields in self.schema.items():
            for key, field in fields.items():
                if field.kind in (float, list) and not field.unitless and unit_scale(key) is None:
                    raise ConfigError(f"schema key {section}.{key} has no unit suffix")

    def read_file(self, path) -> dict:
        """Parse a scenario file by extension."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        suffix = path.suffix.lower()
        try:
            if suffix == ".toml":
                with open(path, "rb") as f:
                    data = tomllib.load(f)
            elif suffix in (".yaml", ".yml"):
                with open(path, "r", encoding="utf-8") as f:
                    data = yaml.safe_load(f) or {}
            elif suffix == ".json":
                with open(path, "r", encoding="utf-8") as f:
                    data = json.load(f)
            else:
                raise ConfigError(f"unsupported config format '{suffix}' ({path})")
        except (tomllib.TOMLDecodeError, yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a table of sections")
        return data

    def merge(self, base: dict, override: dict, origin: str = "config") -> dict:
        """Overlay override onto base; unknown sections or keys are errors."""
        for section, values in override.items():
            if section not in self.schema:
                raise ConfigError(f"{origin}: unknown section [{section}]")
            if not isinstance(values, dict):
                raise ConfigError(f"{origin}: section [{section}] must be a table")
            for key, value in values.items():
                if key not in self.schema[section]:
                    hint = ""
                    if unit_scale(key) is None and any(k.startswith(key + "_") for k in self.schema[section]):
                        hint = " (missing unit suffix?)"
                    raise ConfigError(f"{origin}: unknown key {section}.{key}{hint}")
                base[section][key] = value
        return base

    def _check_number(self, where: str, field, value):
        if field.kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where} must be an integer, got {value!r}")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        if not math.isfinite(float(value)):
            raise ConfigError(f"{where} must be finite, got {value!r}")
        if field.minimum is not None:
            if field.exclusive_min and value <= field.minimum:
                raise ConfigError(f"{where} must be > {field.minimum}, got {value!r}")
            if value < field.minimum:
                raise ConfigError(f"{where} must be >= {field.minimum}, got {value!r}")
        if field.maximum is not None and value > field.maximum:
            raise ConfigError(f"{where} must be <= {field.maximum}, got {value!r}")

    def validate(self, tree: dict) -> dict:
        for section, fields in self.schema.items():
            for key, field in fields.items():
                where = f"{section}.{key}"
                value = tree[section][key]
                if field.kind is bool:
                    if not isinstance(value, bool):
                        raise ConfigError(f"{where} must be true or false, got {value!r}")
                elif field.kind is str:
                    if not isinstance(value, str):
                        raise ConfigError(f"{where} must be a string, got {value!r}")
                    if field.choices and value not in field.choices:
                        raise ConfigError(f"{where} must be one of {list(field.choices)}, got {value!r}")
                elif field.kind is list:
                    if not isinstance(value, list) or not value:
                        raise ConfigError(f"{where} must be a non-empty list, got {value!r}")
                    for item in value:
                        self._check_number(where, field._replace(kind=field.item), item)
                else:
                    self._check_number(where, field, value)

        vib = tree["vibration"]
        if len(vib["corners_hz"]) != len(vib["levels"]) or len(vib["corners_hz"]) < 2:
            raise ConfigError("vibration.corners_hz and vibration.levels need the same length (>= 2)")
        if vib["rate_hz"] < 2.0 * max(vib["corners_hz"]):
            raise ConfigError(
                f"vibration.rate_hz {vib['rate_hz']} below twice the highest corner {max(vib['corners_hz'])} Hz"
            )
        return tree

    def load(self, path=None, overrides: Optional[dict] = None) -> ScenarioConfig:
        """
        Resolve a scenario.

        Args:
            path: scenario file, or None for the defaults alone
            overrides: {section: {key: value}} applied after the file (CLI flags)

        Returns:
            ScenarioConfig
        """
        tree = self.defaults.tree()
        if path is not None:
            tree = self.merge(tree, self.read_file(path), str(path))
        if overrides:
            tree = self.merge(tree, overrides, "command line")
        self.validate(tree)
        config = ScenarioConfig(tree, None if path is None else str(path))
        logger.info(f"Loaded {path or 'defaults'} (hash {config.hash}, seed {config.seed})")
        return config


_manager: Optional[ScenarioConfigManager] = None


def get_config_manager() -> ScenarioConfigManager:
    global _manager
    if _manager is None:
        _manager = ScenarioConfigManager()
    return _manager
