# [file name]: tests/test_config.py
import json
from pathlib import Path

import numpy as np
import pytest

from atomsense.errors import ConfigError
from config.defaults import DEFAULT_SCENARIO, SCHEMA, unit_scale
from utils.config_manager import config_hash, get_config_manager

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def manager():
    return get_config_manager()


class Test_unit_scale:
    @pytest.mark.parametrize(
        "key, scale",
        [
            ("T_ms", 1e-3),
            ("cycle_period_s", 1.0),
            ("tilt_mrad", 1e-3),
            ("omega_rad_s", 1.0),
            ("omega_d_mrad_s", 1e-3),
            ("pulse_us", 1e-6),
            ("beta_plus_deg", np.pi / 180.0),
            ("gradient_g_per_cm", 1e-2),
            ("common_mode_mps2_sqrt_hz", 1.0),
        ],
    )
    def test_longest_suffix_wins(self, key, scale):
        assert unit_scale(key) == pytest.approx(scale)

    def test_no_suffix(self):
        assert unit_scale("contrast") is None

    def test_defaults_cover_schema(self):
        assert set(DEFAULT_SCENARIO) == set(SCHEMA)
        for section, fields in SCHEMA.items():
            assert set(DEFAULT_SCENARIO[section]) == set(fields)


class Test_load:
    def test_defaults(self, manager):
        config = manager.load()
        assert config.seed == 0
        assert len(config.hash) == 16
        cycle = config.cycle_config()
        assert cycle.T == pytest.approx(0.04)
        assert cycle.v_l == pytest.approx(0.082)
        scene = config.static_scene()
        assert scene.omega == pytest.approx(4.82e-5)
        assert scene.vibration.corners == (2.0, 20.0)

    @pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.iterdir()))
    def test_shipped_scenarios_load(self, manager, name):
        config = manager.load(SCENARIOS / name)
        assert config.source == str(SCENARIOS / name)

    def test_yaml_budget_scenario(self, manager):
        inputs = manager.load(SCENARIOS / "budget.yaml").budget_inputs()
        assert inputs.tilt == pytest.approx(1e-3)
        assert inputs.optical_quality == pytest.approx(130.04e-9)
        assert inputs.mirror_height == pytest.approx(0.3)

    def test_toml_and_json_agree(self, manager, tmp_path):
        toml_path = tmp_path / "s.toml"
        toml_path.write_text("[interferometer]\nT_ms = 30.0\n\n[dynamic]\nbeta_plus_deg = 5.0\n")
        json_path = tmp_path / "s.json"
        json_path.write_text(json.dumps({"interferometer": {"T_ms": 30.0}, "dynamic": {"beta_plus_deg": 5.0}}))
        from_toml, from_json = manager.load(toml_path), manager.load(json_path)
        assert from_toml.hash == from_json.hash
        assert from_toml.cycle_config().T == pytest.approx(0.03)
        assert from_toml.dynamic_drive(1e-3).beta_plus == pytest.approx(np.radians(5.0))

    def test_overrides_apply_after_file(self, manager, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[run]\nmaster_seed = 4\n")
        config = manager.load(path, {"run": {"master_seed": 9}})
        assert config.seed == 9

    def test_launch_from_gradient(self, manager):
        config = manager.load(overrides={"launch": {"gradient_g_per_cm": 12.76, "pulse_ms": 10.0, "m_f": 2}})
        assert config.launch_speed() == pytest.approx(0.082, rel=1e-3)

    def test_drift_disabled(self, manager):
        config = manager.load(overrides={"velocimetry": {"drift_enabled": False}})
        assert config.drift_model().gm_sigma == 0.0
        assert manager.load().drift_model().gm_sigma > 0.0


class Test_config_hash:
    def test_ignores_run_local_keys(self, manager, tmp_path):
        base = manager.load().hash
        local = manager.load(overrides={"run": {"threads": 7, "out_dir": str(tmp_path), "master_seed": 3}})
        assert local.hash == base

    def test_tracks_physics(self, manager):
        assert manager.load(overrides={"interferometer": {"T_ms": 30.0}}).hash != manager.load().hash

    def test_key_order_irrelevant(self):
        tree = {"b": {"y": 1, "x": 2}, "a": {"z": [1.0, 2.0]}}
        reordered = {"a": {"z": [1.0, 2.0]}, "b": {"x": 2, "y": 1}}
        assert config_hash(tree) == config_hash(reordered)


class Test_validation:
    def test_unknown_key_hints_unit(self, manager, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[interferometer]\nT = 40\n")
        with pytest.raises(ConfigError, match=r"interferometer\.T .*missing unit suffix"):
            manager.load(path)

    def test_unknown_section(self, manager):
        with pytest.raises(ConfigError, match="unknown section"):
            manager.load(overrides={"laser": {"power_mw": 1.0}})

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"interferometer": {"contrast": 1.5}}, "contrast must be <="),
            ({"interferometer": {"T_ms": 0.0}}, "T_ms must be >"),
            ({"atomic_noise": {"atom_number": 1.5}}, "must be an integer"),
            ({"truth": {"g_mps2": True}}, "must be a number"),
            ({"truth": {"g_mps2": float("nan")}}, "must be finite"),
            ({"vibration": {"correction": 1}}, "true or false"),
            ({"species": {"name": "cs133"}}, "must be one of"),
            ({"vibration": {"levels": [1.0]}}, "same length"),
            ({"vibration": {"rate_hz": 30.0}}, "twice the highest corner"),
            ({"dynamic": {"omega_d_mrad_s": []}}, "non-empty list"),
        ],
    )
    def test_rejected_values(self, manager, overrides, message):
        with pytest.raises(ConfigError, match=message):
            manager.load(overrides=overrides)

    def test_builder_reports_value_errors(self, manager):
        config = manager.load(overrides={"sequencer": {"cycle_period_s": 0.05}})
        with pytest.raises(ConfigError, match="cycle_config"):
            config.cycle_config()

    @pytest.mark.parametrize(
        "pattern",
        [
            {"k_pattern": [1, -1, 1, -1, 1, -1, 1, -1]},
            {"v_pattern": [1, 1, 1, 1, 1, 1, -1, -1]},
            {"k_pattern": [1, 1, 0, 0, 1, 1, -1, -1]},
            {"shots_per_point": 4},
        ],
    )
    def test_schedule_rejected(self, manager, pattern):
        config = manager.load(overrides={"sequencer": pattern})
        with pytest.raises(ConfigError, match="cycle_config"):
            config.cycle_config()

    def test_pattern_entries_are_signs(self, manager):
        with pytest.raises(ConfigError, match="must be <= 1"):
            manager.load(overrides={"sequencer": {"k_pattern": [1, 1, -1, -1, 2, 2, -1, -1]}})
        with pytest.raises(ConfigError, match="must be an integer"):
            manager.load(overrides={"sequencer": {"v_pattern": [1.0, 1, 1, 1, -1, -1, -1, -1]}})

    def test_schedule_reaches_cycle_config(self, manager):
        k = [1, 1, 1, 1, -1, -1, -1, -1]
        v = [1, 1, -1, -1, 1, 1, -1, -1]
        cfg = manager.load(overrides={"sequencer": {"k_pattern": k, "v_pattern": v, "shots_per_point": 24}}
                           ).cycle_config()
        assert cfg.k_pattern == tuple(k) and cfg.v_pattern == tuple(v)
        assert cfg.shots_per_point == 24
        assert cfg.block_configs == ((1, 1), (1, -1), (-1, 1), (-1, -1))

    def test_unsupported_extension(self, manager, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[run]\n")
        with pytest.raises(ConfigError, match="unsupported config format"):
            manager.load(path)

    def test_missing_file(self, manager, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            manager.load(tmp_path / "absent.toml")

    def test_parse_error(self, manager, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[run\nmaster_seed = 1\n")
        with pytest.raises(ConfigError, match="cannot parse"):
            manager.load(path)

    def test_defaults_not_mutated(self, manager):
        manager.load(overrides={"truth": {"omega_rad_s": 1e-3}})
        assert DEFAULT_SCENARIO["truth"]["omega_rad_s"] == 4.82e-5
