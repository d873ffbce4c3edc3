# [file name]: tests/test_physics_core.py
import numpy as np
import pytest

from atomsense.physics_core import (
    G_LOCAL,
    MU_B,
    RB87_MASS,
    BallisticState,
    LaunchPulse,
    Species,
    gravity_vector,
    launch_velocity,
    propagate,
)


class Test_Species:
    def test_k_eff(self, rb87):
        assert rb87.k_eff == pytest.approx(1.6108e7, rel=2e-4)

    def test_recoil_frequency(self, rb87):
        assert rb87.recoil_frequency == pytest.approx(9.4776e4, rel=1e-3)

    def test_velocity_dispersion_one_microkelvin(self, rb87):
        assert rb87.velocity_dispersion(1e-6) == pytest.approx(9.78e-3, rel=1e-3)

    @pytest.mark.parametrize("temperature", [1e-7, 1e-6, 5e-6])
    def test_temperature_round_trip(self, rb87, temperature):
        sigma_v = rb87.velocity_dispersion(temperature)
        assert rb87.temperature_from_dispersion(sigma_v) == pytest.approx(temperature, rel=1e-12)

    def test_invalid_mass(self):
        with pytest.raises(ValueError):
            Species(-1.0, 780e-9, 0.5, 6.8e9)


class Test_launch_velocity:
    def test_reference_pulse(self, rb87):
        pulse = LaunchPulse(gradient=0.1276, duration=10e-3, m_F=2)
        expected = MU_B * 2 * 0.5 * 0.1276 * 10e-3 / RB87_MASS
        assert launch_velocity(rb87, pulse) == pytest.approx(expected, rel=1e-12)
        assert launch_velocity(rb87, pulse) == pytest.approx(0.082, rel=1e-3)

    def test_sign_flips_direction(self, rb87):
        forward = launch_velocity(rb87, LaunchPulse(0.1276, 10e-3, 2, sign=1))
        backward = launch_velocity(rb87, LaunchPulse(0.1276, 10e-3, 2, sign=-1))
        assert backward == -forward

    def test_field_insensitive_level_is_not_launched(self, rb87):
        assert launch_velocity(rb87, LaunchPulse(0.1276, 10e-3, 0)) == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gradient": 0.1, "duration": 0.0, "m_F": 2},
            {"gradient": 0.1, "duration": 1e-3, "m_F": 3},
            {"gradient": 0.1, "duration": 1e-3, "m_F": 2, "sign": 0},
        ],
    )
    def test_invalid_pulse(self, kwargs):
        with pytest.raises(ValueError):
            LaunchPulse(**kwargs)


class Test_propagate:
    def test_free_fall(self):
        state = BallisticState(np.array([0.0, 0.0, 0.0]), np.array([0.0, 0.082, 0.1]))
        g = gravity_vector(G_LOCAL)
        out = propagate(state, 0.08, g)
        np.testing.assert_allclose(out.position, [0.0, 0.082 * 0.08, 0.1 * 0.08 - 0.5 * G_LOCAL * 0.08 ** 2])
        np.testing.assert_allclose(out.velocity, [0.0, 0.082, 0.1 - G_LOCAL * 0.08])
        assert out.time == pytest.approx(0.08)

    def test_ensemble_arrays(self, rng):
        positions = rng.normal(size=(50, 3))
        velocities = rng.normal(size=(50, 3))
        out = propagate(BallisticState(positions, velocities), 0.01, gravity_vector(G_LOCAL))
        assert out.position.shape == (50, 3)
        np.testing.assert_allclose(out.velocity[:, 2], velocities[:, 2] - G_LOCAL * 0.01)

    def test_composes(self):
        state = BallisticState(np.array([0.1, 0.2, 0.3]), np.array([0.0, 0.082, 0.5]))
        g = gravity_vector(G_LOCAL)
        twice = propagate(propagate(state, 0.03, g), 0.05, g)
        once = propagate(state, 0.08, g)
        np.testing.assert_allclose(twice.position, once.position, rtol=1e-12)

    def test_negative_step(self):
        state = BallisticState(np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            propagate(state, -1.0, gravity_vector(G_LOCAL))

    def test_non_finite_state(self):
        with pytest.raises(ValueError):
            BallisticState(np.array([np.nan, 0.0, 0.0]), np.zeros(3))


def test_gravity_vector_tilt():
    np.testing.assert_allclose(gravity_vector(G_LOCAL), [0.0, 0.0, -G_LOCAL])
    tilted = gravity_vector(G_LOCAL, 1e-3)
    assert np.linalg.norm(tilted) == pytest.approx(G_LOCAL)
    assert -tilted[2] == pytest.approx(G_LOCAL * np.cos(1e-3))
