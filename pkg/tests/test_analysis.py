# [file name]: tests/test_analysis.py
import numpy as np
import pytest

from atomsense.analysis import (
    AdevCurve,
    BudgetInputs,
    NoiseFloors,
    WavefrontSpec,
    allan_deviation,
    alpha_star_from_fit,
    budget_entry,
    correlation_coefficient,
    default_taus,
    euler_coriolis_ratio,
    fit_contrast_decay,
    fit_fringe,
    fit_noise_floors,
    systematic_budget,
    wavefront_phase_polynomial,
    wavefront_rotation_bias,
)
from atomsense.errors import FitFailed, SeriesTooShort

T = 0.04
V_L = 0.082
WAIST = 10.1e-3


class Test_allan_deviation:
    def test_white_noise(self, rng):
        series = rng.normal(0.0, 2e-6, 2 ** 16)
        curve = allan_deviation(series, 0.5, [0.5, 2.0, 32.0])
        np.testing.assert_allclose(curve.taus, [0.5, 2.0, 32.0])
        for tau in curve.taus:
            assert curve.at(tau) == pytest.approx(2e-6 / np.sqrt(tau / 0.5), rel=0.1)
        assert np.all(curve.ci_low < curve.sigmas)
        assert np.all(curve.ci_high > curve.sigmas)
        assert curve.conf_intervals.shape == (3, 2)

    def test_taus_rounded_to_sample_multiples(self, rng):
        curve = allan_deviation(rng.normal(size=1000), 1.0, [1.2, 2.9, 3.1])
        np.testing.assert_allclose(curve.taus, [1.0, 3.0])

    def test_default_taus_are_octaves(self):
        np.testing.assert_allclose(default_taus(100, 4.0), [4.0, 8.0, 16.0, 32.0, 64.0, 128.0])

    def test_constant_series(self):
        curve = allan_deviation(np.full(300, 9.8), 1.0)
        assert not np.any(curve.sigmas)

    def test_series_too_short(self, rng):
        with pytest.raises(SeriesTooShort):
            allan_deviation(rng.normal(size=20), 1.0, [10.0])
        with pytest.raises(SeriesTooShort):
            allan_deviation([1.0, 2.0], 1.0)

    def test_offset_free(self, rng):
        series = rng.normal(size=3000)
        first = allan_deviation(series, 1.0, [4.0])
        shifted = allan_deviation(series + 1e3, 1.0, [4.0])
        assert shifted.sigmas[0] == pytest.approx(first.sigmas[0], rel=1e-6)


class Test_fit_noise_floors:
    def test_recovers_exact_model(self):
        truth = NoiseFloors(white=1.1e-5, flicker=4e-7, random_walk=2e-9)
        taus = 4.0 * 2.0 ** np.arange(14)
        sigmas = truth.sigma(taus)
        floors = fit_noise_floors(AdevCurve(taus, sigmas, sigmas, sigmas, np.ones_like(taus)))
        assert floors.white == pytest.approx(1.1e-5, rel=1e-6)
        assert floors.flicker == pytest.approx(4e-7, rel=1e-5)
        assert floors.random_walk == pytest.approx(2e-9, rel=1e-4)

    def test_max_tau_cut(self):
        taus = 2.0 ** np.arange(10)
        sigmas = 3e-6 / np.sqrt(taus)
        sigmas[-3:] = 1.0
        floors = fit_noise_floors(AdevCurve(taus, sigmas, sigmas, sigmas, np.ones_like(taus)), max_tau=64.0)
        assert floors.white == pytest.approx(3e-6, rel=1e-6)
        assert floors.random_walk == pytest.approx(0.0, abs=1e-12)

    def test_empty_curve(self):
        taus = np.array([1.0, 2.0])
        zeros = np.zeros(2)
        assert fit_noise_floors(AdevCurve(taus, zeros, zeros, zeros, np.ones(2))) == NoiseFloors(0.0, 0.0, 0.0)


def fringe(alphas, mean=0.5, contrast=0.5, phase=0.7):
    return mean - 0.5 * contrast * np.cos(np.asarray(alphas) * T ** 2 + phase)


class Test_fit_fringe:
    center = 1.58e8

    def scan(self, fringes=2.0, n=40):
        span = fringes * 2 * np.pi / T ** 2
        return np.linspace(self.center - span / 2, self.center + span / 2, n)

    def test_exact_recovery(self):
        alphas = self.scan()
        fit = fit_fringe(alphas, fringe(alphas), T)
        assert fit.mean == pytest.approx(0.5, rel=1e-9)
        assert fit.contrast == pytest.approx(0.5, rel=1e-9)
        assert fit.phase_offset == pytest.approx(0.7, abs=1e-7)
        np.testing.assert_allclose(fit.model(alphas, T), fringe(alphas), atol=1e-9)

    def test_phase_branch_follows_guess(self):
        alphas = self.scan()
        fit = fit_fringe(alphas, fringe(alphas), T, phase_guess=0.7 + 6 * np.pi)
        assert fit.phase_offset == pytest.approx(0.7 + 6 * np.pi, abs=1e-7)

    def test_noisy_fit_reports_covariance(self, rng):
        alphas = self.scan(n=200)
        fit = fit_fringe(alphas, fringe(alphas) + rng.normal(0.0, 0.01, alphas.size), T)
        phase_err = np.sqrt(fit.covariance[2, 2])
        assert 0.0 < phase_err < 0.01
        assert abs(fit.phase_offset - 0.7) < 5 * phase_err
        assert fit.residuals.shape == alphas.shape

    def test_alpha_star_is_dark_fringe(self):
        alphas = self.scan()
        fit = fit_fringe(alphas, fringe(alphas), T)
        alpha_star = alpha_star_from_fit(fit, T, self.center)
        assert abs(alpha_star - self.center) <= np.pi / T ** 2
        assert fit.model([alpha_star], T)[0] == pytest.approx(0.5 - 0.25, abs=1e-9)

    def test_low_contrast(self):
        alphas = self.scan()
        with pytest.raises(FitFailed):
            fit_fringe(alphas, fringe(alphas, contrast=0.01), T, contrast_threshold=0.02)

    def test_short_scan(self):
        alphas = self.scan(fringes=1.0)
        with pytest.raises(FitFailed):
            fit_fringe(alphas, fringe(alphas), T)

    def test_too_few_points(self):
        with pytest.raises(FitFailed):
            fit_fringe([1.0, 2.0, 3.0], [0.1, 0.2, 0.3], T)


class Test_fit_contrast_decay:
    def test_recovers_temperature(self, rb87):
        omegas = np.linspace(0.0, 4e-3, 9)
        sigma_v = rb87.velocity_dispersion(1e-6)
        contrasts = 0.5 * np.exp(-2.0 * (rb87.k_eff * sigma_v * T ** 2 * omegas) ** 2)
        fit = fit_contrast_decay(omegas, contrasts, rb87.k_eff, T, rb87)
        assert fit.c0 == pytest.approx(0.5, rel=1e-6)
        assert fit.temperature == pytest.approx(1e-6, rel=1e-5)

    def test_needs_rotation(self, rb87):
        with pytest.raises(FitFailed):
            fit_contrast_decay([0.0, 0.0], [0.5, 0.5], rb87.k_eff, T, rb87)


def test_correlation_coefficient(rng):
    x = rng.normal(size=100)
    assert correlation_coefficient(x, 2 * x + 1) == pytest.approx(1.0)
    assert correlation_coefficient(x, -x) == pytest.approx(-1.0)


class Test_wavefront:
    def test_optical_quality_bias(self, rb87):
        spec = WavefrontSpec.from_optical_quality(rb87.lambda_raman / 6, WAIST, rb87.lambda_raman)
        bias = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T)
        assert bias == pytest.approx(1.863e-5, rel=2e-3)

    def test_peak_to_valley_bias(self, rb87):
        spec = WavefrontSpec.from_peak_to_valley(1.9, WAIST, rb87.lambda_raman)
        assert wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T) == pytest.approx(1.69e-5, rel=5e-3)

    @pytest.mark.parametrize("x0", [0.0, 2e-3, -1.5e-3])
    def test_cubic_closed_form_matches_polynomial(self, rb87, x0):
        spec = WavefrontSpec.from_peak_to_valley(1.9, WAIST, rb87.lambda_raman)
        closed = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T, x0)
        exact = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T, x0, exact_polynomial=True)
        assert exact == pytest.approx(closed, rel=1e-9)

    @pytest.mark.parametrize("order", [2, 4])
    def test_even_orders_cancel(self, rb87, order):
        spec = WavefrontSpec.from_peak_to_valley(1.0, WAIST, rb87.lambda_raman, order=order)
        assert wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T) == 0.0
        plus, minus = wavefront_phase_polynomial(spec, V_L, 0.6e-3, T)
        assert plus == pytest.approx(minus, rel=1e-12)

    def test_even_order_off_axis(self, rb87):
        # quartic branches centred at x₀ no longer cancel: 12·A₄·v·x₀·δx/k
        spec = WavefrontSpec.from_peak_to_valley(1.0, WAIST, rb87.lambda_raman, order=4)
        bias = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T, x0=1e-3)
        plus, minus = wavefront_phase_polynomial(spec, V_L, 0.6e-3, T, 1e-3)
        assert bias == pytest.approx((plus - minus) / (4 * V_L * rb87.k_eff * T ** 2), rel=1e-12)
        assert bias == pytest.approx(12 * spec.amplitude * V_L * 1e-3 * 0.6e-3 / rb87.k_eff, rel=1e-6)
        assert bias == pytest.approx(3.52e-6, rel=5e-3)

    def test_even_order_exact_polynomial(self, rb87):
        spec = WavefrontSpec.from_peak_to_valley(1.0, WAIST, rb87.lambda_raman, order=4)
        exact = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T, exact_polynomial=True)
        assert exact == pytest.approx(0.0, abs=1e-15)

    def test_fifth_order_is_odd_in_dissymmetry(self, rb87):
        spec = WavefrontSpec.from_peak_to_valley(1.0, WAIST, rb87.lambda_raman, order=5)
        forward = wavefront_rotation_bias(spec, V_L, 0.6e-3, rb87.k_eff, T)
        backward = wavefront_rotation_bias(spec, V_L, -0.6e-3, rb87.k_eff, T)
        assert forward != 0.0
        assert backward == pytest.approx(-forward, rel=1e-9)

    @pytest.mark.parametrize("kwargs", [{"order": 1, "amplitude": 1.0, "waist": WAIST},
                                        {"order": 3, "amplitude": 1.0, "waist": 0.0}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValueError):
            WavefrontSpec(**kwargs)


def test_euler_coriolis_ratio():
    ratio = euler_coriolis_ratio(0.01, 0.02, 0.5, V_L, T)
    assert 0.04 < ratio < 0.06
    assert ratio == pytest.approx(4.402e-2, rel=2e-3)
    assert euler_coriolis_ratio(0.0, 0.02, 0.5, V_L, T) == 0.0
    assert euler_coriolis_ratio(0.01, 0.0, 0.5, V_L, T) == 0.0


def test_euler_coriolis_ratio_sensitivity_weighted():
    weighted = euler_coriolis_ratio(0.01, 0.02, 0.5, V_L, T, sensitivity_weighted=True)
    assert weighted == pytest.approx(1.566e-2, rel=2e-3)
    # mirror angle θ(t) seen at d₀ through the (1, −2, 1) pulse combination
    w = 2 * np.pi / 0.5
    theta = [np.sin(w * (t - T) + 0.02) / w for t in (0.0, T, 2 * T)]
    euler = 0.01 * (theta[0] - 2 * theta[1] + theta[2])
    coriolis = V_L * T * (theta[2] - theta[0])
    assert weighted == pytest.approx(abs(euler / coriolis), rel=1e-9)


class Test_systematic_budget:
    @pytest.fixture
    def inputs(self, rb87):
        return BudgetInputs(
            species=rb87, optical_quality=rb87.lambda_raman / 6, asymmetry=0.6e-3, peak_to_valley=1.9,
            dissymmetry=1.2e-3, euler_offset=0.01, euler_phi0=0.02, omega_d=3e-3, mirror_height=0.3,
            tilt=1e-3, velocity_instability=7.3e-4,
        )

    def test_terms(self, inputs):
        entries = systematic_budget(inputs)
        assert [e.term for e in entries] == [
            "wavefront_optical_quality", "wavefront_peak_to_valley", "euler_fraction", "euler_rotation",
            "centrifugal_acceleration", "centrifugal_rotation", "tilt_gravity", "velocity_scale_factor",
        ]

    def test_values(self, inputs):
        entries = systematic_budget(inputs)
        assert budget_entry(entries, "wavefront_optical_quality").value == pytest.approx(1.863e-5, rel=2e-3)
        assert budget_entry(entries, "wavefront_peak_to_valley").value == pytest.approx(1.69e-5, rel=5e-3)
        assert budget_entry(entries, "euler_fraction").value == pytest.approx(4.402e-2, rel=2e-3)
        assert budget_entry(entries, "centrifugal_acceleration").value == pytest.approx(4.82e-5 ** 2 * 0.3)
        assert budget_entry(entries, "centrifugal_rotation").value == 0.0
        assert budget_entry(entries, "tilt_gravity").value == pytest.approx(9.80883 * (1 - np.cos(1e-3)))
        assert budget_entry(entries, "velocity_scale_factor").value == pytest.approx(4.82e-5 * 7.3e-4)
        effective = 3e-3 * np.cos(0.02) * np.sinc(2 * T / 0.5)
        euler = budget_entry(entries, "euler_rotation")
        assert euler.value == pytest.approx(budget_entry(entries, "euler_fraction").value * effective)
        assert euler.axis == "rotation" and euler.units == "rad/s"

    def test_inputs_hash(self, inputs, rb87):
        first = budget_entry(systematic_budget(inputs), "tilt_gravity")
        again = budget_entry(systematic_budget(inputs), "tilt_gravity")
        other = budget_entry(systematic_budget(BudgetInputs(species=rb87, tilt=2e-3)), "tilt_gravity")
        assert len(first.inputs_hash) == 12
        assert first.inputs_hash == again.inputs_hash
        assert first.inputs_hash != other.inputs_hash

    def test_unknown_term(self, inputs):
        with pytest.raises(KeyError):
            budget_entry(systematic_budget(inputs), "gravity_gradient")
