import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqo_engine.errors import OQOError
from oqo_engine.fock_core import expectation, expectation_real
from oqo_engine.phase_nfm import (
    coherent_phasor_expectation,
    cosine_operator,
    cosine_squared_operator,
    non_unitarity,
    periodic_oqo,
    periodic_oqo_from_samples,
    phase_expectation,
    phase_operator,
    phase_propensity,
    phase_propensity_quadrature,
    phase_spectrum_report,
    phasor,
    phasor_hypergeometric,
    phasor_set,
    sawtooth_weights,
    sine_operator,
    susskind_glogower,
)
from oqo_engine.schemas import PhaseOpConfig


class TestPhasePropensity:
    @pytest.mark.parametrize("text", ["fock:0", "fock:3", "thermal:1"])
    def test_diagonal_states_are_uniform(self, state_factory, text):
        pr = phase_propensity(state_factory(text, 40), 64)
        assert_allclose(pr.values, np.full(64, 1.0 / (2.0 * math.pi)), atol=1e-13)

    def test_coherent_peaks_at_its_phase(self, state_factory):
        pr = phase_propensity(state_factory("coherent:0,2", 40), 128)
        assert pr.points[np.argmax(pr.values), 0] == pytest.approx(math.pi / 2.0)

    def test_real_coherent_mean_phase_is_zero(self, state_factory):
        assert phase_propensity(state_factory("coherent:1.5,0", 40), 64).windowed_mean() == pytest.approx(0.0, abs=1e-12)

    def test_circular_moments_are_phasor_expectations(self, random_state):
        pr = phase_propensity(random_state, 64)
        for n in (1, 2, -3):
            assert pr.circular_moment(n) == pytest.approx(expectation(random_state, phasor(n, 40)), abs=1e-12)

    def test_matches_laguerre_quadrature(self, state_factory):
        rho = state_factory("coherent:1,0.5", 30)
        closed = phase_propensity(rho, 32)
        numeric = phase_propensity_quadrature(rho, 32)
        assert np.max(np.abs(closed.values - numeric.values)) < 1e-7

    def test_rotation_shifts_density(self, state_factory):
        rho = state_factory("random_mixed:2", 30)
        step = 2.0 * math.pi / 64
        shifted = phase_propensity(rho.rotated(3 * step), 64, -math.pi + 3 * step)
        assert_allclose(shifted.values, phase_propensity(rho, 64).values, atol=1e-12)


class TestPhasors:
    def test_lowest_entry(self):
        assert phasor(1, 10).entries[0, 1].real == pytest.approx(math.sqrt(math.pi) / 2.0, rel=1e-14)

    def test_negative_order_is_adjoint(self):
        assert phasor(-2, 12).max_abs_diff(phasor(2, 12).adjoint()) == 0.0

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
    def test_hypergeometric_form_agrees(self, n):
        exact = phasor(n, 30)
        series = phasor_hypergeometric(n, 30)
        assert series.max_abs_diff(exact) <= 1e-9 * exact.max_abs()

    def test_hypergeometric_limits(self):
        with pytest.raises(OQOError):
            phasor_hypergeometric(9, 30)
        with pytest.raises(OQOError):
            phasor_hypergeometric(2, 121)

    def test_order_must_fit_cutoff(self):
        with pytest.raises(OQOError):
            phasor(10, 10)

    def test_phasor_set(self):
        phasors = phasor_set(3, 10)
        assert sorted(phasors.ops) == [-3, -2, -1, 0, 1, 2, 3]
        assert phasors[-1].max_abs_diff(phasor(1, 10).adjoint()) == 0.0
        with pytest.raises(OQOError):
            phasor_set(10, 10)

    @pytest.mark.parametrize("n", [1, 2, -1])
    def test_coherent_expectation_closed_form(self, state_factory, n):
        rho = state_factory("coherent:1.2,-0.5", 60)
        alpha = complex(1.2, -0.5)
        assert coherent_phasor_expectation(alpha, n) == pytest.approx(expectation(rho, phasor(n, 60)), abs=1e-10)

    def test_non_unitarity(self):
        assert non_unitarity(phasor(1, 40)) == pytest.approx(1.0 - math.pi / 4.0, rel=1e-12)
        assert non_unitarity(susskind_glogower(40)) == pytest.approx(0.0, abs=1e-15)


class TestPeriodicOQOs:
    def test_cosine_squared_does_not_factorize(self, state_factory):
        vacuum = state_factory("fock:0", 20)
        c1 = cosine_operator(20)
        difference = expectation_real(vacuum, cosine_squared_operator(20)) - expectation_real(vacuum, c1 @ c1)
        assert difference == pytest.approx(0.5 - math.pi / 16.0, abs=1e-13)

    def test_sine_and_cosine_are_hermitian(self):
        assert sine_operator(15).is_hermitian()
        assert cosine_operator(15).is_hermitian()

    def test_non_conjugate_coefficients_rejected(self):
        with pytest.raises(OQOError):
            periodic_oqo({1: 0.5, -1: 0.3}, 1, 10)

    def test_sampled_trig_polynomial_matches_propensity(self, random_state):
        def g(phi):
            return 0.3 + np.cos(phi) - 0.5 * np.sin(2.0 * phi) + 0.2 * np.cos(3.0 * phi) ** 2

        phis = -math.pi + 2.0 * math.pi * np.arange(32) / 32
        op = periodic_oqo_from_samples(g(phis), 6, 40)
        assert op.is_hermitian()
        direct = phase_propensity(random_state, 512).integrate(lambda pts: g(pts[:, 0]))
        assert expectation_real(random_state, op) == pytest.approx(direct.real, abs=1e-10)
        assert direct.imag == pytest.approx(0.0, abs=1e-12)

    def test_sampled_cosine_squared_matches_coefficients(self):
        phis = 0.7 + 2.0 * math.pi * np.arange(16) / 16
        op = periodic_oqo_from_samples(np.cos(phis) ** 2, 2, 20, phi_start=0.7)
        assert op.max_abs_diff(cosine_squared_operator(20)) < 1e-14

    def test_complex_samples_skip_hermiticity(self):
        phis = -math.pi + 2.0 * math.pi * np.arange(8) / 8
        op = periodic_oqo_from_samples(np.exp(1j * phis), 1, 10)
        assert op.max_abs_diff(phasor(1, 10)) < 1e-14

    def test_orders_beyond_cutoff_skipped(self):
        op = periodic_oqo({0: 1.0, 5: 0.5, -5: 0.5}, 5, 4)
        assert op.max_abs_diff(periodic_oqo({0: 1.0}, 0, 4)) == 0.0


class TestPhaseOperator:
    def test_two_level_spectrum(self):
        report = phase_spectrum_report(PhaseOpConfig(phi0=-math.pi, n_max=1), 2).report
        half = math.sqrt(math.pi) / 2.0
        assert_allclose(report.eigenvalues, [-half, half], atol=1e-14)

    def test_hermitian(self):
        op = phase_operator(PhaseOpConfig(phi0=0.3, n_max=50), 40)
        assert op.hermiticity_residual() < 1e-12

    @pytest.mark.parametrize("phi0", [-math.pi, 0.0, 0.7])
    def test_vacuum_expectation_is_window_centre(self, state_factory, phi0):
        rho = state_factory("fock:0", 30)
        assert phase_expectation(rho, PhaseOpConfig(phi0=phi0, n_max=40)) == pytest.approx(phi0 + math.pi, abs=1e-12)

    @pytest.mark.parametrize("text, dim, angle, spread", [
        ("coherent:1.4,1.4", 40, math.pi / 4.0, 0.05),
        ("coherent:1,1.7320508075688772", 30, math.pi / 3.0, 0.1),
    ])
    def test_matches_windowed_mean(self, state_factory, text, dim, angle, spread):
        rho = state_factory(text, dim)
        cfg = PhaseOpConfig(phi0=-math.pi, n_max=400)
        window = phase_propensity(rho, 512, cfg.phi0).windowed_mean()
        assert phase_expectation(rho, cfg) == pytest.approx(window, abs=1e-4)
        assert window == pytest.approx(angle, abs=spread)
        assert abs(phase_expectation(rho, cfg) + window) > 1.0

    def test_smoothed_spectrum_stays_in_window(self):
        cfg = PhaseOpConfig(phi0=-1.0, n_max=30, smoothing="cesaro")
        report = phase_spectrum_report(cfg, 40).report
        assert report.excess == 0.0
        assert min(report.eigenvalues) > cfg.phi0
        assert max(report.eigenvalues) < cfg.phi0 + 2.0 * math.pi
        assert sum(report.histogram) == 40
        assert len(report.bin_edges) == 17
        assert report.max_residual < 1e-9

    def test_sawtooth_weights(self):
        assert_allclose(sawtooth_weights(3), np.ones(3))
        assert_allclose(sawtooth_weights(3, "cesaro"), [0.75, 0.5, 0.25])
        with pytest.raises(OQOError):
            sawtooth_weights(3, "lanczos")
