import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqo_engine.errors import CutoffError, DimensionMismatchError, GridCoverageError, OQOError
from oqo_engine.fock_core import FockOperator, build_operators, expectation, expectation_real
from oqo_engine.measurement_core import (
    FilterFamily,
    PhaseFilterFamily,
    PropensityGrid,
    classical_moments,
    generating_Z,
    generating_ZF,
    oqo_moment,
    oqo_weighted,
    phase_filter,
    phase_grid,
    propensity,
    radial_moment_matrix,
)


class NumberFilter(FilterFamily):
    """Projective photon counting: F(a) = |a><a| on the integer points a = 0..dim-1."""

    def __init__(self, dim: int):
        super().__init__(dim, np.arange(dim, dtype=float), np.ones(dim), axes=("n",))

    def op_at(self, index: int) -> FockOperator:
        entries = np.zeros((self.dim, self.dim))
        entries[index, index] = 1.0
        return FockOperator(entries)


def uniform_phase_grid(n_phi=64, phi0=-math.pi):
    phis, weights = phase_grid(n_phi, phi0)
    return PropensityGrid(points=phis, weights=weights, values=np.full(n_phi, 1.0 / (2.0 * math.pi)),
                          axes=("phi",), periodic=True, phi0=phi0)


class TestPropensityGrid:
    def test_uniform_is_normalized(self):
        assert uniform_phase_grid().total() == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("phi0", [-math.pi, 0.0, 1.3])
    def test_uniform_windowed_mean_is_window_centre(self, phi0):
        assert uniform_phase_grid(phi0=phi0).windowed_mean() == pytest.approx(phi0 + math.pi, abs=1e-13)

    def test_uniform_circular_moments_vanish(self):
        grid = uniform_phase_grid()
        assert abs(grid.circular_moment(1)) < 1e-14
        assert grid.circular_moment(0) == pytest.approx(1.0)

    def test_negative_values_rejected(self):
        values = np.array([0.6, 0.6, -0.2])
        with pytest.raises(GridCoverageError):
            PropensityGrid(points=[0.0, 1.0, 2.0], weights=np.ones(3), values=values)

    def test_unnormalized_rejected(self):
        with pytest.raises(GridCoverageError):
            PropensityGrid(points=[0.0, 1.0], weights=np.ones(2), values=np.array([0.5, 0.4]))

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            PropensityGrid(points=[0.0, 1.0], weights=np.ones(3), values=np.full(3, 1.0 / 3.0))

    def test_circular_moment_needs_periodic_grid(self):
        grid = PropensityGrid(points=[0.0, 1.0], weights=np.ones(2), values=np.full(2, 0.5))
        with pytest.raises(OQOError):
            grid.circular_moment(1)
        with pytest.raises(OQOError):
            grid.windowed_mean()

    def test_moments_and_frame(self):
        grid = PropensityGrid(points=[-1.0, 1.0], weights=np.ones(2), values=np.full(2, 0.5))
        assert classical_moments(grid, 3) == pytest.approx([1.0, 0.0, 1.0, 0.0])
        assert grid.variance() == pytest.approx(1.0)
        frame = grid.to_frame()
        assert list(frame.columns) == ["a1", "weight", "pr"]
        assert len(frame) == 2


class TestGenericFramework:
    def test_number_filter_normalization(self):
        assert NumberFilter(10).k == pytest.approx(1.0)

    def test_propensity_is_photon_statistics(self, state_factory):
        rho = state_factory("thermal:1", 60)
        pr = propensity(rho, NumberFilter(60))
        assert_allclose(pr.values, np.diag(rho.entries).real, atol=1e-15)

    def test_moment_operator_is_number_power(self):
        num = build_operators(12).num
        assert oqo_moment(NumberFilter(12), 2).max_abs_diff(num @ num) < 1e-12

    def test_oqo_defining_property(self, random_state):
        family = NumberFilter(40)
        pr = propensity(random_state, family)
        op = oqo_weighted(family, lambda pts: np.cos(pts[:, 0]))
        assert expectation_real(random_state, op) == pytest.approx(pr.integrate(lambda pts: np.cos(pts[:, 0])).real)

    def test_negative_order_rejected(self):
        with pytest.raises(OQOError):
            oqo_moment(NumberFilter(5), -1)

    def test_dimension_mismatch(self, state_factory):
        with pytest.raises(DimensionMismatchError):
            propensity(state_factory("fock:1", 10), NumberFilter(12))

    def test_unfaithful_state_rejected(self, state_factory):
        with pytest.raises(CutoffError):
            propensity(state_factory("fock:19", 20), phase_filter(20, 64))


class TestPhaseFilter:
    def test_normalization_constant(self):
        assert phase_filter(30, 64).k == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-14)

    def test_radial_moments(self):
        g = radial_moment_matrix(6)
        assert g[0, 0] == pytest.approx(1.0)
        assert g[0, 1] == pytest.approx(math.sqrt(math.pi) / 2.0)
        assert_allclose(np.diag(g), np.ones(6), rtol=1e-13)
        assert_allclose(g, g.T)

    def test_completeness(self):
        family = phase_filter(20, 64)
        assert oqo_moment(family, 0).max_abs_diff(FockOperator.identity(20)) < 1e-13

    def test_batched_expectations_match_loop(self, random_state):
        family = PhaseFilterFamily(40, 48)
        assert_allclose(family.expectations(random_state),
                        FilterFamily.expectations(family, random_state), atol=1e-13)

    def test_batched_operator_matches_loop(self):
        family = PhaseFilterFamily(12, 32, phi0=0.4)
        coeffs = np.sin(family.points[:, 0]) * family.weights
        fast = family.weighted_operator(coeffs, levels=8)
        slow = FilterFamily.weighted_operator(family, coeffs, levels=8)
        assert fast.max_abs_diff(slow) < 1e-12

    def test_batched_diagonals_match_loop(self):
        family = PhaseFilterFamily(10, 16)
        assert_allclose(family.diagonals(6), FilterFamily.diagonals(family, 6), atol=1e-14)

    def test_filter_is_positive(self):
        family = PhaseFilterFamily(15, 16)
        for g in range(0, 16, 5):
            assert np.min(np.linalg.eigvalsh(family.op_at(g).entries)) > -1e-10

    def test_linear_in_state(self, state_factory):
        family = phase_filter(30, 64)
        a, b = state_factory("fock:2", 30), state_factory("coherent:1,0", 30)
        mixed = propensity(a.mix(b, 0.3), family).values
        expected = 0.3 * propensity(a, family).values + 0.7 * propensity(b, family).values
        assert_allclose(mixed, expected, atol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(OQOError):
            phase_grid(3, 0.0)


class TestGeneratingFunctions:
    def test_Z_at_zero_is_one(self, random_state):
        assert generating_Z(random_state, build_operators(40).Q, 0.0) == pytest.approx(1.0)

    def test_Z_vacuum_characteristic_function(self, state_factory):
        rho = state_factory("fock:0", 60)
        assert generating_Z(rho, build_operators(60).Q, 1j) == pytest.approx(math.exp(-0.25), abs=1e-12)

    def test_Z_derivative_gives_mean(self, state_factory):
        rho = state_factory("coherent:0.7,0.2", 50)
        Q = build_operators(50).Q
        h = 1e-5
        slope = (generating_Z(rho, Q, h) - generating_Z(rho, Q, -h)) / (2.0 * h)
        assert slope.real == pytest.approx(expectation(rho, Q).real, abs=1e-8)

    def test_Z_overflow_guarded(self, random_state):
        with pytest.raises(OQOError):
            generating_Z(random_state, build_operators(40).Q, 1000.0)

    def test_ZF_periodic_is_circular_moment(self, state_factory):
        pr = propensity(state_factory("coherent:1,0.5", 30), phase_filter(30, 64))
        assert generating_ZF(pr, 1j) == pytest.approx(pr.circular_moment(1), abs=1e-14)

    def test_ZF_needs_matching_lambda(self):
        with pytest.raises(DimensionMismatchError):
            generating_ZF(uniform_phase_grid(), [1j, 1j])

    def test_ZF_edge_check(self):
        points = np.linspace(-1.0, 1.0, 5)
        grid = PropensityGrid(points=points, weights=np.full(5, 0.2), values=np.ones(5))
        with pytest.raises(GridCoverageError):
            generating_ZF(grid, 0.5)
