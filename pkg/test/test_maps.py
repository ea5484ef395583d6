"""Tests for torus maps, the quarter turn and the stage conjugacy (BDD style)."""

import unittest
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from utils.errors import ParameterError
from utils.maps import (
    AffineChart,
    ComposedMap,
    HorizontalShear,
    IdentityMap,
    KappaProfile,
    Translation,
    assemble_h,
    block_conjugate,
    build_phi_m,
    build_phi_w,
    jacobian_det,
    map_from_dict,
    quarter_turn,
    shear_coefficient,
    shear_g,
    shear_norm,
    sobol_points,
    stage_epsilons,
)
from utils.numerics import Rect, TorusPoint, torus_distance

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


def _stage_h(n=1, q_n=4, r=2, sigma=0.25, smoothing=0.0):
    _, eps2, _, _ = stage_epsilons(n, q_n, r)
    profile = KappaProfile.for_minimality(n, q_n, eps2, smoothing)
    return assemble_h(n, q_n, r, sigma, profile)


class TestQuarterTurn(unittest.TestCase):
    """Test the square twist phi(eps)."""

    def test_when_point_in_inner_square_then_it_turns_rigidly_clockwise(self):
        """
        Given phi(1/10) and the point (0.3, 0.5) inside [0.2, 0.8]^2
        When the map is evaluated
        Then the image is (y, 1 - x) = (0.5, 0.7)
        """
        # Given
        phi = quarter_turn(Fraction(1, 10))

        # When
        image = phi.eval(TorusPoint(0.3, 0.5))

        # Then
        self.assertAlmostEqual(image.x, 0.5, places=12)
        self.assertAlmostEqual(image.y, 0.7, places=12)

    def test_when_point_near_edge_then_it_is_fixed(self):
        """
        Given phi(1/10) and a point outside [0.1, 0.9]^2
        When the map is evaluated
        Then the point is unchanged
        """
        phi = quarter_turn(Fraction(1, 10))
        image = phi.eval(TorusPoint(0.05, 0.5))
        self.assertEqual((image.x, image.y), (0.05, 0.5))

    def test_when_eps_not_below_quarter_then_parameter_error_is_raised(self):
        """
        Given eps = 1/4
        When the quarter turn is built
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            quarter_turn(Fraction(1, 4))

    @given(unit, unit)
    @settings(max_examples=300)
    def test_when_turned_and_turned_back_then_point_returns(self, x, y):
        """
        Given any point of the unit square
        When phi(1/10) and its inverse are applied
        Then the point comes back
        """
        phi = quarter_turn(Fraction(1, 10))
        xs, ys = np.array([x]), np.array([y])

        bx, by = phi.inverse().apply(*phi.apply(xs, ys))

        self.assertLess(float(torus_distance(xs, ys, bx, by)[0]), 1e-9)

    def test_when_differential_evaluated_then_determinant_is_one(self):
        """
        Given phi(1/10) and quasi-random points
        When the analytic Jacobian determinant is taken
        Then it equals 1 everywhere
        """
        xs, ys = sobol_points(512, seed=3)
        det = quarter_turn(Fraction(1, 10)).jacobian_determinant(xs, ys)
        self.assertLess(float(np.abs(det - 1.0).max()), 1e-9)


class TestShear(unittest.TestCase):
    """Test the stage shear g_n."""

    def test_when_coefficient_computed_then_it_is_floor_of_n_q_sigma(self):
        """
        Given n = 1, q = 16, sigma = 1/4
        When the shear coefficient is computed
        Then it is floor(16^(1/4)) = 2
        """
        self.assertEqual(shear_coefficient(1, 16, 0.25), 2)
        self.assertEqual(shear_g(1, 16, 0.25).coefficient, 2)

    def test_when_sigma_out_of_range_then_parameter_error_is_raised(self):
        """
        Given sigma = 0.7
        When g_n is built
        Then ParameterError names the admissible range
        """
        with self.assertRaises(ParameterError) as ctx:
            shear_g(1, 16, 0.7)
        self.assertIn("sigma out of (0, 1/2)", str(ctx.exception))

    def test_when_norm_computed_then_it_matches_numpy(self):
        """
        Given the shear coefficient 3
        When its operator norm is computed in closed form
        Then it matches numpy's spectral norm
        """
        expected = np.linalg.norm(np.array([[1.0, 3.0], [0.0, 1.0]]), ord=2)
        self.assertAlmostEqual(shear_norm(3), float(expected), places=12)
        self.assertAlmostEqual(shear_norm(0), 1.0)

    def test_when_determinant_estimated_by_differences_then_it_is_one(self):
        """
        Given the shear (x, y) -> (x + 3y, y)
        When its Jacobian determinant is estimated by central differences
        Then it is 1
        """
        self.assertAlmostEqual(jacobian_det(HorizontalShear(3), TorusPoint(0.3, 0.4)), 1.0, places=6)

    def test_when_difference_step_too_large_then_parameter_error_is_raised(self):
        """
        Given h = 1e-3
        When a finite-difference determinant is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            jacobian_det(HorizontalShear(3), TorusPoint(0.3, 0.4), h=1e-3)


class TestKappaProfile(unittest.TestCase):
    """Test the tent profile of the vertical shear."""

    def test_when_profile_evaluated_then_peak_and_support_follow_breakpoints(self):
        """
        Given the minimality tent for n = 2, q = 4, eps2 = 1/48
        When it is evaluated at its peak, past its support and one period later
        Then it gives 1/4, 0 and the same value again
        """
        # Given
        profile = KappaProfile.for_minimality(2, 4, Fraction(1, 48))
        peak_x = float(profile.x_peak)

        # When
        values = profile.value(np.array([peak_x, 0.2, peak_x / 2, peak_x / 2 + 0.25]))

        # Then
        self.assertAlmostEqual(values[0], 0.25)
        self.assertEqual(values[1], 0.0)
        self.assertAlmostEqual(values[2], values[3])

    def test_when_smoothing_too_wide_then_parameter_error_is_raised(self):
        """
        Given a smoothing half-width wider than half a ramp
        When the profile is built
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            KappaProfile.for_minimality(1, 4, Fraction(1, 48), smoothing=0.01)


class TestComposition(unittest.TestCase):
    """Test composition, block conjugation and JSON rebuilding."""

    def test_when_identity_composed_then_it_is_dropped(self):
        """
        Given id o S_1/2
        When the composition is built
        Then it holds a single factor
        """
        composed = ComposedMap([IdentityMap(), Translation(Fraction(1, 2))])
        self.assertEqual(len(composed.factors), 1)

    def test_when_chart_misses_unit_square_then_parameter_error_is_raised(self):
        """
        Given a chart that maps the region onto [0, 2] x [0, 1]
        When a block conjugate is built
        Then ParameterError is raised
        """
        region = Rect(Fraction(0), Fraction(1, 2), Fraction(0), Fraction(1))
        with self.assertRaises(ParameterError):
            block_conjugate(quarter_turn(Fraction(1, 10)), AffineChart(Fraction(4), Fraction(1)), region, Fraction(1, 2))

    def test_when_stage_map_serialized_then_rebuilt_map_agrees(self):
        """
        Given h_1 for q = 4, r = 2
        When it is written to a dict and rebuilt
        Then both maps send sample points to the same images
        """
        # Given
        h = _stage_h()
        xs, ys = sobol_points(256, seed=1)

        # When
        rebuilt = map_from_dict(h.to_dict())

        # Then
        ax, ay = h.apply(xs, ys)
        bx, by = rebuilt.apply(xs, ys)
        self.assertEqual(float(torus_distance(ax, ay, bx, by).max()), 0.0)


class TestStageConjugacy(unittest.TestCase):
    """Test h_n = g_n o phi_n o P_n."""

    def test_when_epsilons_computed_then_they_follow_n_and_r(self):
        """
        Given n = 1, q = 2, r = 2
        When the stage epsilons are computed
        Then they are 1/6, 1/48, 1/12 and 1/4
        """
        self.assertEqual(
            stage_epsilons(1, 2, 2),
            (Fraction(1, 6), Fraction(1, 48), Fraction(1, 12), Fraction(1, 4)),
        )

    def test_when_quarter_turn_parameter_reaches_quarter_then_factor_is_degenerate(self):
        """
        Given n = 1, r = 1 (eps1 = 1/3) and q = 2 (eps4 = 1/4)
        When phi_w and phi_m are built
        Then both are degenerate identities
        """
        self.assertTrue(build_phi_w(1, 2, 1).degenerate)
        self.assertTrue(build_phi_m(1, 2, 2).degenerate)
        self.assertFalse(build_phi_w(1, 2, 2).degenerate)

    def test_when_translated_by_one_over_q_then_h_commutes(self):
        """
        Given h_1 for q = 4
        When it is evaluated at x and at x + 1/4
        Then the images differ by the same translation
        """
        # Given
        h = _stage_h()
        xs, ys = sobol_points(1024, seed=7)

        # When
        ax, ay = h.apply(np.mod(xs + 0.25, 1.0), ys)
        bx, by = Translation(Fraction(1, 4)).apply(*h.apply(xs, ys))

        # Then
        self.assertLess(float(torus_distance(ax, ay, bx, by).max()), 1e-9)

    def test_when_differential_evaluated_then_h_preserves_area(self):
        """
        Given h_1 for q = 4 with a smoothed profile
        When its analytic Jacobian determinant is sampled
        Then it equals 1 within 1e-6
        """
        xs, ys = sobol_points(2048, seed=11)
        det = _stage_h(smoothing=1e-4).jacobian_determinant(xs, ys)
        self.assertLess(float(np.abs(det - 1.0).max()), 1e-6)

    def test_when_inverse_applied_then_h_round_trips(self):
        """
        Given h_1 for q = 4
        When h^-1 o h is applied to sample points
        Then each point returns
        """
        h = _stage_h()
        xs, ys = sobol_points(1024, seed=5)
        bx, by = h.apply_inverse(*h.apply(xs, ys))
        self.assertLess(float(torus_distance(xs, ys, bx, by).max()), 1e-9)


if __name__ == "__main__":
    unittest.main(verbosity=2)
