"""Tests for Birkhoff averages, visit counts, trapping, confinement and map checks (BDD style)."""

import dataclasses
import math
import unittest
from fractions import Fraction

from utils.cantor import CantorSpec
from utils.engine import ConjugatedRotation, StageParams, build_stages, decomposition_intervals, orbit_chunks
from utils.errors import ParameterError, VerificationError
from utils.maps import HorizontalShear, IdentityMap, Translation, quarter_turn
from utils.numerics import GridSpec, Interval, TorusPoint
from utils.schedule import RotationSchedule
from utils.verify import (
    DIMENSION_TOLERANCE,
    ConfinementReport,
    ConfinementResult,
    TestFunctionSet,
    area_preservation_test,
    birkhoff_average,
    birkhoff_averages,
    cantor_dimension_series,
    commutation_test,
    confinement_band,
    distribution_test,
    generic_set_dimension,
    generic_test,
    genericity_bound,
    inverse_test,
    minimality_visit_test,
    monte_carlo_integral,
    nongeneric_trap_test,
    orbit_window,
    product_dimension_check,
    trapping_count_test,
    trapping_counts_naive,
    visit_counts_naive,
    visit_coverage,
)


def _stage_a(q1=2, triple=(2, 25, 3), r=2):
    schedule = RotationSchedule.from_multipliers(q1, [triple])
    return build_stages(StageParams("A", r=r), schedule)[0]


def _stage_cantor(variant, alpha=None):
    schedule = RotationSchedule.from_multipliers(2, [(1, 5, 3)])
    return build_stages(StageParams(variant, alpha=alpha), schedule)[0]


def _quarter_rotation():
    return ConjugatedRotation(IdentityMap(), 1, 4)


class TestBirkhoffAverages(unittest.TestCase):
    """Test streamed orbit averages and the Monte Carlo integral."""

    def test_when_orbit_of_quarter_rotation_averaged_then_mean_is_exact(self):
        """
        Given the rotation by 1/4 and the orbit of (0, 3/8)
        When x and y are averaged over one period
        Then both averages are 3/8
        """
        # Given
        system = _quarter_rotation()
        start = TorusPoint(0.0, 0.375)

        # When
        mean_x = birkhoff_average(orbit_chunks(system, start, 4), lambda x, y: x)
        mean_y = birkhoff_average(orbit_chunks(system, start, 4), lambda x, y: y)

        # Then
        self.assertAlmostEqual(mean_x, 0.375, places=12)
        self.assertAlmostEqual(mean_y, 0.375, places=12)

    def test_when_stream_is_empty_then_verification_error_is_raised(self):
        """
        Given an empty orbit stream
        When its average is taken
        Then VerificationError is raised
        """
        with self.assertRaises(VerificationError):
            birkhoff_average(iter([]), lambda x, y: x)

    def test_when_function_set_averaged_then_constant_gives_one(self):
        """
        Given the default test functions and a period of the rotation by 1/4
        When all averages are taken in one pass
        Then "one" averages to 1 and cos_x to 0
        """
        averages = birkhoff_averages(orbit_chunks(_quarter_rotation(), TorusPoint(0.0, 0.1), 4), TestFunctionSet.default())
        self.assertEqual(averages["one"], 1.0)
        self.assertAlmostEqual(averages["cos_x"], 0.0, places=12)
        self.assertEqual(len(averages), len(TestFunctionSet.default()))

    def test_when_default_set_listed_then_diagonal_character_is_included(self):
        """
        Given the default test functions
        When the diagonal character is looked up and averaged over a period of the rotation by 1/4
        Then it has integral 0 and d0-Lipschitz constant 4 pi, and its average vanishes
        """
        # Given
        functions = TestFunctionSet.default()

        # When
        diagonal = next(f for f in functions if f.name == "sin_x_plus_y")
        averages = birkhoff_averages(orbit_chunks(_quarter_rotation(), TorusPoint(0.0, 0.1), 4), functions)

        # Then
        self.assertEqual(len(functions), 7)
        self.assertEqual(diagonal.integral, 0.0)
        self.assertAlmostEqual(diagonal.lipschitz, 4 * math.pi)
        self.assertAlmostEqual(averages["sin_x_plus_y"], 0.0, places=12)

    def test_when_identity_sampled_then_monte_carlo_integral_of_x_is_one_half(self):
        """
        Given the identity map and psi(x, y) = x
        When 1024 quasi-random samples are averaged
        Then the estimate is 1/2 within 1e-2
        """
        est = monte_carlo_integral(IdentityMap(), lambda x, y: x, samples=1024, seed=0)
        self.assertEqual(est.samples, 1024)
        self.assertAlmostEqual(est.value, 0.5, delta=1e-2)

    def test_when_one_sample_requested_then_parameter_error_is_raised(self):
        """
        Given a single sample
        When the Monte Carlo integral is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            monte_carlo_integral(IdentityMap(), lambda x, y: x, samples=1)


class TestGenericity(unittest.TestCase):
    """Test the orbit window, the stage bound and the genericity report."""

    def test_when_period_exceeds_cap_then_orbit_is_subsampled(self):
        """
        Given a period of 1000 and a cap of 300
        When the window is computed
        Then the stride is 4 and 250 points cover the period
        """
        self.assertEqual(orbit_window(100, cap=1000), (100, 1))
        self.assertEqual(orbit_window(1000, cap=300), (250, 4))

    def test_when_bound_computed_for_first_stage_then_it_follows_n_and_r(self):
        """
        Given stage 1 of variant A with r = 2
        When the bound for sup norm 1 is computed
        Then it is 2/2 + 8/2 + 1/4
        """
        self.assertAlmostEqual(genericity_bound(_stage_a(), 1.0), 5.25)

    def test_when_full_period_followed_then_report_counts_every_point(self):
        """
        Given stage 1 of variant A with q_2 = 200
        When the genericity test runs from the designated point
        Then 200 points are counted, the constant averages to 1 and the stage passes
        """
        # When
        report = generic_test(_stage_a(), mc_samples=256)

        # Then
        self.assertTrue(report.full_period)
        self.assertEqual(report.orbit_length, 200)
        self.assertEqual(int(report.cell_counts.sum()), 200)
        one = next(row for row in report.rows if row.name == "one")
        self.assertAlmostEqual(one.deviation, 0.0, places=12)
        self.assertTrue(report.passed)
        self.assertIn("designated point", report.notes[0])


class TestDistribution(unittest.TestCase):
    """Test argument checks of the weak mixing distribution test."""

    def test_when_too_few_samples_then_parameter_error_is_raised(self):
        """
        Given a decomposition interval and 2 samples
        When the distribution test runs
        Then ParameterError is raised
        """
        stage = _stage_a()
        interval = decomposition_intervals(stage, 0, [0.25], [0])[0]
        with self.assertRaises(ParameterError):
            distribution_test(stage, interval, samples=2)

    def test_when_column_out_of_range_then_parameter_error_is_raised(self):
        """
        Given an interval relabelled to column 5 of a stage with q_n = 2
        When the distribution test runs
        Then ParameterError names the column range
        """
        stage = _stage_a()
        interval = dataclasses.replace(decomposition_intervals(stage, 0, [0.25], [0])[0], j=5)
        with self.assertRaises(ParameterError) as ctx:
            distribution_test(stage, interval)
        self.assertIn("[0, 2)", str(ctx.exception))

    def test_when_interval_not_in_decomposition_then_parameter_error_is_raised(self):
        """
        Given an interval whose x extent was moved
        When the distribution test runs
        Then ParameterError is raised
        """
        stage = _stage_a()
        iv = decomposition_intervals(stage, 0, [0.25], [0])[0]
        moved = dataclasses.replace(iv, x=dataclasses.replace(iv.x, hi=iv.x.hi + Fraction(1, 100)))
        with self.assertRaises(ParameterError):
            distribution_test(stage, moved)


class TestVisitCoverage(unittest.TestCase):
    """Test grid coverage by base orbits against the one-point-at-a-time oracle."""

    def test_when_quarter_rotation_visits_columns_then_every_column_is_hit(self):
        """
        Given the rotation by 1/4 and a 4 x 1 grid
        When one period is followed
        Then all 4 cells are visited and the oracle agrees
        """
        # Given
        system = _quarter_rotation()
        point = TorusPoint(0.1, 0.3)

        # When
        report = visit_coverage(system, IdentityMap(), point, GridSpec(4, 1))

        # Then
        self.assertTrue(report.passed)
        self.assertFalse(report.truncated)
        self.assertEqual(visit_counts_naive(system, IdentityMap(), point, GridSpec(4, 1), 4), {(0, 0), (1, 0), (2, 0), (3, 0)})

    def test_when_grid_has_two_rows_then_half_the_cells_are_missed(self):
        """
        Given the rotation by 1/4 and a 4 x 2 grid
        When one period of a horizontal orbit is followed
        Then coverage is 1/2 and the test fails
        """
        report = visit_coverage(_quarter_rotation(), IdentityMap(), TorusPoint(0.1, 0.3), GridSpec(4, 2))
        self.assertEqual(report.visited, 4)
        self.assertAlmostEqual(report.coverage, 0.5)
        self.assertFalse(report.passed)

    def test_when_stage_orbit_counted_then_fast_and_naive_cells_agree(self):
        """
        Given stage 1 of variant A and a point off every cell edge
        When its period is counted on the q_n x l_n grid both ways
        Then the number of visited cells agrees
        """
        # Given
        stage = _stage_a()
        point = TorusPoint((math.sqrt(5.0) - 1.0) / 7.0, 0.3137)
        grid = GridSpec(stage.q_n, stage.l_n)

        # When
        report = visit_coverage(stage.system, stage.inner, point, grid)
        naive = visit_counts_naive(stage.system, stage.inner, point, grid, stage.q_next)

        # Then
        self.assertEqual(report.visited, len(naive))

    def test_when_stage_resolution_fails_then_report_is_not_applicable(self):
        """
        Given stage 1 of variant A with k q eps2 (1 - 4 eps4) <= 1
        When the minimality visit test runs
        Then the report is marked not applicable
        """
        self.assertFalse(minimality_visit_test(_stage_a()).applicable)

    def test_when_variant_is_cantor_then_visit_test_is_refused(self):
        """
        Given a stage of variant C
        When the minimality visit test runs
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            minimality_visit_test(_stage_cantor("C"))


class TestTrapping(unittest.TestCase):
    """Test trapping counts and the confinement of non-generic orbits."""

    def test_when_counts_taken_then_vectorized_and_naive_counts_agree(self):
        """
        Given stage 1 of variant C and the kept strip t1 = 0
        When one base period is counted in the trapping cells
        Then the bulk counts equal the point-by-point oracle and are conserved
        """
        # Given
        stage = _stage_cantor("C")

        # When
        report = trapping_count_test(stage, 0)
        counts, excluded, outside = trapping_counts_naive(stage, 0, report.base)

        # Then
        self.assertEqual(report.counts.tolist(), counts)
        self.assertEqual((report.excluded, report.outside), (excluded, outside))
        self.assertTrue(report.conserved)
        self.assertEqual(report.total, 20)

    def test_when_strip_index_out_of_range_then_parameter_error_is_raised(self):
        """
        Given stage 1 of variant C, which keeps 2 strips
        When strip 5 is counted
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            trapping_count_test(_stage_cantor("C"), 5)

    def test_when_variant_a_then_trapping_is_refused(self):
        """
        Given a stage of variant A
        When trapping cells are counted
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            trapping_count_test(_stage_a(), 0)

    def test_when_gap_orbits_followed_then_they_stay_in_their_bands(self):
        """
        Given stage 1 of variant C
        When orbits started at several heights in every gap cell of every sub-column are followed for a period
        Then at least 20 orbits are followed, each stays in the band its cell is sent to
        And the orbits of the lower level-1 gap piece average at least 1/4 below 1/2
        """
        # Given
        stage = _stage_cantor("C")

        # When
        report = nongeneric_trap_test(stage)

        # Then
        self.assertGreaterEqual(len(report.results), 20)
        self.assertEqual({r.cell[0] for r in report.results}, set(range(stage.s_n)))
        for result in report.results:
            self.assertEqual(result.points, stage.q_next)
            self.assertTrue(result.inside)
        lower = [r for r in report.results if r.cell[1:] == (1, 0)]
        self.assertGreater(len(lower), 0)
        for result in lower:
            self.assertTrue(result.deviation_required)
            self.assertGreaterEqual(result.deviation, 0.25)
        self.assertTrue(report.passed)

    def test_when_kept_orbits_of_variant_e_followed_then_they_stay_in_dyadic_bands(self):
        """
        Given stage 1 of variant E with alpha = 1.5
        When orbits started in every kept cell are followed for a period
        Then at least 20 orbits stay in their dyadic bands
        And those of kept strip 0, sent to [0, 1/2), average at least 1/4 below 1/2
        """
        # Given
        stage = _stage_cantor("E", alpha=1.5)

        # When
        report = nongeneric_trap_test(stage)

        # Then
        self.assertGreaterEqual(len(report.results), 20)
        for result in report.results:
            self.assertTrue(result.inside)
            self.assertEqual(float(result.band.length), 0.5)
        lower = [r for r in report.results if r.cell[1] == 0]
        self.assertGreater(len(lower), 0)
        for result in lower:
            self.assertTrue(result.deviation_required)
            self.assertGreaterEqual(result.deviation, 0.25)
        self.assertTrue(report.passed)

    def test_when_required_band_mean_too_close_to_half_then_report_fails(self):
        """
        Given an orbit inside the band [0, 1/2) whose mean height is 0.3
        When the confinement report is judged
        Then the orbit is inside but the report fails on the mean
        """
        # Given
        result = ConfinementResult(TorusPoint(0.1, 0.1), (0, 1, 0), Interval(0.0, 0.5), 0.05, 0.45, 0.3, 10)

        # When
        report = ConfinementReport((result,))

        # Then
        self.assertTrue(result.inside)
        self.assertFalse(result.deviation_ok)
        self.assertFalse(report.passed)

    def test_when_base_point_in_kept_strip_then_parameter_error_is_raised(self):
        """
        Given stage 1 of variant C and a base point low in the first kept strip
        When its confinement is tested
        Then ParameterError says it lies in no confined cell
        """
        with self.assertRaises(ParameterError) as ctx:
            nongeneric_trap_test(_stage_cantor("C"), [TorusPoint(0.01, 0.01)], m=4)
        self.assertIn("no confined cell", str(ctx.exception))

    def test_when_variant_a_then_confinement_band_is_refused(self):
        """
        Given a stage of variant A
        When a confinement band is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            confinement_band(_stage_a(), (0, 0, 0))


class TestMapChecks(unittest.TestCase):
    """Test area preservation, inverse and commutation checks."""

    def test_when_shear_checked_then_area_is_preserved(self):
        """
        Given the shear (x, y) -> (x + 3y, y)
        When its determinant is sampled
        Then the check passes
        """
        check = area_preservation_test(HorizontalShear(3), samples=256, seed=1)
        self.assertTrue(check.passed)
        self.assertEqual(check.name, "area_preservation")

    def test_when_quarter_turn_inverted_then_inverse_check_passes(self):
        """
        Given phi(1/10)
        When its inverse is applied after it
        Then the defect is below the map tolerance
        """
        self.assertTrue(inverse_test(quarter_turn(Fraction(1, 10)), samples=256, seed=2).passed)

    def test_when_translations_compared_then_they_commute(self):
        """
        Given the translation by 1/3 and the rotation by 1/4
        When the commutation defect is sampled
        Then it is below the map tolerance
        """
        self.assertTrue(commutation_test(Translation(Fraction(1, 3)), Fraction(1, 4), samples=256, seed=3).passed)

    def test_when_quarter_turn_shifted_then_commutation_fails(self):
        """
        Given phi(1/10), which only lives on the unit square
        When it is compared with the rotation by 1/4
        Then the commutation check fails
        """
        check = commutation_test(quarter_turn(Fraction(1, 10)), Fraction(1, 4), samples=256, seed=3)
        self.assertFalse(check.passed)
        self.assertGreater(check.max_defect, 1e-3)


class TestDimensionChecks(unittest.TestCase):
    """Test the product set dimension and the series of Cantor estimates."""

    def test_when_middle_third_product_measured_then_it_is_within_tolerance(self):
        """
        Given the middle-third set at depth 6
        When the box dimension of T x C is estimated
        Then it lies within the tolerance of 1 + log 2 / log 3
        """
        report = product_dimension_check(CantorSpec.middle_third(), depth=6)
        self.assertTrue(report.within)
        self.assertAlmostEqual(report.lower, 1.0 + math.log(2) / math.log(3))
        self.assertEqual(DIMENSION_TOLERANCE, 0.06)

    def test_when_fast_decaying_gaps_measured_then_check_completes_within_tolerance(self):
        """
        Given the alpha = 1.25 gap sequence, whose scales fall about 16-fold per level
        When the product check runs at depth 8
        Then it reports an estimate within the tolerance of 1.25
        """
        report = product_dimension_check(CantorSpec.from_alpha(1.25), depth=8)
        self.assertTrue(report.within)
        self.assertAlmostEqual(report.lower, 1.25)

    def test_when_gaps_decay_too_fast_for_the_grid_then_generic_set_uses_quarter_scales(self):
        """
        Given stage 1 of variant D with alpha = 1.25, where only 2 Cantor scales fit a 4096-column grid
        When the box dimension of H_1(T x C) is estimated
        Then it is counted at the scales 4^-1 .. 4^-5 instead of raising
        """
        # Given
        stage = _stage_cantor("D", alpha=1.25)

        # When
        report = generic_set_dimension(stage)

        # Then
        self.assertEqual(list(report.result.scales), [4.0**-k for k in range(1, 6)])
        self.assertTrue(math.isfinite(report.result.estimate))
        self.assertAlmostEqual(report.upper, 1.25)

    def test_when_series_requested_then_one_estimate_per_depth(self):
        """
        Given the middle-third set and depths 6 and 8
        When the dimension series is computed
        Then each depth gets an estimate near log 2 / log 3
        """
        series = cantor_dimension_series(CantorSpec.middle_third(), [6, 8])
        self.assertEqual([k for k, _ in series], [6, 8])
        for _, result in series:
            self.assertAlmostEqual(result.estimate, math.log(2) / math.log(3), places=3)


if __name__ == "__main__":
    unittest.main(verbosity=2)
