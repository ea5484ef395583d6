"""Tests for middle-third and gap-sequence Cantor sets (BDD style)."""

import math
import unittest
from fractions import Fraction

from scipy.special import zeta

from utils.cantor import CantorKind, CantorSpec, Membership, cantor_membership, cantor_stage
from utils.errors import ParameterError
from utils.numerics import Closure


class TestMiddleThirdStage(unittest.TestCase):
    """Test the exact middle-third construction."""

    def test_when_depth_three_built_then_eight_closed_intervals_of_one_27th_remain(self):
        """
        Given the middle-third set
        When its depth-3 stage is enumerated
        Then 8 closed intervals of length 1/27 are kept
        """
        # When
        stage = cantor_stage(CantorSpec.middle_third(), 3)

        # Then
        self.assertEqual(len(stage.kept), 8)
        self.assertTrue(all(iv.length == Fraction(1, 27) for iv in stage.kept))
        self.assertTrue(all(iv.closure is Closure.CLOSED for iv in stage.kept))
        self.assertEqual(stage.total_kept, Fraction(8, 27))
        self.assertEqual(stage.total_kept + stage.total_gap, 1)

    def test_when_first_gap_split_then_halves_meet_at_one_half(self):
        """
        Given the depth-2 middle-third stage
        When its gap pieces are listed
        Then level 1 holds [1/3, 1/2) and [1/2, 2/3), level 2 the two ninth-gaps
        """
        levels = cantor_stage(CantorSpec.middle_third(), 2).gap_pieces()

        self.assertEqual([(g.lo, g.hi) for g in levels[0]], [(Fraction(1, 3), Fraction(1, 2)), (Fraction(1, 2), Fraction(2, 3))])
        self.assertEqual([(g.lo, g.hi) for g in levels[1]], [(Fraction(1, 9), Fraction(2, 9)), (Fraction(7, 9), Fraction(8, 9))])

    def test_when_kept_total_read_per_level_then_it_is_two_thirds_power(self):
        """
        Given the depth-3 middle-third stage
        When the kept total after k levels is read
        Then it is (2/3)^k
        """
        stage = cantor_stage(CantorSpec.middle_third(), 3)
        self.assertEqual([stage.kept_total_at(k) for k in range(4)], [Fraction(2, 3) ** k for k in range(4)])

    def test_when_depth_is_zero_then_parameter_error_is_raised(self):
        """
        Given depth 0
        When a stage is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            cantor_stage(CantorSpec.middle_third(), 0)


class TestMembership(unittest.TestCase):
    """Test depth-limited membership queries."""

    def test_when_point_is_kept_endpoint_then_it_is_in(self):
        """
        Given x = 1/3
        When membership is decided at depth 4
        Then the answer is IN
        """
        result = cantor_membership(Fraction(1, 3), CantorSpec.middle_third(), 4)
        self.assertIs(result.status, Membership.IN)

    def test_when_point_in_removed_gap_then_it_is_out(self):
        """
        Given x = 1/2
        When membership is decided at depth 4
        Then the answer is OUT with the first gap attached
        """
        result = cantor_membership(Fraction(1, 2), CantorSpec.middle_third(), 4)
        self.assertIs(result.status, Membership.OUT)
        self.assertEqual(result.interval.lo, Fraction(1, 3))

    def test_when_point_never_removed_nor_endpoint_then_it_is_undecided(self):
        """
        Given x = 1/4 (in the set, never an endpoint)
        When membership is decided at depth 5
        Then the answer is UNDECIDED with a kept interval of length 3^-5
        """
        result = cantor_membership(Fraction(1, 4), CantorSpec.middle_third(), 5)
        self.assertIs(result.status, Membership.UNDECIDED)
        self.assertEqual(result.interval.length, Fraction(1, 243))

    def test_when_point_outside_unit_interval_then_parameter_error_is_raised(self):
        """
        Given x = 2
        When membership is decided
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            cantor_membership(2, CantorSpec.middle_third(), 2)


class TestGapSequenceSets(unittest.TestCase):
    """Test the p-series sets C_lambda."""

    def test_when_built_from_alpha_then_p_and_dimension_follow(self):
        """
        Given alpha = 1.5
        When the gap sequence is derived
        Then p = 2, c0 = zeta(2) and the limit dimension is 1/2
        """
        # When
        spec = CantorSpec.from_alpha(1.5)

        # Then
        self.assertIs(spec.kind, CantorKind.GAP_SEQUENCE)
        self.assertAlmostEqual(spec.p, 2.0)
        self.assertAlmostEqual(spec.c0, math.pi**2 / 6)
        self.assertAlmostEqual(spec.dimension, 0.5)
        self.assertAlmostEqual(spec.gap_length(2), 0.25 / float(zeta(2, 1)))

    def test_when_alpha_out_of_range_then_parameter_error_is_raised(self):
        """
        Given alpha = 2
        When the gap sequence is derived
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError) as ctx:
            CantorSpec.from_alpha(2.0)
        self.assertIn("alpha out of (1, 2)", str(ctx.exception))

    def test_when_series_not_summable_then_parameter_error_is_raised(self):
        """
        Given p = 1
        When a p-series set is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            CantorSpec.p_series(1.0)

    def test_when_stage_built_then_kept_and_removed_lengths_fill_the_interval(self):
        """
        Given the p = 2 gap sequence
        When its depth-4 stage is built
        Then the 16 kept intervals are ordered, disjoint and with the gaps fill [0, 1]
        """
        # When
        stage = cantor_stage(CantorSpec.p_series(2.0), 4)

        # Then
        self.assertEqual(len(stage.kept), 16)
        for left, right in zip(stage.kept, stage.kept[1:]):
            self.assertLessEqual(left.hi, right.lo)
        self.assertAlmostEqual(stage.total_kept + stage.total_gap, 1.0, places=9)
        self.assertEqual(stage.kept[0].lo, 0.0)
        self.assertAlmostEqual(stage.kept[-1].hi, 1.0, places=12)

    def test_when_kept_interval_measured_then_it_equals_its_descendant_gaps(self):
        """
        Given the p = 2 gap sequence
        When the depth-3 kept intervals are compared with their descendant-gap totals
        Then they agree
        """
        spec = CantorSpec.p_series(2.0)
        stage = cantor_stage(spec, 3)

        for index, iv in enumerate(stage.kept):
            self.assertAlmostEqual(float(iv.length), float(spec.descendant_sum(3, index)), places=9)

    def test_when_explicit_gaps_given_then_they_are_normalized(self):
        """
        Given the explicit gap list [1, 1, 1]
        When the spec is built
        Then every gap has length 1/3 and the dimension is 0
        """
        spec = CantorSpec.explicit([1.0, 1.0, 1.0])

        self.assertAlmostEqual(spec.gap_length(1), 1 / 3)
        self.assertEqual(spec.gap_length(4), 0.0)
        self.assertEqual(spec.dimension, 0.0)

    def test_when_spec_written_to_dict_then_it_is_rebuilt(self):
        """
        Given the p = 2 gap sequence
        When it is written to a dict and read back
        Then the rebuilt spec is equal
        """
        spec = CantorSpec.p_series(2.0)
        self.assertEqual(CantorSpec.from_dict(spec.to_dict()), spec)


if __name__ == "__main__":
    unittest.main(verbosity=2)
