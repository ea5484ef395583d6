"""Tests for the rational rotation schedule (BDD style)."""

import math
import unittest
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from utils.errors import ParameterError
from utils.schedule import ROW_HEADER, RotationSchedule, extend_schedule


class TestScheduleRecurrence(unittest.TestCase):
    """Test p_{n+1} = k l q p + 1 and q_{n+1} = k l q^2."""

    def test_when_unit_multipliers_applied_then_second_rotation_is_three_quarters(self):
        """
        Given q1 = 2 and (k, l, s) = (1, 1, 1)
        When the schedule is extended
        Then alpha_2 = 3/4 and neither growth condition holds
        """
        # Given
        schedule = RotationSchedule.initial(2)

        # When
        extended = extend_schedule(schedule, 1, 1, 1)

        # Then
        self.assertEqual(extended.alpha(2), Fraction(3, 4))
        flags = extended.stage(1).flags
        self.assertFalse(flags.mixing)
        self.assertFalse(flags.minimality)

    def test_when_large_multipliers_applied_then_both_growth_conditions_hold(self):
        """
        Given q1 = 2 and (k, l) = (2, 25)
        When stage 2 is built
        Then q_2 = 200, p_2 = 101 and both growth flags are set
        """
        # When
        schedule = RotationSchedule.from_multipliers(2, [(2, 25, 3)])

        # Then
        row = schedule.stage(2)
        self.assertEqual((row.p, row.q), (101, 200))
        flags = schedule.stage(1).flags
        self.assertTrue(flags.mixing)
        self.assertTrue(flags.minimality)
        self.assertEqual(flags.mixing_margin, 180)
        self.assertEqual(flags.minimality_margin, 100)

    @given(
        st.integers(min_value=1, max_value=30),
        st.lists(st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)), min_size=1, max_size=3),
    )
    def test_when_any_multipliers_applied_then_rotations_stay_in_lowest_terms(self, q1, triples):
        """
        Given any q1 and positive multiplier triples
        When the schedule is built
        Then every alpha_n is in lowest terms and q_n divides q_{n+1}
        """
        schedule = RotationSchedule.from_multipliers(q1, triples)

        for prev, nxt in zip(schedule.rows, schedule.rows[1:]):
            self.assertEqual(math.gcd(nxt.p, nxt.q), 1)
            self.assertEqual(nxt.q % prev.q, 0)
            self.assertEqual(nxt.q, prev.k * prev.l * prev.q**2)


class TestScheduleValidation(unittest.TestCase):
    """Test rejected parameters."""

    def test_when_initial_pair_not_coprime_then_parameter_error_is_raised(self):
        """
        Given p1/q1 = 2/4
        When the schedule is started
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            RotationSchedule.initial(4, 2)

    def test_when_multiplier_is_zero_then_parameter_error_is_raised(self):
        """
        Given k = 0
        When the schedule is extended
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            RotationSchedule.initial(2).extend(0, 1, 1)

    def test_when_stage_beyond_schedule_requested_then_parameter_error_is_raised(self):
        """
        Given a two-stage schedule
        When stage 3 is requested
        Then ParameterError is raised
        """
        schedule = RotationSchedule.from_multipliers(2, [(1, 1, 1)])
        with self.assertRaises(ParameterError):
            schedule.stage(3)


class TestScheduleRows(unittest.TestCase):
    """Test CSV rows and the norm estimate flag."""

    def test_when_schedule_written_then_last_row_has_no_multipliers(self):
        """
        Given a two-stage schedule
        When its CSV rows are built
        Then alpha is written as p/q and the last row leaves the multipliers blank
        """
        # Given
        schedule = RotationSchedule.from_multipliers(2, [(1, 1, 1)])

        # When
        rows = schedule.to_rows()

        # Then
        self.assertEqual(len(rows[0]), len(ROW_HEADER))
        self.assertEqual(rows[0][:7], ["1", "1", "2", "1/2", "1", "1", "1"])
        self.assertEqual(rows[1][3], "3/4")
        self.assertEqual(rows[1][4:], ["", "", "", "", "", ""])

    def test_when_norm_estimate_below_log_q_then_proxy_flag_is_true(self):
        """
        Given q_2 = 200 and a third stage
        When norm estimates 1.0 and 10.0 are attached to stage 2
        Then the proxy holds only for the one below ln 200
        """
        schedule = RotationSchedule.from_multipliers(2, [(2, 25, 3), (1, 1, 1)])

        self.assertTrue(schedule.with_norm_estimate(2, 1.0).stage(2).flags.norm_proxy)
        self.assertFalse(schedule.with_norm_estimate(2, 10.0).stage(2).flags.norm_proxy)

    def test_when_last_stage_given_norm_estimate_then_parameter_error_is_raised(self):
        """
        Given a schedule
        When a norm estimate is attached to its last stage
        Then ParameterError is raised
        """
        schedule = RotationSchedule.from_multipliers(2, [(1, 1, 1)])
        with self.assertRaises(ParameterError):
            schedule.with_norm_estimate(2, 1.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
