"""Tests for box-counting dimension estimates (BDD style)."""

import math
import unittest

import numpy as np

from utils.cantor import CantorSpec
from utils.dimension import (
    box_dimension,
    cantor_box_dimension,
    default_cantor_scales,
    product_box_dimension,
    product_set_points,
)
from utils.errors import ParameterError
from utils.verify import DIMENSION_TOLERANCE


class TestBoxDimension(unittest.TestCase):
    """Test the least-squares box-count slope."""

    def test_when_middle_third_counted_then_slope_is_log2_over_log3(self):
        """
        Given the depth-8 middle-third stage at the scales 3^-1 .. 3^-8
        When its box dimension is estimated
        Then the counts are 2^k and the slope is log 2 / log 3
        """
        # When
        result = cantor_box_dimension(CantorSpec.middle_third(), 8)

        # Then
        self.assertEqual(list(result.counts), [2**k for k in range(1, 9)])
        self.assertAlmostEqual(result.estimate, math.log(2) / math.log(3), places=6)
        self.assertFalse(result.degenerate)

    def test_when_product_counted_then_slope_is_one_plus_cantor_dimension(self):
        """
        Given T x C for the depth-6 middle-third stage
        When its box dimension is estimated
        Then the slope is 1 + log 2 / log 3
        """
        result = product_box_dimension(CantorSpec.middle_third(), 6)
        self.assertAlmostEqual(result.estimate, 1.0 + math.log(2) / math.log(3), places=3)

    def test_when_gap_sequence_products_counted_then_each_lies_near_alpha(self):
        """
        Given T x C for the gap sequences with alpha = 1.25, 1.5 and 1.75 at depth 8
        When the product box dimension is counted
        Then no scale is dropped and each estimate lies within the tolerance of alpha
        And it stays within 0.03 of 1 plus the estimate for C alone
        """
        for alpha in (1.25, 1.5, 1.75):
            with self.subTest(alpha=alpha):
                # Given
                spec = CantorSpec.from_alpha(alpha)

                # When
                result = product_box_dimension(spec, 8)

                # Then
                self.assertEqual(len(result.scales), 8)
                self.assertLessEqual(abs(result.estimate - alpha), DIMENSION_TOLERANCE)
                self.assertLess(abs(result.estimate - 1.0 - cantor_box_dimension(spec, 8).estimate), 0.03)

    def test_when_product_counted_then_counts_are_cantor_counts_times_columns(self):
        """
        Given T x C for the depth-4 middle-third stage
        When the product boxes are counted
        Then the count at 3^-k is 2^k times 3^k
        """
        result = product_box_dimension(CantorSpec.middle_third(), 4)
        self.assertEqual(list(result.counts), [6**k for k in range(1, 5)])

    def test_when_set_is_one_point_then_estimate_is_degenerate_zero(self):
        """
        Given a single point
        When its box dimension is estimated
        Then the estimate is 0 and flagged degenerate
        """
        result = box_dimension(np.array([[0.5, 0.5]]), [0.1, 0.01, 0.001])
        self.assertEqual(result.estimate, 0.0)
        self.assertTrue(result.degenerate)

    def test_when_fewer_than_three_scales_then_parameter_error_is_raised(self):
        """
        Given two box sizes
        When box counting is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            box_dimension(np.array([[0.5, 0.5]]), [0.1, 0.001])

    def test_when_scales_span_less_than_two_decades_then_parameter_error_is_raised(self):
        """
        Given box sizes from 0.1 to 0.01 only
        When box counting is requested
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            box_dimension(np.array([[0.5, 0.5]]), [0.1, 0.05, 0.01])


class TestCantorScales(unittest.TestCase):
    """Test the default scale ladder and product samples."""

    def test_when_middle_third_scales_listed_then_they_are_powers_of_one_third(self):
        """
        Given the depth-4 middle-third stage
        When default scales are listed
        Then they are 3^-1 .. 3^-4
        """
        scales = default_cantor_scales(CantorSpec.middle_third(), 4)
        for k, delta in enumerate(scales, start=1):
            self.assertAlmostEqual(delta, 3.0**-k)

    def test_when_start_level_not_below_depth_then_parameter_error_is_raised(self):
        """
        Given start level 4 at depth 4
        When scales are listed
        Then ParameterError is raised
        """
        with self.assertRaises(ParameterError):
            default_cantor_scales(CantorSpec.middle_third(), 4, start_level=4)

    def test_when_product_sampled_then_grid_times_midpoints_is_returned(self):
        """
        Given 5 x columns and the depth-2 middle-third stage
        When product points are sampled
        Then 20 points are returned, all with y at a kept midpoint
        """
        pts = product_set_points(CantorSpec.middle_third(), 2, 5)

        self.assertEqual(pts.shape, (20, 2))
        self.assertEqual(sorted(set(np.round(pts[:, 1], 12))), sorted(np.round([1 / 18, 5 / 18, 13 / 18, 17 / 18], 12)))


if __name__ == "__main__":
    unittest.main(verbosity=2)
