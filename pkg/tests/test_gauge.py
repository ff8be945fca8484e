import os
import tempfile
import unittest

import mpmath

from fractions import Fraction
from hypothesis import given, settings, strategies as st

from brickint.algorithms.directional import DirectionalConfig
from brickint.algorithms.gauge import (
    AdditiveSetFunction,
    DottedPartition,
    Gauge,
    PartitionDepthError,
    SecondKindOutsideCoverError,
    TaggedCell,
    cousin_partition,
    cover_ball_radius,
    sufficiency_step,
    verify_fine,
    zero_derivative_audit,
)
from brickint.algorithms.indefinite import IndefiniteIntegral
from brickint.algorithms.integrator import IntegrandSpec
from brickint.geometry import Brick, Interval
from brickint.jordan import ExceptionCover
from brickint.stepfn import StepFunction, sup_diff_outside
from brickint.utils import to_mpf, unit_latin_hypercube

HALF = Fraction(1, 2)


def radii(first, last):
    return tuple(Fraction(1, 2**k) for k in range(first, last + 1))


class TestCousin(unittest.TestCase):
    def test_constant_gauge(self):
        partition = cousin_partition(Gauge.constant(Fraction(3, 10)), Brick.unit(1))
        self.assertEqual(len(partition), 2)
        self.assertEqual(partition.tags, ((Fraction(1, 4),), (Fraction(3, 4),)))
        self.assertTrue(verify_fine(partition, Gauge.constant(Fraction(3, 10)), Brick.unit(1)).ok)

    def test_gauge_shrinking_at_a_point(self):
        T = Brick.unit(2)
        gauge = Gauge(lambda x: max(abs(x[0] - HALF), abs(x[1] - HALF)) / 2 + Fraction(1, 64))
        partition = cousin_partition(gauge, T, corner_tags=True)
        verdict = verify_fine(partition, gauge, T)
        self.assertTrue(verdict.ok, msg=verdict.reason)
        self.assertTrue(len(partition) > 4)

    def test_depth_limit(self):
        with self.assertRaises(PartitionDepthError):
            cousin_partition(Gauge.constant(Fraction(1, 2**12)), Brick.unit(1), depth_limit=8)
        with self.assertRaises(ValueError):
            cousin_partition(Gauge.constant(1), Brick.unit(1), depth_limit=0)
        with self.assertRaises(ValueError):
            Gauge(lambda x: 0)((HALF,))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 2))
    def test_constant_gauges_are_fine(self, exponent, dimension):
        T = Brick.closed([0] * dimension, [Fraction(k + 1, 2) for k in range(dimension)])
        gauge = Gauge.constant(Fraction(1, 2**exponent) + Fraction(1, 2**12))
        partition = cousin_partition(gauge, T)
        verdict = verify_fine(partition, gauge, T)
        self.assertTrue(verdict.ok, msg=verdict.reason)

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(1, 2),
        st.integers(1, 3),
        st.lists(st.integers(1, 5), min_size=9, max_size=9),
    )
    def test_piecewise_constant_gauges_are_fine(self, dimension, k, exponents):
        # one value per cell of a k^n grid, never below 2**-10
        T = Brick.unit(dimension)

        def radius(x):
            index = 0
            for c in x:
                index = index * k + min(int(c * k), k - 1)
            return Fraction(1, 2 ** exponents[index % len(exponents)]) + Fraction(1, 2**10)

        gauge = Gauge(radius)
        partition = cousin_partition(gauge, T)
        verdict = verify_fine(partition, gauge, T)
        self.assertTrue(verdict.ok, msg=verdict.reason)
        self.assertEqual(sum((cell.volume for cell in partition.cells), Fraction(0)), 1)

    def test_csv(self):
        partition = cousin_partition(Gauge.constant(Fraction(3, 10)), Brick.unit(1))
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "partition.csv")
            text = partition.to_csv(path)
            with open(path) as f:
                self.assertEqual(f.read(), text)
        lines = text.splitlines()
        self.assertEqual(lines[0], "lo_0,hi_0,tag_0,gauge_at_tag")
        self.assertEqual(lines[1], "0,1/2,1/4,3/10")


class TestVerifyFine(unittest.TestCase):
    def _partition(self, cells_and_tags):
        return DottedPartition(
            Brick.unit(1),
            tuple(TaggedCell(cell, tag, Fraction(1)) for cell, tag in cells_and_tags),
        )

    def _test_violation_single(self, cells_and_tags, bullet, gauge=None):
        gauge = gauge or Gauge.constant(1)
        verdict = verify_fine(self._partition(cells_and_tags), gauge, Brick.unit(1))
        self.assertFalse(verdict.ok)
        self.assertEqual(verdict.bullet, bullet, msg=verdict.reason)

    def test_violations(self):
        left, right = Brick.closed([0], [HALF]), Brick.closed([HALF], [1])
        half_open = Brick((Interval(0, HALF, True, False),))
        self._test_violation_single([(half_open, (0,)), (right, (1,))], 1)
        self._test_violation_single([(left, (0,)), (Brick.closed([Fraction(1, 4)], [1]), (1,))], 2)
        self._test_violation_single([(left, (0,))], 3)
        self._test_violation_single([(left, (1,)), (right, (1,))], 4)
        self._test_violation_single([(left, (0,)), (right, (1,))], 4, Gauge.constant(HALF))
        verdict = verify_fine(self._partition([(left, (0,)), (right, (1,))]), Gauge.constant(1), Brick.unit(1))
        self.assertTrue(verdict.ok)


class TestCoverBallRadius(unittest.TestCase):
    def test_largest_inner_ball(self):
        cover = ExceptionCover(
            (Brick.closed([0], [HALF]), Brick((Interval(Fraction(1, 4), 1, False, False),)))
        )
        self.assertEqual(cover_ball_radius(cover, (Fraction(3, 8),)), Fraction(1, 8))
        self.assertEqual(cover_ball_radius(cover, (HALF,)), Fraction(1, 4))
        with self.assertRaises(ValueError):
            cover_ball_radius(cover, (0,))


class TestSufficiencyStep(unittest.TestCase):
    def test_jump_inside_cover(self):
        T = Brick.unit(1)
        f = lambda x: 1 if x[0] > HALF else 0
        eps = Fraction(1, 2**6)
        cover = ExceptionCover((Brick((Interval(HALF - eps, HALF + eps, False, False),)),))
        config = DirectionalConfig(radii=radii(2, 9), samples=16)
        g = sufficiency_step(f, cover, 1, 8, ambient=T, config=config)
        target = StepFunction.indicator(Brick((Interval(HALF, 1, False, True),)), T)
        self.assertEqual(sup_diff_outside(g, target, cover.bricks), 0)

    def test_continuous_function(self):
        T = Brick.unit(2)
        f = lambda x: x[0] * x[1]
        m = 4
        config = DirectionalConfig(radii=radii(2, 5), samples=16)
        g = sufficiency_step(f, ExceptionCover(), 1, m, ambient=T, config=config)
        for x in unit_latin_hypercube(2, 64, 0):
            self.assertTrue(abs(g(x) - f(x)) <= Fraction(1, m), msg=f"{x}: {g(x)} vs {f(x)}")

    def test_second_kind_outside_cover(self):
        T = Brick.unit(1)

        def wild(x):
            if x[0] == HALF:
                return 0
            return mpmath.sin(1 / to_mpf(x[0] - HALF))

        # the first cell is tagged at 1/2
        config = DirectionalConfig(samples=16)
        with self.assertRaises(SecondKindOutsideCoverError):
            sufficiency_step(wild, ExceptionCover(), 1, 4, ambient=T, config=config)


class TestZeroDerivativeAudit(unittest.TestCase):
    def _thin_cover(self):
        eps = Fraction(1, 2**24)
        return ExceptionCover(
            (Brick((Interval(HALF - eps, HALF + eps, False, False), Interval(-1, 2, False, False))),)
        )

    def test_zero_function_is_certified(self):
        phi = AdditiveSetFunction(lambda S: 0, 0)
        verdict = zero_derivative_audit(phi, self._thin_cover(), Brick.unit(2), Fraction(1, 10**6), lambda x: Fraction(1, 4))
        self.assertTrue(verdict.certified)
        self.assertEqual(verdict.cells, 16)

    def test_almost_everywhere_equal_integrands_are_certified(self):
        # g differs from x*y only on the line x = 1/2
        f = IntegrandSpec(Brick.unit(2), lambda x: x[0] * x[1])
        g = IntegrandSpec(Brick.unit(2), lambda x: x[0] * x[1] + (1 if x[0] == HALF else 0))
        Psi_f, Psi_g = IndefiniteIntegral(f), IndefiniteIntegral(g)
        phi = AdditiveSetFunction(lambda S: Psi_f(S) - Psi_g(S), 1)
        verdict = zero_derivative_audit(phi, self._thin_cover(), Brick.unit(2), Fraction(1, 10**6), lambda x: Fraction(1, 4))
        self.assertTrue(verdict.certified, msg=f"{verdict}")
        self.assertTrue(verdict.in_cover_sum + verdict.off_cover_sum < Fraction(1, 10**6))

    def test_volume_is_not(self):
        phi = AdditiveSetFunction(lambda S: S.volume, 1)
        verdict = zero_derivative_audit(phi, self._thin_cover(), Brick.unit(2), HALF, lambda x: Fraction(1, 4))
        self.assertFalse(verdict.certified)
        self.assertEqual(verdict.off_cover_sum + verdict.in_cover_sum, 1)

    def test_arguments(self):
        phi = AdditiveSetFunction(lambda S: S.volume, 1)
        with self.assertRaises(ValueError):
            zero_derivative_audit(phi, self._thin_cover(), Brick.unit(2), 0, lambda x: 1)
        with self.assertRaises(ValueError):
            zero_derivative_audit(phi, [Brick.unit(2)], Brick.unit(2), HALF, lambda x: 1)
        with self.assertRaises(ValueError):
            AdditiveSetFunction(lambda S: 0, -1)


if __name__ == "__main__":
    unittest.main()
