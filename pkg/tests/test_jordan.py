import math
import unittest

from fractions import Fraction

from brickint.geometry import Brick, Interval
from brickint.jordan import ExceptionCover, boundary_cells, certify_null, content_bounds


def disc(point):
    x, y = point
    return (x - Fraction(1, 2)) ** 2 + (y - Fraction(1, 2)) ** 2 <= Fraction(1, 9)


def lower_triangle(point):
    return point[1] <= point[0]


class TestContentBounds(unittest.TestCase):
    def test_grid_aligned_brick_is_exact(self):
        inside = Brick.closed([0, 0], [Fraction(1, 2), Fraction(1, 4)])
        for depth in [2, 3, 4]:
            bounds = content_bounds(inside.contains, Brick.unit(2), depth)
            self.assertTrue(bounds.inner <= Fraction(1, 8) <= bounds.outer)
            # only the cells touching the boundary from outside are uncertain
            self.assertTrue(bounds.gap <= 3 * Fraction(1, 2**depth), msg=f"gap {bounds.gap}")

    def _test_gap_shrinks_single(self, member, content):
        gaps = []
        for depth in [3, 4, 5]:
            bounds = content_bounds(member, Brick.unit(2), depth)
            self.assertTrue(
                float(bounds.inner) <= content <= float(bounds.outer),
                msg=f"depth {depth}: {float(bounds.inner)} {float(content)} {float(bounds.outer)}",
            )
            gaps.append(bounds.gap)
        self.assertTrue(gaps[0] > gaps[1] > gaps[2], msg=f"gaps {gaps}")

    def test_gap_shrinks(self):
        self._test_gap_shrinks_single(lower_triangle, 0.5)
        self._test_gap_shrinks_single(disc, math.pi / 9)

    def test_depth_must_be_positive(self):
        with self.assertRaises(ValueError):
            content_bounds(lower_triangle, Brick.unit(2), 0)

    def test_boundary_cells_of_triangle(self):
        for depth in [2, 3, 4]:
            cover = boundary_cells(lower_triangle, Brick.unit(2), depth)
            m = 2**depth
            # diagonal cells and their upper-left neighbours touch the diagonal
            self.assertTrue(m <= len(cover) <= 2 * m, msg=f"{len(cover)} cells at depth {depth}")
            self.assertTrue(cover.contains((Fraction(1, 3), Fraction(1, 3))))
            self.assertFalse(cover.contains((Fraction(7, 8) + Fraction(1, 100), Fraction(1, 100))))


class TestExceptionCover(unittest.TestCase):
    def test_queries(self):
        cover = ExceptionCover(
            (
                Brick.closed([0], [Fraction(1, 4)]),
                Brick((Interval(Fraction(1, 2), 1, False, False),)),
            )
        )
        self.assertEqual(cover.total_volume, Fraction(3, 4))
        self.assertTrue(cover.contains((Fraction(1, 4),)))
        self.assertFalse(cover.interior_contains((Fraction(1, 4),)))
        self.assertFalse(cover.contains((Fraction(1, 2),)))
        self.assertEqual(cover.first_containing((Fraction(3, 4),)), cover.bricks[1])
        self.assertEqual(ExceptionCover.from_json(cover.to_json()), cover)
        self.assertEqual(len(cover.union(cover)), 4)


class TestCertifyNull(unittest.TestCase):
    def test_points(self):
        for dim in [1, 2, 3]:
            points = [tuple(Fraction(i, 7) for _ in range(dim)) for i in range(7)]
            for epsilon in [Fraction(1, 10), Fraction(1, 1000)]:
                found = certify_null(points, epsilon)
                self.assertTrue(found.ok)
                self.assertTrue(found.cover.total_volume < epsilon)
                for point in points:
                    self.assertTrue(found.cover.interior_contains(point), msg=f"{point} not covered")

    def test_existing_cover(self):
        cover = [Brick.closed([0], [Fraction(1, 10)])]
        self.assertTrue(certify_null(cover, Fraction(1, 5)).ok)
        rejected = certify_null(ExceptionCover(tuple(cover)), Fraction(1, 10))
        self.assertFalse(rejected.ok)
        self.assertIsNone(rejected.cover)

    def test_epsilon_must_be_positive(self):
        with self.assertRaises(ValueError):
            certify_null([(0,)], 0)


if __name__ == "__main__":
    unittest.main()
