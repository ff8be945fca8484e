import unittest

from fractions import Fraction
from hypothesis import given, settings, strategies as st

from brickint.geometry import (
    Brick,
    DimensionMismatchError,
    Interval,
    OutsideAmbientError,
    common_refinement,
    dyadic_cells,
    max_norm_ball,
    parse_brick,
    uniform_tiling,
)


def half_open(lo, hi):
    return Interval(Fraction(lo), Fraction(hi), True, False)


class TestInterval(unittest.TestCase):
    def test_degenerate_must_be_closed(self):
        Interval.point(Fraction(1, 3))
        with self.assertRaises(ValueError):
            Interval(Fraction(1, 3), Fraction(1, 3), True, False)
        with self.assertRaises(ValueError):
            Interval(1, 0)

    def test_membership_respects_flags(self):
        interval = Interval(0, 1, False, True)
        self.assertFalse(interval.contains(0))
        self.assertTrue(interval.contains(1))
        self.assertTrue(interval.contains(Fraction(1, 2)))
        self.assertFalse(interval.interior_contains(1))

    def test_intersection(self):
        a = Interval(0, 1, True, False)
        b = Interval(1, 2)
        self.assertIsNone(a.intersect(b))
        c = Interval(Fraction(1, 2), 2, False, True)
        found = a.intersect(c)
        self.assertEqual(found, Interval(Fraction(1, 2), 1, False, False))
        self.assertEqual(Interval(0, 1).intersect(Interval(1, 2)), Interval.point(1))


class TestBrick(unittest.TestCase):
    def test_volume_and_degenerate(self):
        brick = Brick.closed([0, 0, 0], [1, Fraction(1, 2), 3])
        self.assertEqual(brick.volume, Fraction(3, 2))
        flat = Brick.closed([0, 0], [1, 0])
        self.assertTrue(flat.is_degenerate)
        self.assertEqual(flat.volume, 0)

    def test_dimension_check(self):
        with self.assertRaises(DimensionMismatchError):
            Brick.unit(2).contains((0,))
        with self.assertRaises(DimensionMismatchError):
            Brick.unit(2).intersect(Brick.unit(3))

    def test_bisect_order_and_volume(self):
        for dim in [1, 2, 3]:
            brick = Brick.unit(dim)
            children = brick.bisect()
            self.assertEqual(len(children), 2**dim)
            self.assertEqual(sum(c.volume for c in children), brick.volume)
            self.assertEqual(children[0].lo, (0,) * dim)
            self.assertEqual(children[-1].hi, (1,) * dim)
            if dim > 1:
                # first axis varies slowest
                self.assertEqual(children[1].lo[0], 0)
                self.assertEqual(children[1].lo[-1], Fraction(1, 2))

    def test_json_and_text(self):
        brick = Brick((Interval(0, 1, False, True), half_open(Fraction(1, 3), 2)))
        self.assertEqual(Brick.from_json(brick.to_json()), brick)
        self.assertEqual(str(brick), "(0,1]x[1/3,2)")
        self.assertEqual(parse_brick(str(brick)), brick)

    def test_parse_errors(self):
        for text in ["", "[0,1", "[0,1]y[0,1]", "[0;1]", "[1,0]"]:
            with self.assertRaises(ValueError, msg=text):
                parse_brick(text)


class TestTilings(unittest.TestCase):
    def _test_uniform_tiling_single(self, T, m):
        tiling = uniform_tiling(T, m)
        self.assertEqual(len(tiling.cells), m**T.dimension)
        self.assertEqual(sum(c.volume for c in tiling.cells), T.volume)
        for cell, center in zip(tiling.cells, tiling.centers):
            self.assertTrue(cell.contains(center), msg=f"{center} not in {cell}")
        # corners belong to exactly one cell
        for corner in [T.lo, T.hi, T.center]:
            owners = [cell for cell in tiling.cells if cell.contains(corner)]
            self.assertEqual(len(owners), 1, msg=f"{corner}: {len(owners)} owners")
            self.assertEqual(tiling.cell(tiling.locate(corner)), owners[0])

    def test_uniform_tiling(self):
        for dim in [1, 2, 3]:
            for m in [1, 2, 3, 5]:
                T = Brick.closed([0] * dim, [Fraction(k + 1, 2) for k in range(dim)])
                self._test_uniform_tiling_single(T, m)

    def test_degenerate_tiling_rejected(self):
        with self.assertRaises(ValueError):
            uniform_tiling(Brick.closed([0, 0], [1, 0]), 4)
        with self.assertRaises(ValueError):
            uniform_tiling(Brick.unit(1), 0)

    def test_dyadic_cells(self):
        cells = dyadic_cells(Brick.unit(2), 2)
        self.assertEqual(len(cells), 16)
        self.assertTrue(all(cell.is_closed for cell in cells))
        self.assertEqual(cells[1].lo, (0, Fraction(1, 4)))
        self.assertEqual(dyadic_cells(Brick.unit(2), 0), [Brick.unit(2)])


class TestCommonRefinement(unittest.TestCase):
    def test_inputs_are_unions_of_cells(self):
        ambient = Brick.unit(2)
        bricks = [
            Brick.closed([0, 0], [Fraction(1, 2), Fraction(1, 2)]),
            Brick((Interval(Fraction(1, 4), 1, False, True), half_open(0, Fraction(3, 4)))),
            Brick.point((Fraction(1, 2), Fraction(1, 2))),
        ]
        grid = common_refinement(bricks, ambient)
        total = sum(cell.volume for cell in grid.cells())
        self.assertEqual(total, 1)
        for brick in bricks:
            ranges = [grid.atom_range(k, f) for k, f in enumerate(brick.factors)]
            volume = Fraction(0)
            for i in ranges[0]:
                for j in ranges[1]:
                    volume += grid.cell((i, j)).volume
            self.assertEqual(volume, brick.volume, msg=f"{brick} not a union of cells")

    def test_outside_ambient(self):
        with self.assertRaises(OutsideAmbientError):
            common_refinement([Brick.closed([0], [2])], Brick.unit(1))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(st.integers(0, 8), st.integers(0, 8), st.booleans(), st.booleans()),
            min_size=1,
            max_size=5,
        )
    )
    def test_cells_are_disjoint(self, raw):
        ambient = Brick.unit(1)
        bricks = []
        for a, b, lo_closed, hi_closed in raw:
            lo, hi = sorted((Fraction(a, 8), Fraction(b, 8)))
            if lo == hi:
                bricks.append(Brick.point((lo,)))
            else:
                bricks.append(Brick((Interval(lo, hi, lo_closed, hi_closed),)))
        grid = common_refinement(bricks, ambient)
        points = [Fraction(k, 16) for k in range(17)]
        for x in points:
            owners = [cell for cell in grid.cells() if cell.contains((x,))]
            self.assertEqual(len(owners), 1, msg=f"{x} in {len(owners)} cells")


class TestMaxNormBall(unittest.TestCase):
    def test_ball_is_clipped(self):
        ball = max_norm_ball((0, Fraction(1, 2)), Fraction(1, 4), Brick.unit(2))
        self.assertEqual(ball.factors[0], Interval(0, Fraction(1, 4), True, False))
        self.assertEqual(ball.factors[1], Interval(Fraction(1, 4), Fraction(3, 4), False, False))

    def test_errors(self):
        with self.assertRaises(ValueError):
            max_norm_ball((0,), 0, Brick.unit(1))
        with self.assertRaises(OutsideAmbientError):
            max_norm_ball((2,), 1, Brick.unit(1))


if __name__ == "__main__":
    unittest.main()
