import math
import os
import tempfile
import torch

torch.set_default_dtype(torch.float64)

import mpmath
import unittest

from fractions import Fraction
from hypothesis import given, strategies as st
from unittest import mock

from brickint.utils import (
    PRECISION_ENV,
    atomic_write,
    fraction_to_text,
    get_precision,
    make_generator,
    parse_point,
    parse_rational,
    random_fractions,
    simplest_rational_in,
    to_fraction,
    unit_latin_hypercube,
    unit_lattice,
)


class TestConversions(unittest.TestCase):
    def test_exact_inputs_pass_through(self):
        self.assertEqual(to_fraction(Fraction(2, 3)), Fraction(2, 3))
        self.assertEqual(to_fraction(5), Fraction(5))
        self.assertEqual(to_fraction(True), Fraction(1))

    def test_rounding_to_precision(self):
        precision = Fraction(1, 1000)
        self.assertEqual(to_fraction(0.1234, precision), Fraction(123, 1000))
        third = mpmath.mpf(1) / 3
        self.assertEqual(to_fraction(third, precision), Fraction(333, 1000))
        self.assertEqual(to_fraction(torch.tensor(0.5)), Fraction(1, 2))

    def test_non_finite(self):
        for value in [math.inf, math.nan, mpmath.inf]:
            with self.assertRaises(ValueError):
                to_fraction(value)
        with self.assertRaises(TypeError):
            to_fraction("1/2")

    def test_precision_from_environment(self):
        with mock.patch.dict(os.environ, {PRECISION_ENV: "1/64"}):
            self.assertEqual(get_precision(), Fraction(1, 64))
        with mock.patch.dict(os.environ, {PRECISION_ENV: "-1"}):
            with self.assertRaises(ValueError):
                get_precision()
        with mock.patch.dict(os.environ, {PRECISION_ENV: "tiny"}):
            with self.assertRaises(ValueError):
                get_precision()

    def test_parsing(self):
        self.assertEqual(parse_rational(" 3/4 "), Fraction(3, 4))
        self.assertEqual(parse_rational("1e-3"), Fraction(1, 1000))
        self.assertEqual(parse_point("1/2, 0.25"), (Fraction(1, 2), Fraction(1, 4)))
        for text in ["1/0", "half", ""]:
            with self.assertRaises(ValueError, msg=text):
                parse_rational(text)
        self.assertEqual(fraction_to_text(Fraction(6, 3)), "2")
        self.assertEqual(fraction_to_text(Fraction(-1, 3)), "-1/3")


class TestSamplers(unittest.TestCase):
    def test_latin_hypercube_strata(self):
        for dim in [1, 2, 4]:
            for n in [1, 7, 32]:
                points = unit_latin_hypercube(dim, n, 3)
                self.assertEqual(len(points), n)
                for k in range(dim):
                    strata = sorted(int(p[k] * n) for p in points)
                    self.assertEqual(strata, list(range(n)), msg=f"axis {k}, n={n}")
                    self.assertTrue(all(0 < p[k] < 1 for p in points))

    def test_latin_hypercube_is_seeded(self):
        self.assertEqual(unit_latin_hypercube(2, 16, 5), unit_latin_hypercube(2, 16, 5))
        self.assertNotEqual(unit_latin_hypercube(2, 16, 5), unit_latin_hypercube(2, 16, 6))
        self.assertEqual(unit_latin_hypercube(3, 0, 0), ())

    def test_lattice(self):
        centred = unit_lattice(2, 2, True)
        self.assertEqual(centred[0], (Fraction(1, 4), Fraction(1, 4)))
        self.assertEqual(len(centred), 4)
        anchored = unit_lattice(1, 3, False)
        self.assertEqual(anchored, ((Fraction(1, 4),), (Fraction(1, 2),), (Fraction(3, 4),)))

    def test_random_fractions(self):
        draws = random_fractions(64, make_generator(0))
        self.assertEqual(len(draws), 64)
        self.assertTrue(all(0 < d < 1 for d in draws))
        self.assertEqual(draws, random_fractions(64, make_generator(0)))


class TestSimplestRational(unittest.TestCase):
    def test_known_values(self):
        self.assertEqual(simplest_rational_in(Fraction(3, 10), Fraction(2, 5)), Fraction(1, 3))
        self.assertEqual(simplest_rational_in(Fraction(-1, 2), Fraction(1, 2)), 0)
        self.assertEqual(simplest_rational_in(Fraction(-2, 5), Fraction(-3, 10)), Fraction(-1, 3))
        self.assertEqual(simplest_rational_in(Fraction(7, 2), Fraction(7, 2)), Fraction(7, 2))

    @given(st.integers(1, 200), st.integers(1, 200), st.integers(1, 50))
    def test_smallest_denominator(self, a, b, width):
        lo = Fraction(a, b)
        hi = lo + Fraction(1, width)
        found = simplest_rational_in(lo, hi)
        self.assertTrue(lo <= found <= hi)
        for q in range(1, found.denominator):
            self.assertTrue(
                math.floor(hi * q) < lo * q, msg=f"{q} beats {found} in [{lo}, {hi}]"
            )


class TestAtomicWrite(unittest.TestCase):
    def test_replaces_contents(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "report.json")
            atomic_write(path, "first")
            atomic_write(path, "second")
            with open(path) as f:
                self.assertEqual(f.read(), "second")
            self.assertEqual(os.listdir(directory), ["report.json"])


if __name__ == "__main__":
    unittest.main()
