import json
import os
import tempfile
import unittest

from unittest import mock

import mpmath

from fractions import Fraction
from hypothesis import given, settings, strategies as st

from brickint.dsl import (
    EvaluationError,
    FunctionSpec,
    ParseError,
    parse,
    parse_condition,
    roundtrip,
    to_text,
)
from brickint.geometry import Brick, parse_brick
from brickint.utils import PRECISION_ENV


class TestParse(unittest.TestCase):
    def test_rationals_stay_exact(self):
        spec = parse("x1 * x2 + 1/3")
        self.assertEqual(spec.dimension, 2)
        self.assertEqual(spec((Fraction(1, 2), Fraction(1, 2))), Fraction(7, 12))
        self.assertEqual(parse("0.1 + 0.2")((0,)), Fraction(3, 10))

    def test_decimals_round_at_precision(self):
        with mock.patch.dict(os.environ, {PRECISION_ENV: "1/1000"}):
            self.assertEqual(parse("0.1234")((0,)), Fraction(123, 1000))
            self.assertEqual(parse("x1 + 2.0006")((0,)), Fraction(2001, 1000))
            self.assertEqual(parse("1/3")((0,)), Fraction(1, 3))

    def test_transcendental_values(self):
        value = parse("sin(x1) + exp(0)")((Fraction(1, 2),))
        self.assertTrue(isinstance(value, mpmath.mpf))
        self.assertTrue(mpmath.almosteq(value, mpmath.sin(0.5) + 1, 1e-12))

    def test_piecewise_and_conditions(self):
        spec = parse("if x1 > 1/2 and not x2 == 0 then 1 else 0")
        self.assertEqual(spec((Fraction(3, 4), Fraction(1, 4))), 1)
        self.assertEqual(spec((Fraction(3, 4), 0)), 0)
        self.assertEqual(spec((Fraction(1, 2), 1)), 0)
        member = parse_condition("(x1 - 1/2) * (x1 - 1/2) + x2 * x2 <= 1/4 or x1 >= 1")
        self.assertTrue(member((Fraction(1, 2), Fraction(1, 2))))
        self.assertTrue(member((1, 1)))
        self.assertFalse(member((0, 1)))

    def test_gallery_reference(self):
        spec = parse("gallery:thomae_sheet")
        self.assertEqual(spec.ambient, Brick.unit(2))
        self.assertEqual(spec((Fraction(1, 3), Fraction(1, 7))), Fraction(1, 3))
        scaled = parse("2 * gallery:thomae", ambient=parse_brick("[0,1]x[0,1]"))
        self.assertEqual(scaled((Fraction(1, 4), 0)), Fraction(1, 2))

    def test_errors_carry_positions(self):
        cases = [
            ("x1 +", 1, 5),
            ("x0", 1, 1),
            ("foo(x1)", 1, 1),
            ("x1 * (x2", 1, 9),
            ("1/0", 1, 1),
            ("x1\n  $", 2, 3),
            ("sin(x1, x2)", 1, 1),
        ]
        for text, line, column in cases:
            with self.assertRaises(ParseError, msg=text) as caught:
                parse(text)
            self.assertEqual((caught.exception.line, caught.exception.column), (line, column), msg=text)

    def test_dimension_limit(self):
        with self.assertRaises(ParseError):
            parse("x3", ambient=Brick.unit(2))

    def test_evaluation_errors(self):
        for text in ["1 / (x1 - x1)", "log(x1 - 1)", "sqrt(0 - 1)"]:
            with self.assertRaises(EvaluationError, msg=text):
                parse(text)((Fraction(1, 2),))


class TestPrinting(unittest.TestCase):
    def test_minimal_parentheses(self):
        for text in [
            "x1 - (x2 - x3)",
            "(x1 + x2) * x3",
            "x1 / (x2 * x3)",
            "-(x1 + 1)",
            "if x1 < 1 or x2 < 1 and x3 > 0 then min(x1, x2) else abs(x3)",
        ]:
            spec = parse(text)
            self.assertEqual(spec.text, text)
            self.assertEqual(roundtrip(spec).body, spec.body)

    def test_piecewise_inside_comparisons(self):
        for text in [
            "if (if x1 < 1/2 then 1 else 0) < 1 then x1 else 0",
            "if x1 < (if x1 < 1/2 then 1 else 0) then x1 else 0",
            "if not (if x2 > x1 then x1 else x2) >= 1/3 then 1 else 2",
        ]:
            spec = parse(text)
            self.assertEqual(spec.text, text)
            self.assertEqual(roundtrip(spec).body, spec.body, msg=text)

    @settings(max_examples=60, deadline=None)
    @given(st.recursive(
        st.sampled_from(["x1", "x2", "1/2", "3"]),
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*", "/"]), inner).map(
                lambda t: f"({t[0]}) {t[1]} ({t[2]})"
            ),
            st.tuples(inner, st.sampled_from(["<", "<=", "==", "!="]), inner, inner, inner).map(
                lambda t: f"if ({t[0]}) {t[1]} ({t[2]}) then ({t[3]}) else ({t[4]})"
            ),
        ),
        max_leaves=8,
    ))
    def test_printed_text_parses_back(self, text):
        spec = parse(text, ambient=Brick.unit(2))
        self.assertEqual(parse(to_text(spec.body), ambient=spec.ambient).body, spec.body)


class TestFunctionSpecFiles(unittest.TestCase):
    def test_json_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "f.json")
            with open(path, "w") as f:
                json.dump({"expr": "x1 * x2", "dimension": 2, "ambient": [["0", "2", True, True], ["0", "1", True, True]]}, f)
            spec = FunctionSpec.from_file(path)
            self.assertEqual(spec.ambient.volume, 2)
            self.assertEqual(FunctionSpec.from_json(spec.to_json()), spec)

    def test_declared_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            FunctionSpec.from_json({"expr": "x1 * x2", "dimension": 3})
        with self.assertRaises(ValueError):
            FunctionSpec.from_json({"dimension": 1})


if __name__ == "__main__":
    unittest.main()
