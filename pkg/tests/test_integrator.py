import unittest

from fractions import Fraction

from brickint.algorithms.directional import DirectionalConfig, Verdict, decide_k_integrability
from brickint.algorithms.integrator import (
    IntegrandSpec,
    OracleError,
    darboux,
    extend,
    fubini,
    inner_integral,
    k_integrate,
    sample_step,
    truncate,
)
from brickint.convergence import ToleranceNotReached
from brickint.gallery import h_outer, resolve
from brickint.geometry import Brick
from brickint.jordan import content_bounds
from brickint.utils import unit_latin_hypercube


def product():
    return IntegrandSpec(Brick.unit(2), lambda x: x[0] * x[1])


def below_diagonal(x):
    return x[1] <= x[0]


def triangle():
    return IntegrandSpec(
        Brick.unit(2),
        lambda x: 1 if below_diagonal(x) else 0,
        support_predicate=below_diagonal,
    )


class TestSampleStep(unittest.TestCase):
    def test_centres_and_zero_cells(self):
        g = sample_step(triangle(), 4)
        # cells on or below the diagonal keep a term
        self.assertEqual(len(g.terms), 10)
        self.assertEqual(g.integral(), Fraction(10, 16))

    def test_oracle_failure(self):
        f = IntegrandSpec(Brick.unit(1), lambda x: 1 / (x[0] - Fraction(1, 2)))
        with self.assertRaises(OracleError):
            sample_step(f, 1)
        with self.assertRaises(OracleError):
            sample_step(IntegrandSpec(Brick.unit(1), lambda x: float("nan")), 1)

    def test_spec_validation(self):
        with self.assertRaises(ValueError):
            IntegrandSpec(Brick.unit(1), lambda x: 0, claimed_bound=-1)
        with self.assertRaises(ValueError):
            product().restrict(Brick.closed([0, 0], [2, 1]))


class TestKIntegrate(unittest.TestCase):
    def test_bilinear_is_exact(self):
        result = k_integrate(product(), Fraction(1, 1000), (8, 16))
        self.assertEqual(result.value, Fraction(1, 4))
        self.assertEqual(result.m, 16)
        self.assertEqual(result.error_bound, 0)
        cert = result.certificate
        self.assertIsNotNone(cert)
        cert.validate()
        self.assertTrue(cert.uniform_bound <= 1)

    def test_triangle_within_bound(self):
        result = k_integrate(triangle(), Fraction(1, 50), (128, 256))
        self.assertEqual(result.m, 256)
        self.assertTrue(result.error_bound <= Fraction(1, 50))
        self.assertTrue(
            abs(result.value - Fraction(1, 2)) <= result.error_bound,
            msg=f"{float(result.value)} +- {float(result.error_bound)}",
        )

    def test_tolerance_not_reached(self):
        with self.assertRaises(ToleranceNotReached) as caught:
            k_integrate(triangle(), Fraction(1, 10**6), (2, 4))
        best = caught.exception.best
        self.assertIsNotNone(best)
        self.assertTrue(best.error_bound > Fraction(1, 10**6))

    def test_schedule_validation(self):
        for schedule in [(), (8, 4), (0, 2), (4, 4)]:
            with self.assertRaises(ValueError, msg=f"{schedule}"):
                k_integrate(product(), Fraction(1, 10), schedule)
        with self.assertRaises(ValueError):
            k_integrate(product(), 0, (4,))

    def test_triangle_inside_content_bounds(self):
        result = k_integrate(triangle(), Fraction(1, 50), (128, 256))
        bounds = content_bounds(below_diagonal, Brick.unit(2), 10)
        self.assertTrue(bounds.gap < Fraction(1, 100), msg=f"gap {float(bounds.gap)}")
        # the certified enclosure of the integral meets the content bracket
        self.assertTrue(
            bounds.inner - result.error_bound <= result.value <= bounds.outer + result.error_bound,
            msg=f"{float(result.value)} not in [{float(bounds.inner)}, {float(bounds.outer)}]",
        )


class TestExtensionAndTruncation(unittest.TestCase):
    def test_extension_by_zero(self):
        one = IntegrandSpec(Brick.unit(1), lambda x: 1)
        result = k_integrate(
            extend(one, Brick.closed([-1], [2])), Fraction(5, 100), (3, 6, 12, 24, 48, 96)
        )
        self.assertEqual(result.value, 1)
        bigger = extend(product(), Brick.closed([0, 0], [2, 2]))
        self.assertEqual(bigger((Fraction(3, 2), Fraction(1, 2))), 0)
        result = k_integrate(bigger, Fraction(1, 10), (32, 128))
        self.assertEqual(result.value, Fraction(1, 4))

    def test_extension_needs_superset(self):
        with self.assertRaises(ValueError):
            extend(product(), Brick.closed([0, 0], [1, Fraction(1, 2)]))

    def test_truncation(self):
        def spiked(x):
            return x[0] * x[1] + (10**6 if x[0] == Fraction(1, 2) else 0)

        clipped = truncate(IntegrandSpec(Brick.unit(2), spiked), 1)
        self.assertEqual(clipped.claimed_bound, 1)
        self.assertEqual(clipped((Fraction(1, 2), Fraction(1, 2))), 1)
        self.assertEqual(clipped((Fraction(1, 4), Fraction(1, 2))), Fraction(1, 8))
        tol = Fraction(1, 100)
        truncated = k_integrate(clipped, tol, (8, 16))
        plain = k_integrate(product(), tol, (8, 16))
        self.assertEqual(plain.value, Fraction(1, 4))
        self.assertTrue(
            abs(truncated.value - plain.value) <= truncated.error_bound + plain.error_bound,
            msg=f"{truncated.value} vs {plain.value}",
        )
        with self.assertRaises(ValueError):
            truncate(product(), 0)


class TestFubiniAndDarboux(unittest.TestCase):
    def test_fubini_bilinear(self):
        self.assertEqual(fubini(product(), 8), Fraction(1, 4))
        cube = IntegrandSpec(Brick.unit(3), lambda x: x[0] * x[1] * x[2])
        self.assertEqual(fubini(cube, 4), Fraction(1, 8))
        with self.assertRaises(ValueError):
            fubini(IntegrandSpec(Brick.unit(1), lambda x: 1), 4)

    def test_inner_integral_of_region(self):
        h = IntegrandSpec.from_function(resolve("h_fixture"))
        x = Fraction(1, 2)
        inner = inner_integral(h, (x,), 512)
        self.assertTrue(abs(float(inner) - float(h_outer(x))) < 1e-2)
        with self.assertRaises(ValueError):
            inner_integral(h, (), 4)

    def test_inner_integrals_at_many_sections(self):
        h = IntegrandSpec.from_function(resolve("h_fixture"))
        for (x,) in unit_latin_hypercube(1, 50, 5):
            inner = inner_integral(h, (x,), 512)
            self.assertTrue(abs(float(inner) - float(h_outer(x))) < 1e-2, msg=f"section at {x}")
        outer = resolve("h_outer?k=6")
        decision = decide_k_integrability(
            outer, outer.ambient, (3, 5), config=DirectionalConfig(samples=16)
        )
        self.assertEqual(decision.verdict, Verdict.NOT_INTEGRABLE_EVIDENCE, msg=f"{decision.to_json()}")

    def test_darboux_linear(self):
        f = IntegrandSpec(Brick.unit(1), lambda x: x[0])
        self.assertEqual(darboux(f, 4), (Fraction(3, 8), Fraction(5, 8)))

    def test_darboux_thomae(self):
        thomae = IntegrandSpec.from_function(resolve("thomae"))
        lower, upper = darboux(thomae, 4096)
        # every sample is rational, so the lower sum stays positive
        self.assertTrue(0 < lower < Fraction(1, 10**6))
        self.assertTrue(upper < Fraction(1, 20), msg=f"upper sum {float(upper)}")

    def test_darboux_gap_shrinks(self):
        f = IntegrandSpec.from_function(resolve("f_prop41c?k=3"))
        gaps = []
        for m in [16, 256]:
            lower, upper = darboux(f, m, samples_per_cell=8)
            gaps.append(upper - lower)
        self.assertTrue(gaps[1] < gaps[0], msg=f"gaps {[float(g) for g in gaps]}")


if __name__ == "__main__":
    unittest.main()
