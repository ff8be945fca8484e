from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from .geometry import (
    Brick,
    Grid,
    OutsideAmbientError,
    common_refinement,
)
from .utils import fraction_to_text, parse_rational, to_fraction

__all__ = [
    "Term",
    "StepFunction",
    "evaluate",
    "integral",
    "canonicalize",
    "combine",
    "sup_diff_outside",
]


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    support: Brick

    def __post_init__(self):
        object.__setattr__(self, "coeff", to_fraction(self.coeff))


TermLike = Union[Term, Tuple[object, Brick]]


@dataclass(frozen=True)
class StepFunction:
    """
    Finite linear combination of brick indicators over an ambient brick.

    Supports may overlap and coefficients may cancel; the representation is
    not canonical. Use ``canonicalize`` to obtain the cell table of the
    common refinement.
    """

    ambient: Brick
    terms: Tuple[Term, ...] = ()

    def __post_init__(self):
        terms = tuple(
            term if isinstance(term, Term) else Term(*term) for term in self.terms
        )
        for term in terms:
            self.ambient.check_dimension(term.support.dimension)
            if not term.support.is_subset(self.ambient):
                raise OutsideAmbientError(
                    f"Support {term.support} is not inside {self.ambient}"
                )
        object.__setattr__(self, "terms", terms)

    @classmethod
    def zero(cls, ambient: Brick) -> "StepFunction":
        return cls(ambient, ())

    @classmethod
    def indicator(cls, support: Brick, ambient: Brick, coeff=1) -> "StepFunction":
        return cls(ambient, (Term(coeff, support),))

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    def evaluate(self, x: Sequence) -> Fraction:
        if not self.ambient.contains(x):
            raise OutsideAmbientError(f"Point {x} outside {self.ambient}")
        total = Fraction(0)
        for term in self.terms:
            if term.support.contains(x):
                total += term.coeff
        return total

    def __call__(self, x: Sequence) -> Fraction:
        return self.evaluate(x)

    def integral(self) -> Fraction:
        return sum((term.coeff * term.support.volume for term in self.terms), Fraction(0))

    def total_support_volume(self) -> Fraction:
        return sum((term.support.volume for term in self.terms), Fraction(0))

    def refinement(self, extra: Iterable[Brick] = ()) -> Grid:
        bricks = [term.support for term in self.terms]
        bricks.extend(extra)
        return common_refinement(bricks, self.ambient)

    def values_on_grid(self, grid: Grid) -> Dict[Tuple[int, ...], Fraction]:
        """
        Value of the function on every grid cell, provided every support is a
        union of cells of ``grid``. Cells with value 0 are omitted.
        """
        values: Dict[Tuple[int, ...], Fraction] = {}
        for term in self.terms:
            ranges = [
                grid.atom_range(k, factor) for k, factor in enumerate(term.support.factors)
            ]
            index_sets: List[Tuple[int, ...]] = [()]
            for axis_range in ranges:
                index_sets = [index + (i,) for index in index_sets for i in axis_range]
            for index in index_sets:
                values[index] = values.get(index, Fraction(0)) + term.coeff
        return {index: value for index, value in values.items() if value != 0}

    def canonicalize(self) -> "StepFunction":
        grid = self.refinement()
        values = self.values_on_grid(grid)
        terms = tuple(Term(values[index], grid.cell(index)) for index in sorted(values))
        return StepFunction(self.ambient, terms)

    def max_abs(self) -> Fraction:
        values = self.values_on_grid(self.refinement())
        return max((abs(value) for value in values.values()), default=Fraction(0))

    def combine(self, a, other: "StepFunction", b) -> "StepFunction":
        return combine(a, self, b, other)

    def scale(self, a) -> "StepFunction":
        a = to_fraction(a)
        if a == 0:
            return StepFunction.zero(self.ambient)
        return StepFunction(
            self.ambient, tuple(Term(a * t.coeff, t.support) for t in self.terms)
        )

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return combine(1, self, 1, other)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return combine(1, self, -1, other)

    def __neg__(self) -> "StepFunction":
        return self.scale(-1)

    def to_json(self) -> dict:
        return {
            "ambient": self.ambient.to_json(),
            "terms": [
                {"coeff": fraction_to_text(t.coeff), "brick": t.support.to_json()}
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StepFunction":
        try:
            ambient = Brick.from_json(data["ambient"])
            terms = tuple(
                Term(parse_rational(t["coeff"]), Brick.from_json(t["brick"]))
                for t in data["terms"]
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"Malformed step function: {e}")
        return cls(ambient, terms)


def evaluate(g: StepFunction, x: Sequence) -> Fraction:
    return g.evaluate(x)


def integral(g: StepFunction) -> Fraction:
    return g.integral()


def canonicalize(g: StepFunction) -> StepFunction:
    return g.canonicalize()


def combine(a, g1: StepFunction, b, g2: StepFunction) -> StepFunction:
    if g1.ambient != g2.ambient:
        raise ValueError(f"Ambient mismatch: {g1.ambient} vs {g2.ambient}")
    a, b = to_fraction(a), to_fraction(b)
    terms = []
    if a != 0:
        terms.extend(Term(a * t.coeff, t.support) for t in g1.terms)
    if b != 0:
        terms.extend(Term(b * t.coeff, t.support) for t in g2.terms)
    return StepFunction(g1.ambient, tuple(terms))


def sup_diff_outside(
    g1: StepFunction, g2: StepFunction, exceptions: Iterable[Brick] = ()
) -> Fraction:
    """
    Exact sup of ``|g1 - g2|`` over the ambient brick minus the union of the
    exception bricks; 0 when nothing is left.
    """
    diff = combine(1, g1, -1, g2)
    clipped = []
    for brick in exceptions:
        piece = brick.intersect(diff.ambient)
        if piece is not None:
            clipped.append(piece)
    grid = diff.refinement(clipped)
    values = diff.values_on_grid(grid)
    covered = set()
    for brick in clipped:
        ranges = [grid.atom_range(k, factor) for k, factor in enumerate(brick.factors)]
        index_sets: List[Tuple[int, ...]] = [()]
        for axis_range in ranges:
            index_sets = [index + (i,) for index in index_sets for i in axis_range]
        covered.update(index_sets)
    return max(
        (abs(value) for index, value in values.items() if index not in covered),
        default=Fraction(0),
    )
