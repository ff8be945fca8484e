import itertools

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .utils import Point, fraction_to_text, parse_rational, to_fraction

__all__ = [
    "DimensionMismatchError",
    "OutsideAmbientError",
    "Interval",
    "Brick",
    "Grid",
    "UniformTiling",
    "volume",
    "intersect",
    "common_refinement",
    "uniform_tiling",
    "dyadic_cells",
    "max_norm_ball",
    "parse_brick",
]


class DimensionMismatchError(ValueError):
    pass


class OutsideAmbientError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    """
    Bounded interval with rational endpoints and open/closed flags.

    A degenerate interval ``lo == hi`` must be closed on both sides; any other
    empty interval is rejected.
    """

    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"Empty interval: lo={self.lo} > hi={self.hi}")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise ValueError(f"Empty interval at {self.lo}")

    @classmethod
    def point(cls, x) -> "Interval":
        return cls(x, x, True, True)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def interior_contains(self, x) -> bool:
        return self.lo < x < self.hi

    def closure(self) -> "Interval":
        return Interval(self.lo, self.hi, True, True)

    def is_subset(self, other: "Interval") -> bool:
        left_ok = other.lo < self.lo or (
            other.lo == self.lo and (other.lo_closed or not self.lo_closed)
        )
        right_ok = other.hi > self.hi or (
            other.hi == self.hi and (other.hi_closed or not self.hi_closed)
        )
        return left_ok and right_ok

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif self.lo < other.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif self.hi > other.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        if lo > hi or (lo == hi and not (lo_closed and hi_closed)):
            return None
        return Interval(lo, hi, lo_closed, hi_closed)

    def to_json(self) -> list:
        return [
            fraction_to_text(self.lo),
            fraction_to_text(self.hi),
            self.lo_closed,
            self.hi_closed,
        ]

    @classmethod
    def from_json(cls, data: Sequence) -> "Interval":
        if len(data) != 4:
            raise ValueError(f"Interval must have 4 entries, got {data!r}")
        lo, hi, lo_closed, hi_closed = data
        return cls(
            parse_rational(lo), parse_rational(hi), bool(lo_closed), bool(hi_closed)
        )

    def __str__(self) -> str:
        if self.is_degenerate:
            return "{" + fraction_to_text(self.lo) + "}"
        return "{}{},{}{}".format(
            "[" if self.lo_closed else "(",
            fraction_to_text(self.lo),
            fraction_to_text(self.hi),
            "]" if self.hi_closed else ")",
        )


@dataclass(frozen=True)
class Brick:
    """Product of ``n`` bounded intervals."""

    factors: Tuple[Interval, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if len(factors) < 1:
            raise ValueError("A brick needs at least one factor")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def closed(cls, lo: Sequence, hi: Sequence) -> "Brick":
        if len(lo) != len(hi):
            raise DimensionMismatchError("lo and hi differ in length")
        return cls(tuple(Interval(a, b) for a, b in zip(lo, hi)))

    @classmethod
    def unit(cls, dimension: int) -> "Brick":
        return cls.closed([0] * dimension, [1] * dimension)

    @classmethod
    def point(cls, x: Sequence) -> "Brick":
        return cls(tuple(Interval.point(c) for c in x))

    @property
    def dimension(self) -> int:
        return len(self.factors)

    @property
    def lo(self) -> Point:
        return tuple(f.lo for f in self.factors)

    @property
    def hi(self) -> Point:
        return tuple(f.hi for f in self.factors)

    @property
    def volume(self) -> Fraction:
        result = Fraction(1)
        for factor in self.factors:
            result *= factor.length
        return result

    @property
    def center(self) -> Point:
        return tuple(f.midpoint for f in self.factors)

    @property
    def half_widths(self) -> Point:
        return tuple(f.length / 2 for f in self.factors)

    @property
    def is_degenerate(self) -> bool:
        return any(f.is_degenerate for f in self.factors)

    @property
    def is_closed(self) -> bool:
        return all(f.lo_closed and f.hi_closed for f in self.factors)

    def check_dimension(self, other_dimension: int):
        if other_dimension != self.dimension:
            raise DimensionMismatchError(
                f"Expected dimension {self.dimension}, got {other_dimension}"
            )

    def contains(self, x: Sequence) -> bool:
        self.check_dimension(len(x))
        return all(f.contains(c) for f, c in zip(self.factors, x))

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def interior_contains(self, x: Sequence) -> bool:
        self.check_dimension(len(x))
        return all(f.interior_contains(c) for f, c in zip(self.factors, x))

    def closure(self) -> "Brick":
        return Brick(tuple(f.closure() for f in self.factors))

    def is_subset(self, other: "Brick") -> bool:
        other.check_dimension(self.dimension)
        return all(a.is_subset(b) for a, b in zip(self.factors, other.factors))

    def intersect(self, other: "Brick") -> Optional["Brick"]:
        self.check_dimension(other.dimension)
        factors = []
        for a, b in zip(self.factors, other.factors):
            factor = a.intersect(b)
            if factor is None:
                return None
            factors.append(factor)
        return Brick(tuple(factors))

    def bisect(self) -> List["Brick"]:
        """
        The 2^n closed children obtained by halving every axis of the closure,
        in axis-lexicographic order (first axis varies slowest).
        """
        halves = []
        for f in self.factors:
            mid = f.midpoint
            halves.append((Interval(f.lo, mid), Interval(mid, f.hi)))
        return [Brick(choice) for choice in itertools.product(*halves)]

    def to_json(self) -> list:
        return [f.to_json() for f in self.factors]

    @classmethod
    def from_json(cls, data: Sequence) -> "Brick":
        return cls(tuple(Interval.from_json(f) for f in data))

    def __str__(self) -> str:
        return "x".join(str(f) for f in self.factors)


def volume(brick: Brick) -> Fraction:
    return brick.volume


def intersect(first: Brick, second: Brick) -> Optional[Brick]:
    """Factor-wise intersection; None marks the empty brick."""
    return first.intersect(second)


@dataclass(frozen=True)
class Grid:
    """
    Product grid of per-axis atoms. The atoms of each axis partition the
    ambient factor pointwise, so the cells partition the ambient brick.
    """

    ambient: Brick
    axes: Tuple[Tuple[Interval, ...], ...]

    @cached_property
    def _starts(self) -> Tuple[Tuple[Fraction, ...], ...]:
        return tuple(tuple(atom.lo for atom in atoms) for atoms in self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(atoms) for atoms in self.axes)

    @property
    def num_cells(self) -> int:
        result = 1
        for count in self.shape:
            result *= count
        return result

    def cell(self, index: Sequence[int]) -> Brick:
        return Brick(tuple(atoms[i] for atoms, i in zip(self.axes, index)))

    def indices(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(*[range(count) for count in self.shape])

    def cells(self) -> Iterator[Brick]:
        for index in self.indices():
            yield self.cell(index)

    def representative(self, index: Sequence[int]) -> Point:
        return tuple(atoms[i].midpoint for atoms, i in zip(self.axes, index))

    def atom_range(self, axis: int, interval: Interval) -> range:
        """Indices of the atoms of ``axis`` whose union is ``interval``."""
        atoms = self.axes[axis]
        index = [
            i
            for i, atom in enumerate(atoms)
            if interval.contains(atom.midpoint) and atom.is_subset(interval)
        ]
        if not index:
            return range(0)
        return range(index[0], index[-1] + 1)

    def locate(self, x: Sequence) -> Tuple[int, ...]:
        if not self.ambient.contains(x):
            raise OutsideAmbientError(f"Point {x} outside {self.ambient}")
        index = []
        for atoms, starts, c in zip(self.axes, self._starts, x):
            i = max(bisect_right(starts, c) - 1, 0)
            while not atoms[i].contains(c):
                i -= 1
            index.append(i)
        return tuple(index)


def _axis_atoms(ambient: Interval, intervals: List[Interval]) -> Tuple[Interval, ...]:
    if ambient.is_degenerate:
        return (ambient,)
    need_left, need_right = set(), set()
    cuts = set()
    for interval in intervals:
        if interval.lo_closed:
            need_right.add(interval.lo)
        else:
            need_left.add(interval.lo)
        if interval.hi_closed:
            need_left.add(interval.hi)
        else:
            need_right.add(interval.hi)
        cuts.update((interval.lo, interval.hi))

    atoms = []
    current, current_closed = ambient.lo, ambient.lo_closed
    if ambient.lo_closed and ambient.lo in need_left:
        # an input opens at the ambient's closed end
        atoms.append(Interval.point(ambient.lo))
        current_closed = False
    for c in sorted(cut for cut in cuts if ambient.lo < cut < ambient.hi):
        left, right = c in need_left, c in need_right
        if left and right:
            atoms.append(Interval(current, c, current_closed, False))
            atoms.append(Interval.point(c))
            current_closed = False
        elif left:
            atoms.append(Interval(current, c, current_closed, True))
            current_closed = False
        else:
            atoms.append(Interval(current, c, current_closed, False))
            current_closed = True
    if ambient.hi_closed and ambient.hi in need_right:
        atoms.append(Interval(current, ambient.hi, current_closed, False))
        atoms.append(Interval.point(ambient.hi))
    else:
        atoms.append(Interval(current, ambient.hi, current_closed, ambient.hi_closed))
    return tuple(atoms)


def common_refinement(bricks: Iterable[Brick], ambient: Brick) -> Grid:
    """
    Grid of pairwise disjoint cells covering ``ambient`` such that every input
    brick is a union of cells.

    A cut point goes to the side its input endpoints ask for; a degenerate
    atom is emitted only when inputs disagree.
    """
    bricks = list(bricks)
    for brick in bricks:
        ambient.check_dimension(brick.dimension)
        if not brick.is_subset(ambient):
            raise OutsideAmbientError(f"Brick {brick} is not inside {ambient}")
    axes = tuple(
        _axis_atoms(factor, [brick.factors[k] for brick in bricks])
        for k, factor in enumerate(ambient.factors)
    )
    return Grid(ambient=ambient, axes=axes)


@dataclass(frozen=True)
class UniformTiling:
    """
    ``m^n`` translates of ``ambient / m``; half-open slabs except the last one
    per axis, so the cells partition the ambient brick pointwise.
    """

    ambient: Brick
    m: int
    slabs: Tuple[Tuple[Interval, ...], ...]

    @property
    def cell_volume(self) -> Fraction:
        return self.ambient.volume / self.m**self.ambient.dimension

    def cell(self, index: Sequence[int]) -> Brick:
        return Brick(tuple(slabs[i] for slabs, i in zip(self.slabs, index)))

    def indices(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(range(self.m), repeat=self.ambient.dimension)

    @cached_property
    def cells(self) -> List[Brick]:
        return [self.cell(index) for index in self.indices()]

    @cached_property
    def centers(self) -> List[Point]:
        mids = [[slab.midpoint for slab in slabs] for slabs in self.slabs]
        return [tuple(mid) for mid in itertools.product(*mids)]

    def locate(self, x: Sequence) -> Tuple[int, ...]:
        if not self.ambient.contains(x):
            raise OutsideAmbientError(f"Point {x} outside {self.ambient}")
        index = []
        for factor, c in zip(self.ambient.factors, x):
            i = int((Fraction(c) - factor.lo) * self.m // factor.length)
            index.append(min(i, self.m - 1))
        return tuple(index)


def uniform_tiling(T: Brick, m: int) -> UniformTiling:
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if T.volume == 0:
        raise ValueError(f"Cannot tile the degenerate brick {T}")
    slabs = []
    for factor in T.factors:
        width = factor.length / m
        cuts = [factor.lo + width * i for i in range(m)] + [factor.hi]
        axis = []
        for i in range(m):
            lo_closed = factor.lo_closed if i == 0 else True
            hi_closed = factor.hi_closed if i == m - 1 else False
            axis.append(Interval(cuts[i], cuts[i + 1], lo_closed, hi_closed))
        slabs.append(tuple(axis))
    return UniformTiling(ambient=T, m=m, slabs=tuple(slabs))


def dyadic_cells(T: Brick, depth: int) -> List[Brick]:
    """Closed cells of the grid with ``2**depth`` cells per axis, axis-lexicographic."""
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    m = 2**depth
    axes = []
    for factor in T.factors:
        cuts = [factor.lo + factor.length * i / m for i in range(m + 1)]
        axes.append([Interval(cuts[i], cuts[i + 1]) for i in range(m)])
    return [Brick(choice) for choice in itertools.product(*axes)]


def max_norm_ball(x: Sequence, r, T: Brick) -> Brick:
    """Open max-norm ball ``B(x, r)`` clipped to ``T``."""
    r = to_fraction(r)
    x = tuple(to_fraction(c) for c in x)
    if r <= 0:
        raise ValueError(f"Radius must be positive, got {r}")
    if not T.contains(x):
        raise OutsideAmbientError(f"Centre {x} outside {T}")
    ball = Brick(tuple(Interval(c - r, c + r, False, False) for c in x))
    # x lies in both, so the intersection is never empty
    return ball.intersect(T)


def parse_brick(text: str) -> Brick:
    """
    Parse ``[0,1]x[0,1/2)`` style text (factors joined by ``x``); a bare
    ``[a,b]`` is one-dimensional.
    """
    text = text.strip()
    factors = []
    position = 0
    while position < len(text):
        opening = text[position]
        if opening not in "[(":
            raise ValueError(f"Invalid brick {text!r} at position {position + 1}")
        end = min(
            (i for i in (text.find("]", position), text.find(")", position)) if i >= 0),
            default=-1,
        )
        if end < 0:
            raise ValueError(f"Unterminated interval in brick {text!r}")
        body = text[position + 1 : end].split(",")
        if len(body) != 2:
            raise ValueError(f"Invalid interval {text[position:end + 1]!r}")
        factors.append(
            Interval(
                parse_rational(body[0]),
                parse_rational(body[1]),
                opening == "[",
                text[end] == "]",
            )
        )
        position = end + 1
        if position < len(text):
            if text[position] not in "x*":
                raise ValueError(f"Expected 'x' between factors in {text!r}")
            position += 1
    if not factors:
        raise ValueError("Empty brick description")
    return Brick(tuple(factors))
