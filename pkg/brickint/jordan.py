import itertools
import logging

import mpmath

from dataclasses import dataclass
from fractions import Fraction
from tqdm.auto import tqdm
from typing import Callable, Dict, Iterable, Iterator, Optional, Sequence, Tuple, Union

from .geometry import Brick, Interval, uniform_tiling
from .utils import Point, to_fraction, to_mpf

__all__ = [
    "ExceptionCover",
    "ContentBounds",
    "NullCertification",
    "content_bounds",
    "certify_null",
    "boundary_cells",
]

logger = logging.getLogger(__name__)

Predicate = Callable[[Point], bool]


@dataclass(frozen=True)
class ExceptionCover:
    """Finitely many bricks whose union hides an exceptional set."""

    bricks: Tuple[Brick, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bricks", tuple(self.bricks))

    @property
    def total_volume(self) -> Fraction:
        return sum((brick.volume for brick in self.bricks), Fraction(0))

    def __len__(self) -> int:
        return len(self.bricks)

    def __iter__(self) -> Iterator[Brick]:
        return iter(self.bricks)

    def contains(self, x: Sequence) -> bool:
        return any(brick.contains(x) for brick in self.bricks)

    def interior_contains(self, x: Sequence) -> bool:
        return any(brick.interior_contains(x) for brick in self.bricks)

    def first_containing(self, x: Sequence) -> Optional[Brick]:
        for brick in self.bricks:
            if brick.contains(x):
                return brick
        return None

    def union(self, other: "ExceptionCover") -> "ExceptionCover":
        return ExceptionCover(self.bricks + other.bricks)

    def to_json(self) -> list:
        return [brick.to_json() for brick in self.bricks]

    @classmethod
    def from_json(cls, data: Iterable) -> "ExceptionCover":
        return cls(tuple(Brick.from_json(brick) for brick in data))


@dataclass(frozen=True)
class ContentBounds:
    inner: Fraction
    outer: Fraction
    depth: int

    @property
    def gap(self) -> Fraction:
        return self.outer - self.inner


@dataclass(frozen=True)
class NullCertification:
    """Outcome of ``certify_null``; ``cover`` is set only on success."""

    ok: bool
    cover: Optional[ExceptionCover]
    reason: str = ""


def _cell_samples(
    member: Predicate, T: Brick, depth: int, no_progress: bool = True
) -> Iterator[Tuple[Brick, bool, bool]]:
    """
    Yield ``(closed cell, any_true, all_true)`` for the dyadic cells at
    ``depth``, sampling the corners and the centre of each cell. Corner
    values are shared between neighbouring cells.
    """
    m = 2**depth
    tiling = uniform_tiling(T, m)
    axes = [
        [f.lo + f.length * i / m for i in range(m + 1)] for f in T.factors
    ]
    corner_cache: Dict[Tuple[int, ...], bool] = {}

    def corner(index: Tuple[int, ...]) -> bool:
        value = corner_cache.get(index)
        if value is None:
            value = bool(member(tuple(axis[i] for axis, i in zip(axes, index))))
            corner_cache[index] = value
        return value

    offsets = list(itertools.product((0, 1), repeat=T.dimension))
    for index, center in tqdm(
        zip(tiling.indices(), tiling.centers),
        total=m**T.dimension,
        disable=no_progress,
        desc=f"Sampling cells at depth {depth}",
    ):
        values = [corner(tuple(i + o for i, o in zip(index, offset))) for offset in offsets]
        values.append(bool(member(center)))
        cell = Brick(
            tuple(Interval(axis[i], axis[i + 1]) for axis, i in zip(axes, index))
        )
        yield cell, any(values), all(values)


def content_bounds(
    member: Predicate, T: Brick, depth: int, no_progress: bool = True
) -> ContentBounds:
    """
    Inner and outer Jordan content estimates of ``{x in T : member(x)}`` on the
    dyadic grid with ``2**depth`` cells per axis.

    A cell counts towards the inner content when every sample (corners and
    centre) satisfies ``member`` and towards the outer content when at least
    one does. This is exact for grid-aligned bricks and otherwise depends on
    the sampling resolution.
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    cell_volume = T.volume / 2 ** (depth * T.dimension)
    inner_count, outer_count = 0, 0
    for _, any_true, all_true in _cell_samples(member, T, depth, no_progress):
        inner_count += all_true
        outer_count += any_true
    bounds = ContentBounds(
        inner=inner_count * cell_volume, outer=outer_count * cell_volume, depth=depth
    )
    logger.debug(
        "content bounds at depth %d: [%s, %s]", depth, bounds.inner, bounds.outer
    )
    return bounds


def boundary_cells(
    member: Predicate, T: Brick, depth: int, no_progress: bool = True
) -> ExceptionCover:
    """Closed dyadic cells at ``depth`` holding both satisfying and failing samples."""
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    cells = [
        cell
        for cell, any_true, all_true in _cell_samples(member, T, depth, no_progress)
        if any_true and not all_true
    ]
    return ExceptionCover(tuple(cells))


def _root_floor(value: Fraction, n: int) -> Fraction:
    """Exact n-th root when it is rational, else a rational lower bound."""
    if n == 1:
        return value
    with mpmath.workdps(40):
        approx = mpmath.root(to_mpf(value), n)
    candidate = to_fraction(approx).limit_denominator(10**12)
    if candidate**n == value:
        return candidate
    side = to_fraction(approx, Fraction(1, 2**60))
    while side**n > value:
        side -= Fraction(1, 2**60)
    return side


def certify_null(
    points_or_cover: Union[Sequence[Sequence], ExceptionCover, Sequence[Brick]],
    epsilon,
) -> NullCertification:
    """
    Cover finitely many points by closed cubes of total volume below
    ``epsilon``, or check an existing cover against ``epsilon``.

    Points get cubes of volume at most ``epsilon / (2N)``. A cover (or a list
    of bricks) is certified iff its total volume is below ``epsilon``.
    Failure is reported as a value.
    """
    epsilon = to_fraction(epsilon)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    if isinstance(points_or_cover, ExceptionCover) or (
        len(points_or_cover) > 0 and isinstance(points_or_cover[0], Brick)
    ):
        cover = (
            points_or_cover
            if isinstance(points_or_cover, ExceptionCover)
            else ExceptionCover(tuple(points_or_cover))
        )
        if cover.total_volume < epsilon:
            return NullCertification(ok=True, cover=cover)
        return NullCertification(
            ok=False,
            cover=None,
            reason=f"cover volume {cover.total_volume} is not below {epsilon}",
        )

    points = [tuple(to_fraction(c) for c in point) for point in points_or_cover]
    if not points:
        return NullCertification(ok=True, cover=ExceptionCover(()))
    dimension = len(points[0])
    if any(len(point) != dimension for point in points):
        raise ValueError("Points have mixed dimensions")
    side = _root_floor(epsilon / (2 * len(points)), dimension)
    half = side / 2
    cover = ExceptionCover(
        tuple(Brick.closed([c - half for c in p], [c + half for c in p]) for p in points)
    )
    assert cover.total_volume < epsilon, "cube side rounding exceeded the budget"
    return NullCertification(ok=True, cover=cover)
