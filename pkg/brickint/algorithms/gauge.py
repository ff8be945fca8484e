import logging

from dataclasses import dataclass
from fractions import Fraction
from tqdm.auto import tqdm
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..geometry import Brick, Interval
from ..jordan import ExceptionCover
from ..stepfn import StepFunction, Term
from ..utils import (
    Point,
    atomic_write,
    fraction_to_text,
    get_precision,
    to_fraction,
)
from .directional import (
    DirectionalConfig,
    DirectionalLimit,
    all_directions,
    directional_limit,
    subbrick,
)

__all__ = [
    "PartitionDepthError",
    "SecondKindOutsideCoverError",
    "Gauge",
    "TaggedCell",
    "DottedPartition",
    "FinenessVerdict",
    "AdditiveSetFunction",
    "AuditVerdict",
    "cousin_partition",
    "verify_fine",
    "cover_ball_radius",
    "sufficiency_step",
    "zero_derivative_audit",
]

logger = logging.getLogger(__name__)

LimitEstimator = Callable[..., DirectionalLimit]


class PartitionDepthError(ValueError):
    """The gauge shrinks faster than the bisection budget allows."""


class SecondKindOutsideCoverError(ValueError):
    def __init__(self, point: Point, direction):
        self.point = point
        self.direction = direction
        super().__init__(
            f"No directional limit at {tuple(str(c) for c in point)} in direction "
            f"{direction}: a second-kind point lies outside the cover"
        )


class Gauge:
    """
    A positive radius function on the ambient brick. Values are cached per
    point, so expensive radii (directional moduli) are computed once.
    """

    def __init__(self, radius: Callable[[Point], object]):
        self._radius = radius
        self._cache: Dict[Point, Fraction] = {}

    @classmethod
    def constant(cls, r) -> "Gauge":
        r = to_fraction(r)
        return cls(lambda x: r)

    def __call__(self, x: Sequence) -> Fraction:
        key = tuple(to_fraction(c) for c in x)
        value = self._cache.get(key)
        if value is None:
            value = to_fraction(self._radius(key))
            if value <= 0:
                raise ValueError(f"Gauge must be positive, got {value} at {key}")
            self._cache[key] = value
        return value


@dataclass(frozen=True)
class TaggedCell:
    cell: Brick
    tag: Point
    radius: Fraction


@dataclass(frozen=True)
class DottedPartition:
    ambient: Brick
    pairs: Tuple[TaggedCell, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def cells(self) -> Tuple[Brick, ...]:
        return tuple(pair.cell for pair in self.pairs)

    @property
    def tags(self) -> Tuple[Point, ...]:
        return tuple(pair.tag for pair in self.pairs)

    def to_csv(self, path: Optional[str] = None) -> str:
        """One row per cell: lower corner, upper corner, tag, gauge at the tag."""
        n = self.ambient.dimension
        header = (
            [f"lo_{k}" for k in range(n)]
            + [f"hi_{k}" for k in range(n)]
            + [f"tag_{k}" for k in range(n)]
            + ["gauge_at_tag"]
        )
        lines = [",".join(header)]
        for pair in self.pairs:
            row = list(pair.cell.lo) + list(pair.cell.hi) + list(pair.tag) + [pair.radius]
            lines.append(",".join(fraction_to_text(v) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            atomic_write(path, text)
        return text


@dataclass(frozen=True)
class FinenessVerdict:
    ok: bool
    bullet: Optional[int] = None
    index: Optional[int] = None
    reason: str = ""

    def to_json(self) -> dict:
        return {"ok": self.ok, "bullet": self.bullet, "index": self.index, "reason": self.reason}


def _corners(cell: Brick) -> List[Point]:
    corners = [()]
    for factor in cell.factors:
        corners = [c + (v,) for c in corners for v in (factor.lo, factor.hi)]
    return corners


def _fine_tag(
    gauge: Gauge, T: Brick, cell: Brick, corner_tags: bool
) -> Optional[Tuple[Point, Fraction]]:
    center = cell.center
    r = gauge(center)
    if max(cell.half_widths) < r:
        return center, r
    if corner_tags:
        width = max(f.length for f in cell.factors)
        for corner in _corners(cell):
            if not T.interior_contains(corner):
                continue
            r = gauge(corner)
            if width < r:
                return corner, r
    return None


def cousin_partition(
    gauge: Gauge,
    T: Brick,
    depth_limit: int = 16,
    corner_tags: bool = False,
    no_progress: bool = True,
) -> DottedPartition:
    """
    δ-fine dotted partition of ``T`` by repeated bisection.

    A closed cell is kept, tagged at its centre, when it fits in the open ball
    of radius ``gauge(centre)``; otherwise all axes are halved. With
    ``corner_tags`` a cell may instead be tagged at a corner interior to
    ``T`` whose ball holds it. Cells come out depth-first in axis-lexicographic
    order.
    """
    if depth_limit < 1:
        raise ValueError(f"depth_limit must be at least 1, got {depth_limit}")
    pairs: List[TaggedCell] = []
    progress = tqdm(disable=no_progress, desc="Partitioning")

    def visit(cell: Brick, depth: int):
        tagged = _fine_tag(gauge, T, cell, corner_tags)
        if tagged is not None:
            pairs.append(TaggedCell(cell, *tagged))
            progress.update(1)
            return
        if depth >= depth_limit:
            raise PartitionDepthError(
                f"Cell {cell} still too coarse for the gauge at depth {depth_limit}"
            )
        for child in cell.bisect():
            visit(child, depth + 1)

    try:
        visit(T.closure(), 0)
    finally:
        progress.close()
    logger.debug("partition of %s into %d cells", T, len(pairs))
    return DottedPartition(ambient=T, pairs=tuple(pairs))


def _interiors_overlap(a: Brick, b: Brick) -> bool:
    return all(
        max(fa.lo, fb.lo) < min(fa.hi, fb.hi) for fa, fb in zip(a.factors, b.factors)
    )


def verify_fine(p: DottedPartition, gauge: Gauge, T: Brick) -> FinenessVerdict:
    """
    Check, in order: (1) cells are closed bricks inside ``T``; (2) their
    interiors are pairwise disjoint; (3) they fill ``T``; (4) each tag lies
    in its cell and the cell lies in the open ball around the tag. Reports
    the first violation.
    """
    closure = T.closure()
    for i, pair in enumerate(p.pairs):
        if not pair.cell.is_closed or not pair.cell.is_subset(closure):
            return FinenessVerdict(False, 1, i, f"cell {pair.cell} is not a closed brick inside {T}")

    order = sorted(range(len(p.pairs)), key=lambda i: p.pairs[i].cell.lo[0])
    for a, i in enumerate(order):
        first = p.pairs[i].cell
        for j in order[a + 1 :]:
            second = p.pairs[j].cell
            if second.lo[0] >= first.hi[0]:
                break
            if _interiors_overlap(first, second):
                return FinenessVerdict(
                    False, 2, max(i, j), f"cells {min(i, j)} and {max(i, j)} overlap"
                )

    total = sum((pair.cell.volume for pair in p.pairs), Fraction(0))
    if total != closure.volume:
        return FinenessVerdict(False, 3, None, f"cells cover volume {total} of {closure.volume}")

    for i, pair in enumerate(p.pairs):
        tag = tuple(to_fraction(c) for c in pair.tag)
        if not pair.cell.contains(tag):
            return FinenessVerdict(False, 4, i, f"tag {tag} outside its cell")
        r = gauge(tag)
        reach = max(max(c - f.lo, f.hi - c) for f, c in zip(pair.cell.factors, tag))
        if reach >= r:
            return FinenessVerdict(
                False, 4, i, f"cell reaches {reach} from its tag, gauge is {r}"
            )
    return FinenessVerdict(True)


def cover_ball_radius(cover: ExceptionCover, x: Sequence) -> Fraction:
    """Largest ``r`` with ``B(x, r)`` inside one cover brick."""
    x = tuple(to_fraction(c) for c in x)
    radii = [
        min(min(c - f.lo, f.hi - c) for f, c in zip(brick.factors, x))
        for brick in cover
        if brick.interior_contains(x)
    ]
    if not radii:
        raise ValueError(f"{x} is not interior to the cover")
    return max(radii)


def _modulus_radius(limit: DirectionalLimit, budget: float) -> Fraction:
    """Largest tabulated radius below which every row stays within ``budget`` of the limit."""
    radius = None
    for row in reversed(limit.table):
        if max(abs(row.max - limit.value), abs(row.min - limit.value)) > budget:
            break
        radius = row.radius
    return limit.table[-1].radius if radius is None else radius


def _owned(cell: Brick, T: Brick) -> Brick:
    # faces shared with earlier cells belong to them: (lo, hi] per axis
    factors = []
    for f, t in zip(cell.factors, T.factors):
        lo_closed = t.lo_closed if f.lo == t.lo else False
        hi_closed = t.hi_closed if f.hi == t.hi else True
        factors.append(Interval(f.lo, f.hi, lo_closed, hi_closed))
    return Brick(tuple(factors))


def sufficiency_step(
    f: Callable[[Point], object],
    cover: ExceptionCover,
    C,
    m: int,
    limit_estimator: Optional[LimitEstimator] = None,
    *,
    ambient: Optional[Brick] = None,
    config: Optional[DirectionalConfig] = None,
    depth_limit: int = 16,
    precision: Optional[Fraction] = None,
    no_progress: bool = True,
) -> StepFunction:
    """
    Step function within ``1/m`` of ``f`` off ``cover``.

    The gauge is the ball-inside-cover radius on the cover and, off it, the
    smallest over all directions of the radius within which the sampled
    values stay within ``1/(2m)`` of the directional limit. On each cell of
    the resulting partition ``g_m`` is 0 when the tag is in the cover, and
    otherwise ``f`` at the tag and the directional limit on each sub-brick
    around it. A point on a shared face belongs to the first cell holding it.
    """
    T = ambient if ambient is not None else f.ambient
    C = to_fraction(C)
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    config = config or DirectionalConfig()
    estimator = limit_estimator or directional_limit
    precision = get_precision() if precision is None else to_fraction(precision)
    budget = 1.0 / (2 * m)
    directions = all_directions(T.dimension)
    limits: Dict[Point, Dict] = {}

    def directional_limits(x: Point) -> Dict:
        if x not in limits:
            found = {}
            for alpha in directions:
                limit = estimator(f, x, alpha, T, config)
                if not limit.exists:
                    raise SecondKindOutsideCoverError(x, alpha)
                found[alpha] = limit
            limits[x] = found
        return limits[x]

    def radius(x: Point) -> Fraction:
        if cover.interior_contains(x):
            return cover_ball_radius(cover, x)
        return min(_modulus_radius(l, budget) for l in directional_limits(x).values())

    partition = cousin_partition(
        Gauge(radius), T, depth_limit=depth_limit, corner_tags=True, no_progress=no_progress
    )

    terms: List[Term] = []
    for pair in tqdm(partition, disable=no_progress, desc=f"Assembling g_{m}"):
        tag = pair.tag
        if cover.interior_contains(tag):
            continue
        owned = _owned(pair.cell, T)
        value = to_fraction(f(tag), precision)
        if abs(value) > C:
            logger.warning("|f| = %s exceeds C = %s off the cover", float(value), float(C))
        if owned.contains(tag) and value != 0:
            terms.append(Term(value, Brick.point(tag)))
        for alpha, limit in directional_limits(tag).items():
            piece = owned.intersect(subbrick(T, tag, alpha))
            coeff = to_fraction(limit.value, precision)
            if piece is not None and coeff != 0:
                terms.append(Term(coeff, piece))
    logger.debug("g_%d has %d terms on %d cells", m, len(terms), len(partition))
    return StepFunction(T, tuple(terms))


@dataclass(frozen=True)
class AdditiveSetFunction:
    """A set function on closed sub-bricks with ``|value(S)| <= L λ(S)``."""

    value: Callable[[Brick], object]
    lipschitz_L: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lipschitz_L", to_fraction(self.lipschitz_L))
        if self.lipschitz_L < 0:
            raise ValueError(f"Lipschitz constant must be nonnegative, got {self.lipschitz_L}")

    def __call__(self, S: Brick) -> Fraction:
        return to_fraction(self.value(S))


@dataclass(frozen=True)
class AuditVerdict:
    certified: bool
    in_cover_sum: Fraction
    off_cover_sum: Fraction
    bound: Fraction
    cells: int

    def to_json(self) -> dict:
        return {
            "certified": self.certified,
            "in_cover_sum": fraction_to_text(self.in_cover_sum),
            "off_cover_sum": fraction_to_text(self.off_cover_sum),
            "bound": fraction_to_text(self.bound),
            "cells": self.cells,
        }


def zero_derivative_audit(
    phi: AdditiveSetFunction,
    null_cover: Union[ExceptionCover, Sequence[Brick]],
    S: Brick,
    c,
    deriv_radius: Callable[[Point], object],
    depth_limit: int = 16,
    no_progress: bool = True,
) -> AuditVerdict:
    """
    Try to certify ``|phi(S)| < c``.

    ``deriv_radius(x)`` must be a radius within which ``|phi(Q)|`` stays
    below ``c λ(Q) / (2 λ(S))`` for bricks ``Q`` around ``x``. Cells tagged
    in the null cover sum to at most ``L`` times the cover volume; the
    others are summed directly. The bound holds when both sums stay below
    ``c/2``.
    """
    c = to_fraction(c)
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    cover = null_cover if isinstance(null_cover, ExceptionCover) else ExceptionCover(tuple(null_cover))
    L = phi.lipschitz_L
    if L > 0 and cover.total_volume >= c / (2 * L):
        raise ValueError(
            f"Cover volume {cover.total_volume} is not below c/(2L) = {c / (2 * L)}"
        )

    def radius(x: Point) -> Fraction:
        if cover.interior_contains(x):
            return cover_ball_radius(cover, x)
        return to_fraction(deriv_radius(x))

    partition = cousin_partition(
        Gauge(radius), S, depth_limit=depth_limit, corner_tags=True, no_progress=no_progress
    )
    in_sum, off_sum = Fraction(0), Fraction(0)
    for pair in tqdm(partition, disable=no_progress, desc="Auditing"):
        value = abs(phi(pair.cell))
        if cover.interior_contains(pair.tag):
            in_sum += value
        else:
            off_sum += value
    certified = in_sum < c / 2 and off_sum < c / 2
    logger.info(
        "audit over %d cells: in-cover %s, off-cover %s, certified=%s",
        len(partition),
        float(in_sum),
        float(off_sum),
        certified,
    )
    return AuditVerdict(
        certified=certified,
        in_cover_sum=in_sum,
        off_cover_sum=off_sum,
        bound=c,
        cells=len(partition),
    )
