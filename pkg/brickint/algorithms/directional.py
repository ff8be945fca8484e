import itertools
import logging
import math

import torch

torch.set_default_dtype(torch.float64)

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from tqdm.auto import tqdm
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..geometry import Brick, Interval, dyadic_cells
from ..jordan import ExceptionCover
from ..utils import (
    Point,
    fraction_to_text,
    to_float,
    to_fraction,
    unit_latin_hypercube,
    unit_lattice,
)

__all__ = [
    "DEFAULT_RADII",
    "Direction",
    "Kind",
    "Verdict",
    "DirectionalConfig",
    "RadiusStats",
    "DirectionalLimit",
    "Classification",
    "DepthRow",
    "IntegrabilityDecision",
    "all_directions",
    "orthant_directions",
    "subbrick",
    "directional_limit",
    "classify",
    "dis2_cover",
    "decide_k_integrability",
]

logger = logging.getLogger(__name__)

Oracle = Callable[[Point], object]

DEFAULT_RADII = tuple(Fraction(1, 2**k) for k in range(3, 13))


@dataclass(frozen=True)
class Direction:
    """A nonzero vector of ``{-1, 0, 1}^n``."""

    components: Tuple[int, ...]

    def __post_init__(self):
        components = tuple(int(c) for c in self.components)
        if any(c not in (-1, 0, 1) for c in components):
            raise ValueError(f"Direction components must be -1, 0 or 1: {components}")
        if not any(components):
            raise ValueError("The zero vector is not a direction")
        object.__setattr__(self, "components", components)

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def is_orthant(self) -> bool:
        return all(self.components)

    @property
    def active_axes(self) -> Tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.components) if c)

    def __getitem__(self, k: int) -> int:
        return self.components[k]

    def __str__(self) -> str:
        return "(" + ",".join({-1: "-1", 0: "0", 1: "+1"}[c] for c in self.components) + ")"

    def to_json(self) -> list:
        return list(self.components)


@lru_cache(maxsize=16)
def all_directions(n: int) -> Tuple[Direction, ...]:
    """The ``3**n - 1`` directions, lexicographic in ``(-1, 0, 1)``."""
    return tuple(
        Direction(c) for c in itertools.product((-1, 0, 1), repeat=n) if any(c)
    )


@lru_cache(maxsize=16)
def orthant_directions(n: int) -> Tuple[Direction, ...]:
    return tuple(Direction(c) for c in itertools.product((-1, 1), repeat=n))


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    FIRST_KIND = "first_kind"
    SECOND_KIND_SUSPECT = "second_kind_suspect"
    UNDETERMINED = "undetermined"


class Verdict(str, Enum):
    LIKELY_INTEGRABLE = "likely_integrable"
    NOT_INTEGRABLE_EVIDENCE = "not_integrable_evidence"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class DirectionalConfig:
    """
    Resolution of the directional tests. ``radii`` is a strictly decreasing
    schedule; ``samples`` is the number of points per shell; oscillations
    below ``tol`` count as settled.

    Cell scans also compare the sampled variation of ``f`` along axis lines
    at ``samples`` and ``samples * refinement`` points; growth by at least
    ``variation_growth`` marks a cell.
    """

    radii: Tuple[Fraction, ...] = DEFAULT_RADII
    samples: int = 64
    tol: Fraction = Fraction(1, 1000)
    shrink_ratio: Fraction = Fraction(3, 4)
    refinement: int = 16
    variation_growth: Fraction = Fraction(3)
    seed: int = 0

    def __post_init__(self):
        radii = tuple(to_fraction(r) for r in self.radii)
        if not radii:
            raise ValueError("Empty radius schedule")
        if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
            raise ValueError("Radii must be positive and strictly decreasing")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "tol", to_fraction(self.tol))
        object.__setattr__(self, "shrink_ratio", to_fraction(self.shrink_ratio))
        object.__setattr__(self, "variation_growth", to_fraction(self.variation_growth))
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        if not 0 < self.shrink_ratio <= 1:
            raise ValueError(f"shrink_ratio must lie in (0, 1], got {self.shrink_ratio}")
        if self.samples < 2:
            raise ValueError(f"Need at least two samples, got {self.samples}")
        if self.refinement < 2:
            raise ValueError(f"refinement must be at least 2, got {self.refinement}")
        if self.variation_growth <= 1:
            raise ValueError(f"variation_growth must exceed 1, got {self.variation_growth}")

    def with_radii(self, radii: Sequence) -> "DirectionalConfig":
        return replace(self, radii=tuple(radii))

    def to_json(self) -> dict:
        return {
            "radii": [fraction_to_text(r) for r in self.radii],
            "samples": self.samples,
            "tol": float(self.tol),
            "shrink_ratio": fraction_to_text(self.shrink_ratio),
            "refinement": self.refinement,
            "variation_growth": fraction_to_text(self.variation_growth),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RadiusStats:
    radius: Fraction
    count: int
    min: float
    max: float
    mean: float

    @property
    def oscillation(self) -> float:
        return self.max - self.min

    def to_json(self) -> dict:
        return {
            "radius": fraction_to_text(self.radius),
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "oscillation": self.oscillation,
        }


@dataclass(frozen=True)
class DirectionalLimit:
    """
    Limit estimate in one direction. ``value`` is None when the samples give
    no limit; ``shrinking`` tells whether the oscillation still decreased
    along the schedule.
    """

    direction: Direction
    value: Optional[float]
    oscillation: float
    shrinking: bool
    table: Tuple[RadiusStats, ...]

    @property
    def exists(self) -> bool:
        return self.value is not None

    def to_json(self) -> dict:
        return {
            "direction": self.direction.to_json(),
            "value": self.value,
            "oscillation": self.oscillation,
            "shrinking": self.shrinking,
            "table": [row.to_json() for row in self.table],
        }


@dataclass(frozen=True)
class Classification:
    point: Point
    kind: Kind
    value: Optional[float]
    limits: Tuple[DirectionalLimit, ...]
    config: DirectionalConfig

    @property
    def per_direction(self) -> Dict[Direction, DirectionalLimit]:
        return {limit.direction: limit for limit in self.limits}

    def to_json(self) -> dict:
        return {
            "point": [fraction_to_text(c) for c in self.point],
            "kind": self.kind.value,
            "value": self.value,
            "directions": [limit.to_json() for limit in self.limits],
            "resolution": self.config.to_json(),
        }


def subbrick(T: Brick, x: Sequence, alpha: Direction) -> Brick:
    """
    ``T_{x,alpha}``: per axis ``[a_k, x_k)``, ``{x_k}`` or ``(x_k, b_k]`` as
    ``alpha_k`` is -1, 0 or 1. Together with ``{x}`` these bricks partition
    ``T``.
    """
    x = tuple(to_fraction(c) for c in x)
    T.check_dimension(len(x))
    T.check_dimension(alpha.dimension)
    if not T.interior_contains(x):
        raise ValueError(f"{x} is not an interior point of {T}")
    factors = []
    for factor, c, a in zip(T.factors, x, alpha.components):
        if a < 0:
            factors.append(Interval(factor.lo, c, factor.lo_closed, False))
        elif a == 0:
            factors.append(Interval.point(c))
        else:
            factors.append(Interval(c, factor.hi, False, factor.hi_closed))
    return Brick(tuple(factors))


def _lattice_size(dimension: int, count: int) -> int:
    g = max(1, int(math.floor(count ** (1.0 / dimension) + 1e-9)))
    while g > 1 and g**dimension > count:
        g -= 1
    return g


@lru_cache(maxsize=256)
def _unit_offsets(dimension: int, samples: int, seed: int, centered: bool) -> Tuple[Point, ...]:
    """Half the budget on a lattice, the rest on Latin-hypercube points."""
    lattice = unit_lattice(dimension, _lattice_size(dimension, max(1, samples // 2)), centered)
    scattered = unit_latin_hypercube(dimension, max(1, samples - len(lattice)), seed)
    return lattice + scattered


def _shell_points(
    T: Brick, x: Point, alpha: Direction, r: Fraction, samples: int, seed: int
) -> List[Point]:
    axes = alpha.active_axes
    points = []
    for unit in _unit_offsets(len(axes), samples, seed, False):
        y = list(x)
        for k, u in zip(axes, unit):
            y[k] = x[k] + alpha[k] * r * u
        if T.contains(y):
            points.append(tuple(y))
    return points


def _stats(radius: Fraction, values: List[float]) -> RadiusStats:
    tensor = torch.tensor(values)
    return RadiusStats(
        radius=radius,
        count=len(values),
        min=tensor.min().item(),
        max=tensor.max().item(),
        mean=tensor.mean().item(),
    )


def _summarise(
    alpha: Direction, rows: List[RadiusStats], config: DirectionalConfig
) -> DirectionalLimit:
    if not rows:
        # nothing of the sub-brick lies within the schedule's balls
        return DirectionalLimit(alpha, None, 0.0, True, ())
    tol = float(config.tol)
    final = rows[-1]
    oscillation = final.oscillation
    exists = oscillation < tol and (
        len(rows) < 2 or abs(final.mean - rows[-2].mean) < tol
    )
    earlier = max((row.oscillation for row in rows[:-1]), default=None)
    shrinking = exists or (
        earlier is not None and oscillation < float(config.shrink_ratio) * earlier
    )
    return DirectionalLimit(
        direction=alpha,
        value=final.mean if exists else None,
        oscillation=oscillation,
        shrinking=shrinking,
        table=tuple(rows),
    )


def directional_limit(
    f: Oracle,
    x: Sequence,
    alpha: Direction,
    T: Brick,
    config: Optional[DirectionalConfig] = None,
) -> DirectionalLimit:
    """
    Sample ``f`` on ``T_{x,alpha} ∩ B(x, r)`` along the radius schedule.

    The limit exists when the oscillation at the smallest radius is below
    ``tol`` and the last two means agree within ``tol``. Zero components of
    ``alpha`` stay fixed, so thin sub-bricks are sampled on their slice.
    Oracle failures propagate.
    """
    config = config or DirectionalConfig()
    x = tuple(to_fraction(c) for c in x)
    if not T.interior_contains(x):
        raise ValueError(f"{x} is not an interior point of {T}")
    rows = []
    for r in config.radii:
        points = _shell_points(T, x, alpha, r, config.samples, config.seed)
        if points:
            rows.append(_stats(r, [to_float(f(p)) for p in points]))
    return _summarise(alpha, rows, config)


def classify(
    f: Oracle,
    x: Sequence,
    T: Brick,
    config: Optional[DirectionalConfig] = None,
) -> Classification:
    config = config or DirectionalConfig()
    x = tuple(to_fraction(c) for c in x)
    limits = tuple(
        directional_limit(f, x, alpha, T, config) for alpha in all_directions(T.dimension)
    )
    try:
        value = to_float(f(x))
    except (ArithmeticError, ValueError):
        value = None

    tol = float(config.tol)
    if any(not limit.exists and not limit.shrinking for limit in limits):
        kind = Kind.SECOND_KIND_SUSPECT
    elif any(not limit.exists for limit in limits):
        kind = Kind.UNDETERMINED
    elif value is not None and all(
        limit.value is None or abs(limit.value - value) < tol for limit in limits
    ):
        kind = Kind.CONTINUOUS
    else:
        kind = Kind.FIRST_KIND
    logger.debug("classified %s as %s", tuple(float(c) for c in x), kind.value)
    return Classification(point=x, kind=kind, value=value, limits=limits, config=config)


def _line_values(f: Oracle, cell: Brick, axis: int, count: int) -> torch.Tensor:
    """``f`` at ``count`` evenly spaced interior points of the axis line through the centre."""
    factor = cell.factors[axis]
    center = cell.center
    points = []
    for i in range(1, count + 1):
        x = list(center)
        x[axis] = factor.lo + factor.length * Fraction(i, count + 1)
        points.append(tuple(x))
    return torch.tensor([to_float(f(p)) for p in points])


def _variation(values: torch.Tensor) -> float:
    return torch.diff(values).abs().sum().item()


def _variation_grows(f: Oracle, cell: Brick, config: DirectionalConfig) -> Tuple[bool, float]:
    """
    Whether the sampled variation along some axis line keeps growing under
    refinement, and the largest ``|f|`` seen. Jumps and continuous functions
    of bounded variation keep it stable.
    """
    grows, largest = False, 0.0
    for axis in range(cell.dimension):
        coarse = _line_values(f, cell, axis, config.samples)
        fine = _line_values(f, cell, axis, config.samples * config.refinement)
        largest = max(largest, coarse.abs().max().item(), fine.abs().max().item())
        fine_variation = _variation(fine)
        if fine_variation >= float(config.tol) and fine_variation >= float(
            config.variation_growth
        ) * _variation(coarse):
            grows = True
    return grows, largest


def _judge_cell(
    f: Oracle, T: Brick, cell: Brick, config: DirectionalConfig
) -> Tuple[bool, float]:
    h = max(cell.half_widths)
    # radii stay below h so that nearby simple rationals drop out of the shells
    local = config.with_radii(h / 2**j for j in range(1, 5))
    points = [cell.center]
    hints = getattr(f, "probe_points", None)
    if hints is not None:
        points.extend(
            p for p in hints(cell) if cell.interior_contains(p) and T.interior_contains(p)
        )
    suspect = any(
        classify(f, p, T, local).kind is Kind.SECOND_KIND_SUSPECT for p in points
    )
    grows, largest = _variation_grows(f, cell, config)
    return suspect or grows, largest


def _scan(
    f: Oracle,
    T: Brick,
    depth: int,
    config: DirectionalConfig,
    bound: Optional[Fraction],
    no_progress: bool,
) -> Tuple[List[Brick], List[Brick]]:
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    flagged, unbounded = [], []
    for cell in tqdm(dyadic_cells(T, depth), disable=no_progress, desc=f"Scanning depth {depth}"):
        bad, largest = _judge_cell(f, T, cell, config)
        if bad:
            flagged.append(cell)
        if bound is not None and largest > float(bound):
            unbounded.append(cell)
    return flagged, unbounded


def dis2_cover(
    f: Oracle,
    T: Brick,
    depth: int,
    config: Optional[DirectionalConfig] = None,
    no_progress: bool = True,
) -> ExceptionCover:
    """
    Closed dyadic cells at ``depth`` suspected to hold a discontinuity of the
    second kind.

    A cell is reported when its centre (or a probe point the oracle suggests
    for it) is classified ``second_kind_suspect`` at radii ``h/2 .. h/16``
    with ``h`` the cell's largest half-width, or when the sampled variation
    along an axis line through its centre grows under refinement.
    """
    config = config or DirectionalConfig()
    flagged, _ = _scan(f, T, depth, config, None, no_progress)
    cover = ExceptionCover(tuple(flagged))
    logger.debug(
        "depth %d: %d suspect cells, volume %s", depth, len(cover), float(cover.total_volume)
    )
    return cover


@dataclass(frozen=True)
class DepthRow:
    depth: int
    dis2_volume: Fraction
    unbounded_volume: Fraction
    fraction: Fraction

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "dis2_volume": float(self.dis2_volume),
            "unbounded_volume": float(self.unbounded_volume),
            "fraction": float(self.fraction),
        }


@dataclass(frozen=True)
class IntegrabilityDecision:
    verdict: Verdict
    rows: Tuple[DepthRow, ...]
    cover: ExceptionCover
    floor: Fraction
    config: DirectionalConfig

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "rows": [row.to_json() for row in self.rows],
            "cover_volume": float(self.cover.total_volume),
            "cover_cells": len(self.cover),
            "floor": float(self.floor),
            "resolution": self.config.to_json(),
        }


def decide_k_integrability(
    f: Oracle,
    T: Brick,
    depth_schedule: Sequence[int] = (4, 5, 6),
    C=None,
    config: Optional[DirectionalConfig] = None,
    floor=None,
    no_progress: bool = True,
) -> IntegrabilityDecision:
    """
    Finite-resolution reading of the K-integrability criterion.

    At each depth the bad cells are the ``dis2_cover`` cells together with
    the cells where a sample exceeds ``C`` in absolute value. Evidence of
    non-integrability is a bad volume that never drops below ``floor``
    (default a tenth of ``λ(T)``); likely integrability is a bad volume that
    does not grow, ends below ``floor`` and either vanishes or decreased.
    """
    config = config or DirectionalConfig()
    depths = list(depth_schedule)
    if not depths or depths != sorted(set(depths)):
        raise ValueError(f"Depth schedule must be nonempty and strictly increasing: {depths}")
    bound = None if C is None else to_fraction(C)
    volume = T.volume
    if volume == 0:
        raise ValueError(f"Ambient brick {T} has zero volume")
    floor = volume / 10 if floor is None else to_fraction(floor)

    rows, cover = [], ExceptionCover(())
    for depth in depths:
        flagged, unbounded = _scan(f, T, depth, config, bound, no_progress)
        bad = list(dict.fromkeys(flagged + unbounded))
        cover = ExceptionCover(tuple(bad))
        rows.append(
            DepthRow(
                depth=depth,
                dis2_volume=sum((c.volume for c in flagged), Fraction(0)),
                unbounded_volume=sum((c.volume for c in unbounded), Fraction(0)),
                fraction=cover.total_volume / volume,
            )
        )
        logger.debug("depth %d: bad fraction %.4f", depth, float(rows[-1].fraction))

    fractions = [row.fraction for row in rows]
    floor_fraction = floor / volume
    if min(fractions) >= floor_fraction:
        verdict = Verdict.NOT_INTEGRABLE_EVIDENCE
    elif (
        all(b <= a for a, b in zip(fractions, fractions[1:]))
        and fractions[-1] <= floor_fraction
        and (fractions[-1] == 0 or fractions[-1] < fractions[0])
    ):
        verdict = Verdict.LIKELY_INTEGRABLE
    else:
        verdict = Verdict.UNDETERMINED
        logger.warning("undetermined at depths %s: fractions %s", depths, [float(x) for x in fractions])
    logger.info("verdict %s", verdict.value)
    return IntegrabilityDecision(
        verdict=verdict, rows=tuple(rows), cover=cover, floor=floor, config=config
    )
