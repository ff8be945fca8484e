import logging
import math

from dataclasses import dataclass, replace
from fractions import Fraction
from tqdm.auto import tqdm
from typing import Callable, List, Optional, Sequence, Tuple

from ..convergence import (
    KIntegralResult,
    NUCertificate,
    ScheduleEntry,
    ToleranceNotReached,
)
from ..geometry import Brick, uniform_tiling
from ..jordan import ExceptionCover, boundary_cells
from ..stepfn import StepFunction, Term
from ..utils import (
    Point,
    get_precision,
    simplest_rational_in,
    to_fraction,
    unit_latin_hypercube,
)

__all__ = [
    "DEFAULT_M_SCHEDULE",
    "OracleError",
    "IntegrandSpec",
    "sample_step",
    "k_integrate",
    "fubini",
    "inner_integral",
    "darboux",
    "truncate",
    "extend",
]

logger = logging.getLogger(__name__)

DEFAULT_M_SCHEDULE = (8, 16, 32, 64, 128, 256, 512)


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class IntegrandSpec:
    """
    A point oracle on the brick ``ambient``.

    ``support_predicate`` marks a region ``C`` with ``eval = 0`` outside it;
    the boundary cells of ``C`` then make up the exception covers.
    ``claimed_bound`` is a caller-asserted bound on ``|eval|``.
    """

    ambient: Brick
    eval: Callable[[Point], object]
    support_predicate: Optional[Callable[[Point], bool]] = None
    claimed_bound: Optional[Fraction] = None

    def __post_init__(self):
        if self.claimed_bound is not None:
            bound = to_fraction(self.claimed_bound)
            if bound < 0:
                raise ValueError(f"Claimed bound must be nonnegative, got {bound}")
            object.__setattr__(self, "claimed_bound", bound)

    def __call__(self, x: Sequence):
        return self.eval(x)

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    def restrict(self, S: Brick) -> "IntegrandSpec":
        if not S.is_subset(self.ambient):
            raise ValueError(f"{S} is not inside {self.ambient}")
        return replace(self, ambient=S)

    @classmethod
    def from_function(cls, spec, support=None, claimed_bound=None) -> "IntegrandSpec":
        """Wrap anything with ``ambient`` and a point call (DSL specs, gallery fixtures)."""
        return cls(
            ambient=spec.ambient,
            eval=spec,
            support_predicate=support,
            claimed_bound=claimed_bound,
        )


def _evaluate(f: IntegrandSpec, x: Sequence, precision: Fraction) -> Fraction:
    try:
        value = f.eval(x)
        return to_fraction(value, precision)
    except (ArithmeticError, ValueError, TypeError) as e:
        raise OracleError(f"Oracle failed at {tuple(str(c) for c in x)}: {e}") from e


def sample_step(
    f: IntegrandSpec,
    m: int,
    precision: Optional[Fraction] = None,
    no_progress: bool = True,
) -> StepFunction:
    """``sum f(x_i) χ_{T_i}`` over the uniform tiling, ``x_i`` the cell centres."""
    precision = get_precision() if precision is None else to_fraction(precision)
    tiling = uniform_tiling(f.ambient, m)
    terms = []
    for cell, center in tqdm(
        zip(tiling.cells, tiling.centers),
        total=m**f.dimension,
        disable=no_progress,
        desc=f"Sampling m={m}",
    ):
        value = _evaluate(f, center, precision)
        if value != 0:
            terms.append(Term(value, cell))
    return StepFunction(f.ambient, tuple(terms))


def _spread(f: IntegrandSpec, g: StepFunction, m: int) -> Fraction:
    if f.claimed_bound is not None:
        return 2 * f.claimed_bound
    values = [term.coeff for term in g.terms]
    if len(values) < m**f.dimension:
        # cells with value 0 carry no term
        values.append(Fraction(0))
    return max(values) - min(values)


def _cover_for(f: IntegrandSpec, m: int) -> ExceptionCover:
    if f.support_predicate is None:
        return ExceptionCover(())
    depth = max(1, math.ceil(math.log2(m)))
    return boundary_cells(f.support_predicate, f.ambient, depth)


def k_integrate(
    f: IntegrandSpec,
    tol,
    m_schedule: Sequence[int] = DEFAULT_M_SCHEDULE,
    precision: Optional[Fraction] = None,
    no_progress: bool = True,
) -> KIntegralResult:
    """
    K-integral of ``f`` from the centre-sampled step functions along
    ``m_schedule``.

    The error bound at ``m`` is the gap ``|∫g_m - ∫g_prev|`` plus the spread
    of the values times the volume of the boundary cells of the support at
    the matching dyadic depth. The first entry has no predecessor and is
    bounded by the spread times ``λ(T)``. The run stops at the first entry
    whose bound is within ``tol``.
    """
    tol = to_fraction(tol)
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    schedule = list(m_schedule)
    if not schedule:
        raise ValueError("Empty m schedule")
    if any(m < 1 for m in schedule) or schedule != sorted(set(schedule)):
        raise ValueError(f"m schedule must be strictly increasing positive integers: {schedule}")

    volume = f.ambient.volume
    previous = None
    best = None
    entries: List[ScheduleEntry] = []
    bound = Fraction(0)
    for m in schedule:
        g = sample_step(f, m, precision=precision, no_progress=no_progress)
        value = g.integral()
        spread = _spread(f, g, m)
        bound = max(bound, max((abs(t.coeff) for t in g.terms), default=Fraction(0)))
        cover = _cover_for(f, m)
        if previous is None:
            error = spread * volume
        else:
            error = abs(value - previous) + spread * cover.total_volume
        logger.debug("m=%d integral=%s error bound=%s", m, float(value), float(error))
        _record(entries, cover, m, error / volume if volume else error)
        result = KIntegralResult(
            value=value, error_bound=error, terms_used=m, m=m, method="sampling"
        )
        if best is None or error < best.error_bound:
            best = result
        if error <= tol:
            certificate = NUCertificate(
                uniform_bound=f.claimed_bound if f.claimed_bound is not None else bound,
                schedule=tuple(entries),
            )
            return replace(result, certificate=certificate if entries else None)
        previous = value
    logger.warning(
        "tolerance %s not reached by m=%d; best bound %s",
        float(tol),
        schedule[-1],
        float(best.error_bound),
    )
    raise ToleranceNotReached(best, tol)


def _record(entries: List[ScheduleEntry], cover: ExceptionCover, m: int, tail_sup: Fraction):
    # keep the schedule strictly decreasing in both delta and tail_sup
    delta = cover.total_volume + Fraction(1, m)
    if entries and not (delta < entries[-1].delta and tail_sup < entries[-1].tail_sup):
        return
    entries.append(ScheduleEntry(delta=delta, cover=cover, tail_index=m, tail_sup=tail_sup))


def _midpoints(lo: Fraction, hi: Fraction, m: int) -> List[Fraction]:
    width = (hi - lo) / m
    return [lo + width * (2 * i + 1) / 2 for i in range(m)]


def inner_integral(
    f: IntegrandSpec, prefix: Sequence, m: int, precision: Optional[Fraction] = None
) -> Fraction:
    """Midpoint integral over the last axis with the leading coordinates fixed."""
    precision = get_precision() if precision is None else to_fraction(precision)
    if len(prefix) != f.dimension - 1:
        raise ValueError(
            f"Need {f.dimension - 1} leading coordinates, got {len(prefix)}"
        )
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    last = f.ambient.factors[-1]
    prefix = tuple(prefix)
    total = sum(
        (_evaluate(f, prefix + (y,), precision) for y in _midpoints(last.lo, last.hi, m)),
        Fraction(0),
    )
    return total * last.length / m


def fubini(
    f: IntegrandSpec,
    m: int,
    precision: Optional[Fraction] = None,
    no_progress: bool = True,
) -> Fraction:
    """
    Successive one-dimensional midpoint integrals, the last axis innermost.
    Only meaningful for integrands the caller knows to be continuous.
    """
    if f.dimension < 2:
        raise ValueError("Successive integration needs at least two axes")
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    precision = get_precision() if precision is None else to_fraction(precision)

    def integrate(prefix: Tuple) -> Fraction:
        axis = len(prefix)
        if axis == f.dimension - 1:
            return inner_integral(f, prefix, m, precision)
        factor = f.ambient.factors[axis]
        points = _midpoints(factor.lo, factor.hi, m)
        if axis == 0:
            points = tqdm(points, disable=no_progress, desc="Outer axis")
        total = sum((integrate(prefix + (x,)) for x in points), Fraction(0))
        return total * factor.length / m

    return integrate(())


def _cell_points(cell: Brick, samples: int, seed: int) -> List[Point]:
    corners = [()]
    for factor in cell.factors:
        corners = [c + (v,) for c in corners for v in (factor.lo, factor.hi)]
    simplest = tuple(simplest_rational_in(f.lo, f.hi) for f in cell.factors)
    scattered = [
        tuple(f.lo + f.length * u for f, u in zip(cell.factors, unit))
        for unit in unit_latin_hypercube(cell.dimension, samples, seed)
    ]
    return corners + [cell.center, simplest] + scattered


def darboux(
    f: IntegrandSpec,
    m: int,
    samples_per_cell: int = 4,
    seed: int = 0,
    precision: Optional[Fraction] = None,
    no_progress: bool = True,
) -> Tuple[Fraction, Fraction]:
    """
    Sampled lower and upper Darboux sums over the closed cells of the uniform
    tiling. Each cell is probed at its corners, its centre, its simplest
    rational point and ``samples_per_cell`` Latin-hypercube points.
    """
    precision = get_precision() if precision is None else to_fraction(precision)
    tiling = uniform_tiling(f.ambient, m)
    volume = tiling.cell_volume
    lower, upper = Fraction(0), Fraction(0)
    for cell in tqdm(tiling.cells, disable=no_progress, desc=f"Darboux m={m}"):
        values = [
            _evaluate(f, x, precision)
            for x in _cell_points(cell.closure(), samples_per_cell, seed)
        ]
        lower += min(values) * volume
        upper += max(values) * volume
    return lower, upper


def truncate(f: IntegrandSpec, C) -> IntegrandSpec:
    """``med{-C, f, C}``."""
    C = to_fraction(C)
    if C <= 0:
        raise ValueError(f"Truncation level must be positive, got {C}")

    def clamped(x):
        value = to_fraction(f.eval(x), get_precision())
        return min(max(value, -C), C)

    return IntegrandSpec(
        ambient=f.ambient,
        eval=clamped,
        support_predicate=f.support_predicate,
        claimed_bound=C,
    )


def extend(f: IntegrandSpec, D: Brick) -> IntegrandSpec:
    """Extension by zero from ``T`` to a bounding brick ``D ⊇ T``."""
    T = f.ambient
    D.check_dimension(T.dimension)
    if not T.is_subset(D):
        raise ValueError(f"{T} is not inside {D}")

    def extended(x):
        return f.eval(x) if T.contains(x) else 0

    if f.support_predicate is None:
        support = T.contains
    else:
        inner = f.support_predicate

        def support(x):
            return T.contains(x) and inner(x)

    return IntegrandSpec(
        ambient=D, eval=extended, support_predicate=support, claimed_bound=f.claimed_bound
    )
