import logging
import math

import torch

torch.set_default_dtype(torch.float64)

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from tqdm.auto import tqdm
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..convergence import ToleranceNotReached
from ..geometry import Brick, Interval, max_norm_ball
from ..jordan import ExceptionCover
from ..utils import (
    Point,
    fraction_to_text,
    get_precision,
    make_generator,
    random_fractions,
    to_fraction,
    unit_latin_hypercube,
)
from .directional import Direction, RadiusStats, orthant_directions
from .integrator import IntegrandSpec, k_integrate

__all__ = [
    "DEFAULT_DERIVATIVE_RADII",
    "MAX_SKEW",
    "PsiValue",
    "IndefiniteIntegral",
    "Status",
    "DerivativeEstimate",
    "ReconstructionReport",
    "IndefiniteIntegralReport",
    "psi",
    "strong_derivative",
    "directional_strong_derivative",
    "max_directional_derivative",
    "reconstruct",
    "check_indefinite_integral",
]

logger = logging.getLogger(__name__)

DEFAULT_DERIVATIVE_RADII = tuple(Fraction(1, 2**k) for k in range(3, 11))
# probe bricks shrink each axis by up to 2**MAX_SKEW independently
MAX_SKEW = 8

SetOracle = Callable[[Brick], object]


@dataclass(frozen=True)
class PsiValue:
    value: Fraction
    error_bound: Fraction

    def to_json(self) -> dict:
        return {
            "value": fraction_to_text(self.value),
            "value_decimal": float(self.value),
            "error_bound": float(self.error_bound),
        }


class IndefiniteIntegral:
    """
    ``S -> ∫_S f`` on the closed sub-bricks of the ambient brick.

    The source is either an ``IntegrandSpec``, integrated on each ``S`` with
    ``k_integrate`` at tolerance ``tol * λ(S)``, or a set oracle returning
    ``Ψ(S)`` directly (taken as exact). Values are cached per brick.
    """

    def __init__(
        self,
        source: Union[IntegrandSpec, SetOracle],
        ambient: Optional[Brick] = None,
        m_schedule: Sequence[int] = (4, 8),
        tol=Fraction(1, 100),
        precision: Optional[Fraction] = None,
    ):
        if isinstance(source, IntegrandSpec):
            ambient = ambient or source.ambient
        elif ambient is None:
            raise ValueError("A set oracle needs its ambient brick")
        self.source = source
        self.ambient = ambient
        self.m_schedule = tuple(m_schedule)
        self.tol = to_fraction(tol)
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        self.precision = precision
        self._cache: Dict[Brick, PsiValue] = {}

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    def value(self, S: Brick) -> PsiValue:
        if not S.is_subset(self.ambient):
            raise ValueError(f"{S} is not inside {self.ambient}")
        cached = self._cache.get(S)
        if cached is not None:
            return cached
        if S.volume == 0:
            result = PsiValue(Fraction(0), Fraction(0))
        elif isinstance(self.source, IntegrandSpec):
            result = self._integrate(S)
        else:
            result = PsiValue(to_fraction(self.source(S)), Fraction(0))
        self._cache[S] = result
        return result

    def _integrate(self, S: Brick) -> PsiValue:
        restricted = self.source.restrict(S)
        try:
            found = k_integrate(
                restricted, self.tol * S.volume, self.m_schedule, precision=self.precision
            )
        except ToleranceNotReached as e:
            found = e.best
        return PsiValue(to_fraction(found.value), found.error_bound)

    def __call__(self, S: Brick) -> Fraction:
        return self.value(S).value


def psi(f: IntegrandSpec, S: Brick, tol=Fraction(1, 100), m_schedule: Sequence[int] = (4, 8)) -> PsiValue:
    return IndefiniteIntegral(f, m_schedule=m_schedule, tol=tol).value(S)


class Status(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class DerivativeEstimate:
    """
    Ratios ``Ψ(S)/λ(S)`` over probe bricks per radius. ``value`` and
    ``spread`` are those of the smallest radius; stable iff ``spread < tol``.
    """

    value: float
    radius_used: Fraction
    spread: float
    status: Status
    table: Tuple[RadiusStats, ...]

    @property
    def stable(self) -> bool:
        return self.status is Status.STABLE

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "radius_used": fraction_to_text(self.radius_used),
            "spread": self.spread,
            "status": self.status.value,
            "table": [row.to_json() for row in self.table],
        }


def _probe_bricks(
    region: Sequence[Tuple[Fraction, Fraction]], probes: int, generator: torch.Generator
) -> List[Brick]:
    """
    Closed bricks strictly inside the open box ``region``. Each side is
    ``7/8 * span * 2**-e`` with ``e`` drawn per axis from ``0..MAX_SKEW``, so
    skewed bricks and bricks away from the centre both occur.
    """
    n = len(region)
    exponents = torch.randint(0, MAX_SKEW + 1, (probes, n), generator=generator).tolist()
    positions = random_fractions(probes * n, generator)
    bricks = []
    for i in range(probes):
        factors = []
        for k, (lo, hi) in enumerate(region):
            span = hi - lo
            length = span * Fraction(7, 8) / 2 ** exponents[i][k]
            start = lo + (span - length) * positions[i * n + k]
            factors.append(Interval(start, start + length))
        bricks.append(Brick(tuple(factors)))
    return bricks


def _ratio_stats(psi: IndefiniteIntegral, r: Fraction, bricks: List[Brick]) -> RadiusStats:
    ratios = torch.tensor([float(psi(S) / S.volume) for S in bricks])
    return RadiusStats(
        radius=r,
        count=len(bricks),
        min=ratios.min().item(),
        max=ratios.max().item(),
        mean=ratios.mean().item(),
    )


def _estimate(rows: List[RadiusStats], tol: float) -> DerivativeEstimate:
    final = rows[-1]
    return DerivativeEstimate(
        value=final.mean,
        radius_used=final.radius,
        spread=final.oscillation,
        status=Status.STABLE if final.oscillation < tol else Status.UNSTABLE,
        table=tuple(rows),
    )


def _interior_point(psi: IndefiniteIntegral, u: Sequence) -> Point:
    u = tuple(to_fraction(c) for c in u)
    if not psi.ambient.interior_contains(u):
        raise ValueError(f"{u} is not an interior point of {psi.ambient}")
    return u


def _check_radii(radii: Sequence) -> Tuple[Fraction, ...]:
    radii = tuple(to_fraction(r) for r in radii)
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("Radii must be a nonempty sequence of positive numbers")
    return radii


def strong_derivative(
    psi: IndefiniteIntegral,
    u: Sequence,
    radii: Sequence = DEFAULT_DERIVATIVE_RADII,
    probes: int = 32,
    tol=1e-2,
    seed: int = 0,
) -> DerivativeEstimate:
    """Ratios over closed probe bricks inside the ball ``B(u, r)`` for each radius."""
    u = _interior_point(psi, u)
    generator = make_generator(seed)
    rows = []
    for r in _check_radii(radii):
        ball = max_norm_ball(u, r, psi.ambient)
        bricks = _probe_bricks([(f.lo, f.hi) for f in ball.factors], probes, generator)
        rows.append(_ratio_stats(psi, r, bricks))
    estimate = _estimate(rows, float(tol))
    logger.debug("strong derivative at %s: %s", tuple(float(c) for c in u), estimate.status.value)
    return estimate


def directional_strong_derivative(
    psi: IndefiniteIntegral,
    u: Sequence,
    alpha: Direction,
    radii: Sequence = DEFAULT_DERIVATIVE_RADII,
    probes: int = 32,
    tol=1e-2,
    seed: int = 0,
) -> DerivativeEstimate:
    """As ``strong_derivative``, with probes inside the closed orthant brick at ``u``."""
    if not alpha.is_orthant:
        raise ValueError(f"Direction {alpha} has a zero component")
    u = _interior_point(psi, u)
    psi.ambient.check_dimension(alpha.dimension)
    generator = make_generator(seed)
    rows = []
    for r in _check_radii(radii):
        region = []
        for f, c, a in zip(psi.ambient.factors, u, alpha.components):
            region.append((c, min(c + r, f.hi)) if a > 0 else (max(c - r, f.lo), c))
        rows.append(_ratio_stats(psi, r, _probe_bricks(region, probes, generator)))
    return _estimate(rows, float(tol))


def max_directional_derivative(
    psi: IndefiniteIntegral,
    u: Sequence,
    radii: Sequence = DEFAULT_DERIVATIVE_RADII,
    probes: int = 32,
    tol=1e-2,
    seed: int = 0,
) -> Optional[float]:
    """Largest stable orthant derivative at ``u``; None when none is stable."""
    values = []
    for alpha in orthant_directions(psi.dimension):
        estimate = directional_strong_derivative(psi, u, alpha, radii, probes, tol, seed)
        if estimate.stable:
            values.append(estimate.value)
    return max(values, default=None)


@dataclass(frozen=True)
class ReconstructionReport:
    """
    Per-radius suprema of the probed ratios. The supremum is a maximum over
    finitely many probes, so it can only underestimate.
    """

    value: Optional[float]
    converged: bool
    table: Tuple[RadiusStats, ...]

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "converged": self.converged,
            "table": [
                {"radius": fraction_to_text(row.radius), "sup": row.max, "count": row.count}
                for row in self.table
            ],
        }


def reconstruct(
    psi: IndefiniteIntegral,
    x: Sequence,
    radii: Sequence = DEFAULT_DERIVATIVE_RADII,
    probes: int = 32,
    tol=1e-2,
    seed: int = 0,
) -> ReconstructionReport:
    """``f(x)`` as the limit of the supremum of ``Ψ(S)/λ(S)`` over bricks near ``x``."""
    x = _interior_point(psi, x)
    generator = make_generator(seed)
    rows = []
    for r in _check_radii(radii):
        ball = max_norm_ball(x, r, psi.ambient)
        bricks = _probe_bricks([(f.lo, f.hi) for f in ball.factors], probes, generator)
        rows.append(_ratio_stats(psi, r, bricks))
    converged = len(rows) >= 2 and abs(rows[-1].max - rows[-2].max) < float(tol)
    if not converged:
        logger.warning("supremum not settled at %s", tuple(float(c) for c in x))
    return ReconstructionReport(
        value=rows[-1].max if converged else None, converged=converged, table=tuple(rows)
    )


@dataclass(frozen=True)
class IndefiniteIntegralReport:
    """
    Sampled evidence for the four conditions characterising indefinite
    K-integrals: (1) Lipschitz, (2) finitely additive, (3) strongly
    differentiable off a small set, (4) strongly differentiable in every
    orthant direction at every probed point.
    """

    lipschitz_L: float
    additivity_max_residual: Fraction
    additivity_ok: bool
    derivative_coverage: float
    directional_coverage: float
    unstable_cover: ExceptionCover
    conditions: Dict[int, bool]
    points: int

    @property
    def k_profile(self) -> bool:
        return all(self.conditions.values())

    @property
    def riemann_profile(self) -> bool:
        return self.conditions[1] and self.conditions[2] and self.conditions[3]

    def to_json(self) -> dict:
        return {
            "lipschitz_L": self.lipschitz_L,
            "additivity_max_residual": float(self.additivity_max_residual),
            "additivity_ok": self.additivity_ok,
            "derivative_coverage": self.derivative_coverage,
            "directional_coverage": self.directional_coverage,
            "unstable_cover": self.unstable_cover.to_json(),
            "unstable_cover_volume": float(self.unstable_cover.total_volume),
            "conditions": {str(k): v for k, v in sorted(self.conditions.items())},
            "k_profile": self.k_profile,
            "riemann_profile": self.riemann_profile,
            "points": self.points,
        }


def _split(S: Brick, axis: int, t: Fraction) -> Tuple[Brick, Brick]:
    factor = S.factors[axis]
    cut = factor.lo + factor.length * t
    lower = list(S.factors)
    upper = list(S.factors)
    lower[axis] = Interval(factor.lo, cut)
    upper[axis] = Interval(cut, factor.hi)
    return Brick(tuple(lower)), Brick(tuple(upper))


def check_indefinite_integral(
    psi: IndefiniteIntegral,
    trials: int = 32,
    seed: int = 0,
    points: Sequence[Sequence] = (),
    radii: Sequence = DEFAULT_DERIVATIVE_RADII,
    probes: int = 32,
    tol=1e-2,
    no_progress: bool = True,
) -> IndefiniteIntegralReport:
    """
    Probe ``trials`` random bricks for the Lipschitz constant and as many
    random splits for additivity, then estimate full and orthant strong
    derivatives at ``trials`` Latin-hypercube points plus ``points``.
    Points with an unstable full derivative are covered by closed boxes of
    the final radius.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    T = psi.ambient
    n = T.dimension
    radii = _check_radii(radii)
    generator = make_generator(seed)
    region = [(f.lo, f.hi) for f in T.factors]

    ratios = []
    max_residual, additivity_ok = Fraction(0), True
    slack = get_precision()
    axes = torch.randint(0, n, (trials,), generator=generator).tolist()
    cuts = random_fractions(trials, generator)
    for S, axis, t in zip(_probe_bricks(region, trials, generator), axes, cuts):
        whole = psi.value(S)
        ratios.append(abs(float(whole.value / S.volume)))
        lower, upper = _split(S, axis, t)
        first, second = psi.value(lower), psi.value(upper)
        residual = abs(whole.value - first.value - second.value)
        bound = whole.error_bound + first.error_bound + second.error_bound + 2 * slack * S.volume
        max_residual = max(max_residual, residual)
        if residual > bound:
            additivity_ok = False
    lipschitz_L = max(ratios)

    probe_points = [
        tuple(f.lo + f.length * c for f, c in zip(T.factors, unit))
        for unit in unit_latin_hypercube(n, trials, seed)
    ] + [tuple(to_fraction(c) for c in p) for p in points]
    stable_full, stable_all, unstable = 0, 0, []
    final = radii[-1]
    for u in tqdm(probe_points, disable=no_progress, desc="Probing derivatives"):
        if strong_derivative(psi, u, radii, probes, tol, seed).stable:
            stable_full += 1
        else:
            closure = T.closure()
            box = Brick.closed(
                [max(c - final, f.lo) for c, f in zip(u, closure.factors)],
                [min(c + final, f.hi) for c, f in zip(u, closure.factors)],
            )
            unstable.append(box)
        if all(
            directional_strong_derivative(psi, u, alpha, radii, probes, tol, seed).stable
            for alpha in orthant_directions(n)
        ):
            stable_all += 1

    cover = ExceptionCover(tuple(unstable))
    conditions = {
        1: math.isfinite(lipschitz_L),
        2: additivity_ok,
        3: cover.total_volume < to_fraction(tol) * T.volume,
        4: stable_all == len(probe_points),
    }
    report = IndefiniteIntegralReport(
        lipschitz_L=lipschitz_L,
        additivity_max_residual=max_residual,
        additivity_ok=additivity_ok,
        derivative_coverage=stable_full / len(probe_points),
        directional_coverage=stable_all / len(probe_points),
        unstable_cover=cover,
        conditions=conditions,
        points=len(probe_points),
    )
    logger.info("conditions %s", conditions)
    return report
