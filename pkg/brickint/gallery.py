import mpmath

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple

from .geometry import Brick, Interval
from .jordan import ExceptionCover
from .stepfn import StepFunction, Term
from .utils import Number, Point, get_precision, simplest_rational_in, to_fraction, to_mpf

__all__ = [
    "RemovedIntervals",
    "fat_cantor",
    "endpoint_closure_cover",
    "f_prop41c",
    "h_fixture",
    "h_outer",
    "thomae",
    "thomae_sheet",
    "RotatedThomae",
    "rotated_thomae",
    "rational_enumeration",
    "rational_indicator",
    "shrinking_indicator",
    "GalleryFunction",
    "FIXTURES",
    "available",
    "resolve",
]

DEFAULT_STAGES = 8
DEFAULT_DENOMINATOR_BOUND = 10**4


@dataclass(frozen=True)
class RemovedIntervals:
    """
    Open middle intervals removed while building the fat Cantor set: stage
    ``j`` removes the centred open interval of length ``4**-j`` from each of
    the ``2**(j-1)`` remaining closed pieces.
    """

    stages: Tuple[Tuple[Tuple[Fraction, Fraction], ...], ...]
    pieces: Tuple[Tuple[Fraction, Fraction], ...]

    @property
    def intervals(self) -> Tuple[Tuple[Fraction, Fraction], ...]:
        """All removed intervals, stage-major and left to right; ``n`` is 1-based."""
        return tuple(interval for stage in self.stages for interval in stage)

    @property
    def total_length(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def __post_init__(self):
        ordered = sorted(
            (a, b, n) for n, (a, b) in enumerate(self.intervals, start=1)
        )
        object.__setattr__(self, "_ordered", tuple(ordered))
        object.__setattr__(self, "_starts", tuple(a for a, _, _ in ordered))

    def find(self, x) -> Optional[Tuple[Fraction, Fraction, int]]:
        """``(a, b, n)`` for the removed interval containing ``x``, if any."""
        x = to_fraction(x)
        i = bisect_right(self._starts, x) - 1
        if i < 0:
            return None
        a, b, n = self._ordered[i]
        return (a, b, n) if a < x < b else None

    def locate(self, x) -> Optional[int]:
        """Enumeration index ``n`` of the removed interval containing ``x``."""
        found = self.find(x)
        return None if found is None else found[2]


@lru_cache(maxsize=32)
def fat_cantor(k: int) -> RemovedIntervals:
    if k < 1:
        raise ValueError(f"Need at least one stage, got {k}")
    pieces = [(Fraction(0), Fraction(1))]
    stages = []
    for j in range(1, k + 1):
        half = Fraction(1, 2 * 4**j)
        removed, next_pieces = [], []
        for lo, hi in pieces:
            mid = (lo + hi) / 2
            removed.append((mid - half, mid + half))
            next_pieces.extend([(lo, mid - half), (mid + half, hi)])
        stages.append(tuple(removed))
        pieces = next_pieces
    return RemovedIntervals(stages=tuple(stages), pieces=tuple(pieces))


def endpoint_closure_cover(k: int) -> ExceptionCover:
    """
    The closed pieces left after ``k`` stages. Any closed cover of all the
    endpoints of removed intervals contains them, so its volume is at least
    ``1/2 + 2**-(k+1)``.
    """
    return ExceptionCover(
        tuple(Brick((Interval(lo, hi),)) for lo, hi in fat_cantor(k).pieces)
    )


def _check_unit(x, name: str = "x"):
    if not 0 <= x <= 1:
        raise ValueError(f"{name}={x} outside [0, 1]")


def f_prop41c(x, k: int = DEFAULT_STAGES) -> mpmath.mpf:
    """
    ``(1/n)(sin(1/(x-a_n)) + sin(1/(b_n-x)))`` on the ``n``-th removed
    interval and 0 on the remaining pieces. Riemann integrable, yet every
    endpoint is a discontinuity of the second kind.
    """
    _check_unit(x)
    found = fat_cantor(k).find(x)
    if found is None:
        return mpmath.mpf(0)
    a, b, n = found
    xm = to_mpf(x)
    return (mpmath.sin(1 / (xm - to_mpf(a))) + mpmath.sin(1 / (to_mpf(b) - xm))) / n


def h_fixture(x, y, k: int = DEFAULT_STAGES) -> int:
    """Indicator of ``0 <= y <= f(x) + 2`` on ``[0,1] x [0,4]``."""
    if not 0 <= y <= 4:
        raise ValueError(f"y={y} outside [0, 4]")
    return int(0 <= to_mpf(y) <= f_prop41c(x, k) + 2)


def h_outer(x, k: int = DEFAULT_STAGES) -> mpmath.mpf:
    """Successive inner integrals of ``h_fixture``: ``f(x) + 2``."""
    return f_prop41c(x, k) + 2


def thomae(
    x: Number,
    irrational: bool = False,
    denominator_bound: int = DEFAULT_DENOMINATOR_BOUND,
) -> Fraction:
    """
    ``1/q`` at ``x = p/q`` in lowest terms (``p != 0``), 0 at irrationals and 0.

    Rationals are decided exactly. Float and mpmath inputs are taken as
    rational only when they lie within the configured precision of a
    fraction with denominator at most ``denominator_bound``.
    """
    if irrational:
        return Fraction(0)
    if isinstance(x, (Fraction, int)):
        value = Fraction(x)
    else:
        exact = to_fraction(x)
        value = exact.limit_denominator(denominator_bound)
        if abs(exact - value) > get_precision():
            return Fraction(0)
    if value == 0:
        return Fraction(0)
    return Fraction(1, value.denominator)


def thomae_sheet(x: Number, y: Number) -> Fraction:
    """``H(x)`` on the unit square."""
    return thomae(x)


class RotatedThomae:
    """
    ``(u, v) -> H(first coordinate of g(u, v))`` where ``g`` rotates by an
    angle with cosine ``c`` and sine ``s``, extended by 0 where ``g(u, v)``
    leaves the unit square.

    An exact angle is given by a Pythagorean triple ``(a, b, hyp)`` with
    ``c = a/hyp`` and ``s = b/hyp``, so images of rational points are decided
    exactly. A decimal ``angle`` (radians) falls back to denominator-bounded
    detection.
    """

    def __init__(
        self,
        triple: Optional[Tuple[int, int, int]] = (3, 4, 5),
        angle: Optional[float] = None,
        denominator_bound: int = DEFAULT_DENOMINATOR_BOUND,
    ):
        self.denominator_bound = denominator_bound
        if angle is not None:
            angle_mp = mpmath.mpf(angle)
            if not 0 < angle_mp < mpmath.pi / 2:
                raise ValueError(f"Angle must lie in (0, pi/2), got {angle}")
            self.exact = False
            self.cos, self.sin = mpmath.cos(angle_mp), mpmath.sin(angle_mp)
            c, s = to_fraction(self.cos), to_fraction(self.sin)
        else:
            a, b, hyp = triple
            if a <= 0 or b <= 0 or a * a + b * b != hyp * hyp:
                raise ValueError(f"Not a positive Pythagorean triple: {triple}")
            self.exact = True
            self.cos, self.sin = Fraction(a, hyp), Fraction(b, hyp)
            c, s = self.cos, self.sin
        corners = [(c * x + s * y, -s * x + c * y) for x in (0, 1) for y in (0, 1)]
        self.ambient = Brick.closed(
            [min(p[0] for p in corners), min(p[1] for p in corners)],
            [max(p[0] for p in corners), max(p[1] for p in corners)],
        )

    def image(self, u, v) -> Tuple:
        """``g(u, v)``, the point of the unit square carrying the value."""
        if self.exact:
            u, v = to_fraction(u), to_fraction(v)
        else:
            u, v = to_mpf(u), to_mpf(v)
        return (self.cos * u - self.sin * v, self.sin * u + self.cos * v)

    def point_on_line(self, x, y) -> Tuple:
        """The point ``(u, v)`` with ``g(u, v) = (x, y)``."""
        if self.exact:
            x, y = to_fraction(x), to_fraction(y)
        else:
            x, y = to_mpf(x), to_mpf(y)
        return (self.cos * x + self.sin * y, -self.sin * x + self.cos * y)

    def __call__(self, u, v) -> Fraction:
        x, y = self.image(u, v)
        if not (0 <= x <= 1 and 0 <= y <= 1):
            return Fraction(0)
        return thomae(x, denominator_bound=self.denominator_bound)

    def probe_points(self, region: Brick) -> Tuple[Point, ...]:
        """
        A point of ``region``'s interior on the rotated line ``x = p/q`` with
        the smallest ``q`` crossing it, where the fixture is largest. Empty
        for decimal angles or when no such line meets the rotated square.
        """
        if not self.exact or region.dimension != 2:
            return ()
        c, s = self.cos, self.sin
        (u_lo, v_lo), (u_hi, v_hi) = region.lo, region.hi
        xs = [c * u - s * v for u in (u_lo, u_hi) for v in (v_lo, v_hi)]
        lo, hi = max(min(xs), Fraction(0)), min(max(xs), Fraction(1))
        if lo >= hi:
            return ()
        margin = (hi - lo) / 8
        t = simplest_rational_in(lo + margin, hi - margin)
        # the line is {point_on_line(t, y)}; keep y strictly inside (0, 1)
        y_lo = max(Fraction(0), (u_lo - c * t) / s, (v_lo + s * t) / c)
        y_hi = min(Fraction(1), (u_hi - c * t) / s, (v_hi + s * t) / c)
        if y_lo >= y_hi:
            return ()
        return (self.point_on_line(t, (y_lo + y_hi) / 2),)


_DEFAULT_ROTATION = RotatedThomae()


def rotated_thomae(u, v, angle=None) -> Fraction:
    """
    Evaluate the rotated Thomae sheet. ``angle`` may be None (the exact
    3-4-5 rotation), a Pythagorean triple, or a decimal angle in radians.
    """
    if angle is None:
        return _DEFAULT_ROTATION(u, v)
    if isinstance(angle, tuple):
        return RotatedThomae(triple=angle)(u, v)
    return RotatedThomae(triple=None, angle=angle)(u, v)


def rational_enumeration() -> Iterator[Fraction]:
    """``Q ∩ [0,1]`` by increasing denominator, then numerator: 0, 1, 1/2, 1/3, 2/3, ..."""
    yield Fraction(0)
    yield Fraction(1)
    q = 2
    while True:
        for p in range(1, q):
            if gcd(p, q) == 1:
                yield Fraction(p, q)
        q += 1


@lru_cache(maxsize=1024)
def _nth_rational(m: int) -> Fraction:
    for i, value in enumerate(rational_enumeration(), start=1):
        if i == m:
            return value


def rational_indicator(m: int, ambient: Optional[Brick] = None) -> StepFunction:
    """
    Indicator of the single point ``q_m`` (the ``m``-th rational of the fixed
    enumeration, placed on the diagonal of ``ambient``).
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    ambient = ambient or Brick.unit(1)
    q = _nth_rational(m)
    point = tuple(f.lo + f.length * q for f in ambient.factors)
    return StepFunction(ambient, (Term(1, Brick.point(point)),))


def shrinking_indicator(m: int) -> StepFunction:
    """``χ_[0,1/m]`` on ``[0,1]``."""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return StepFunction.indicator(Brick.closed([0], [Fraction(1, m)]), Brick.unit(1))


@dataclass(frozen=True)
class GalleryFunction:
    """
    A named fixture bound to its parameters, evaluated at points.

    ``probes`` optionally suggests points of a region where the fixture is
    large; samplers add them to their own points.
    """

    name: str
    params: Tuple[Tuple[str, int], ...]
    ambient: Brick
    oracle: Callable
    probes: Optional[Callable[[Brick], Tuple[Point, ...]]] = field(
        default=None, compare=False
    )

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    def __call__(self, point: Sequence):
        self.ambient.check_dimension(len(point))
        return self.oracle(point)

    def probe_points(self, region: Brick) -> Tuple[Point, ...]:
        if self.probes is None:
            return ()
        return tuple(self.probes(region))

    @property
    def reference(self) -> str:
        if not self.params:
            return f"gallery:{self.name}"
        query = "&".join(f"{key}={value}" for key, value in self.params)
        return f"gallery:{self.name}?{query}"


def _unit(n: int) -> Brick:
    return Brick.unit(n)


def _make_f_prop41c(k: int = DEFAULT_STAGES):
    return _unit(1), lambda p: f_prop41c(p[0], k)


def _make_h_fixture(k: int = DEFAULT_STAGES):
    return Brick.closed([0, 0], [1, 4]), lambda p: h_fixture(p[0], p[1], k)


def _make_h_outer(k: int = DEFAULT_STAGES):
    return _unit(1), lambda p: h_outer(p[0], k)


def _make_thomae(bound: int = DEFAULT_DENOMINATOR_BOUND):
    return _unit(1), lambda p: thomae(p[0], denominator_bound=bound)


def _make_thomae_sheet():
    return _unit(2), lambda p: thomae_sheet(p[0], p[1])


def _make_rotated_thomae(a: int = 3, b: int = 4, c: int = 5):
    rotation = RotatedThomae(triple=(a, b, c))
    return rotation.ambient, lambda p: rotation(p[0], p[1]), rotation.probe_points


def _make_shrinking_indicator(m: int = 1):
    g = shrinking_indicator(m)
    return g.ambient, g.evaluate


def _make_rational_indicator(m: int = 1):
    g = rational_indicator(m)
    return g.ambient, g.evaluate


FIXTURES: Dict[str, Callable] = {
    "f_prop41c": _make_f_prop41c,
    "h_fixture": _make_h_fixture,
    "h_outer": _make_h_outer,
    "thomae": _make_thomae,
    "thomae_sheet": _make_thomae_sheet,
    "rotated_thomae": _make_rotated_thomae,
    "shrinking_indicator": _make_shrinking_indicator,
    "rational_indicator": _make_rational_indicator,
}


def available() -> Tuple[str, ...]:
    return tuple(sorted(FIXTURES))


def _normalise(name: str) -> str:
    return name.strip().replace("-", "_")


def resolve(name: str, params: Optional[Dict[str, int]] = None) -> GalleryFunction:
    """
    Look up a fixture by name. ``name`` may carry a query such as
    ``f_prop41c?k=8`` and may start with ``gallery:``.
    """
    params = dict(params or {})
    if name.startswith("gallery:"):
        name = name[len("gallery:") :]
    if "?" in name:
        name, query = name.split("?", 1)
        for item in query.split("&"):
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"Malformed gallery parameter {item!r}")
            key, value = item.split("=", 1)
            try:
                params[key.strip()] = int(value)
            except ValueError:
                raise ValueError(f"Gallery parameter {key} must be an integer, got {value!r}")
    key = _normalise(name)
    if key not in FIXTURES:
        raise ValueError(f"Unknown gallery fixture {name!r}; available: {', '.join(available())}")
    try:
        ambient, oracle, *probes = FIXTURES[key](**params)
    except TypeError:
        raise ValueError(f"Invalid parameters {sorted(params)} for gallery fixture {key!r}")
    return GalleryFunction(
        name=key,
        params=tuple(sorted(params.items())),
        ambient=ambient,
        oracle=oracle,
        probes=probes[0] if probes else None,
    )
