import math
import os
import tempfile

import mpmath
import torch

torch.set_default_dtype(torch.float64)

from fractions import Fraction
from functools import lru_cache
from typing import Optional, Tuple, Union

__all__ = [
    "DEFAULT_PRECISION",
    "PRECISION_ENV",
    "Number",
    "get_precision",
    "to_fraction",
    "to_mpf",
    "to_float",
    "parse_rational",
    "parse_point",
    "fraction_to_text",
    "make_generator",
    "unit_latin_hypercube",
    "unit_lattice",
    "random_fractions",
    "simplest_rational_in",
    "atomic_write",
]

DEFAULT_PRECISION = "1e-12"
PRECISION_ENV = "BRICKINT_PRECISION"

Number = Union[int, float, Fraction, mpmath.mpf]
Point = Tuple[Fraction, ...]


def get_precision() -> Fraction:
    """
    Rounding quantum used when oracle values (floats or mpmath decimals)
    enter the exact step-function algebra.

    Read from the environment variable ``BRICKINT_PRECISION`` on every call,
    defaulting to ``1e-12``.
    """
    text = os.environ.get(PRECISION_ENV, DEFAULT_PRECISION)
    try:
        precision = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Invalid {PRECISION_ENV} value: {text!r}")
    if precision <= 0:
        raise ValueError(f"{PRECISION_ENV} must be positive, got {text!r}")
    return precision


def to_fraction(value: Number, precision: Optional[Fraction] = None) -> Fraction:
    """
    Convert a number to an exact rational.

    Rationals and integers pass through unchanged. Floats and mpmath values
    are converted exactly when ``precision`` is None, otherwise rounded to the
    nearest multiple of ``precision``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, int)):
        return Fraction(int(value))
    if isinstance(value, mpmath.mpf):
        if not mpmath.isfinite(value):
            raise ValueError(f"Cannot convert non-finite value {value} to a rational")
        sign, man, exp, _ = value._mpf_
        exact = Fraction(int(man)) * Fraction(2) ** int(exp) if man else Fraction(0)
        if sign:
            exact = -exact
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"Cannot convert non-finite value {value} to a rational")
        exact = Fraction(value)
    elif isinstance(value, torch.Tensor):
        return to_fraction(value.item(), precision)
    else:
        raise TypeError(f"Unsupported numeric type {type(value).__name__}")
    if precision is None:
        return exact
    return round(exact / precision) * precision


def to_mpf(value: Number) -> mpmath.mpf:
    if isinstance(value, mpmath.mpf):
        return value
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def to_float(value: Number) -> float:
    return float(value)


def parse_rational(text: str) -> Fraction:
    """Parse ``p/q``, integer or decimal text into an exact rational."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Invalid rational literal: {text!r}")


def parse_point(text: str) -> Point:
    parts = [part for part in str(text).split(",") if part.strip()]
    if not parts:
        raise ValueError(f"Invalid point: {text!r}")
    return tuple(parse_rational(part) for part in parts)


def fraction_to_text(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator


@lru_cache(maxsize=256)
def unit_latin_hypercube(
    dimension: int, num_points: int, seed: int, bits: int = 20
) -> Tuple[Point, ...]:
    """
    Latin-hypercube points strictly inside the open unit cube, with dyadic
    jitter so every coordinate is an exact rational.

    The result only depends on its arguments, which makes it safe to cache and
    to rescale into any probe region.
    """
    if num_points < 1:
        return ()
    generator = make_generator(seed)
    scale = 2**bits
    columns = []
    for _ in range(dimension):
        perm = torch.randperm(num_points, generator=generator)
        jitter = torch.randint(1, scale, (num_points,), generator=generator)
        columns.append(
            [
                Fraction(int(p) * scale + int(j), num_points * scale)
                for p, j in zip(perm.tolist(), jitter.tolist())
            ]
        )
    return tuple(zip(*columns))


@lru_cache(maxsize=256)
def unit_lattice(dimension: int, per_axis: int, centered: bool) -> Tuple[Point, ...]:
    """
    Regular lattice in the unit cube.

    ``centered=True`` gives cell-centred points ``(2i+1)/(2g)``; otherwise the
    points are ``i/(g+1)`` for ``i = 1..g``, evenly spaced strictly inside.
    """
    if centered:
        axis = [Fraction(2 * i + 1, 2 * per_axis) for i in range(per_axis)]
    else:
        axis = [Fraction(i, per_axis + 1) for i in range(1, per_axis + 1)]
    points = [()]
    for _ in range(dimension):
        points = [p + (a,) for p in points for a in axis]
    return tuple(points)


def random_fractions(
    size: int, generator: torch.Generator, bits: int = 20
) -> Tuple[Fraction, ...]:
    """Uniform dyadic rationals in the open interval (0, 1)."""
    scale = 2**bits
    draws = torch.randint(1, scale, (size,), generator=generator)
    return tuple(Fraction(int(d), scale) for d in draws.tolist())


def simplest_rational_in(lo: Fraction, hi: Fraction) -> Fraction:
    """
    Rational with the smallest denominator in the closed interval [lo, hi],
    found by walking the Stern-Brocot tree through continued fractions.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if lo > hi:
        raise ValueError("Empty interval")
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -simplest_rational_in(-hi, -lo)
    floor = math.floor(lo)
    if floor == lo:
        return Fraction(floor)
    if floor + 1 <= hi:
        return Fraction(floor + 1)
    # lo and hi share the integer part
    rest = simplest_rational_in(1 / (hi - floor), 1 / (lo - floor))
    return floor + 1 / rest


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".brickint-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
