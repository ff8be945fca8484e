import logging

from dataclasses import dataclass, field
from fractions import Fraction
from tqdm.auto import tqdm
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .jordan import ExceptionCover
from .stepfn import StepFunction, sup_diff_outside
from .utils import (
    Number,
    fraction_to_text,
    parse_rational,
    to_fraction,
    unit_latin_hypercube,
)

__all__ = [
    "MalformedCertificateError",
    "ToleranceNotReached",
    "ScheduleEntry",
    "NUCertificate",
    "NUVerdict",
    "KIntegralResult",
    "FiniteSequence",
    "verify_nu",
    "k_integral",
    "compose_diagonal",
]

logger = logging.getLogger(__name__)

StepSequence = Callable[[int], StepFunction]
Target = Union[StepFunction, Callable]


class MalformedCertificateError(ValueError):
    pass


@dataclass(frozen=True)
class KIntegralResult:
    value: Union[Fraction, Number]
    error_bound: Fraction
    terms_used: int
    m: Optional[int] = None
    method: str = "certificate"
    certificate: Optional["NUCertificate"] = field(default=None, compare=False)

    def to_json(self) -> dict:
        return {
            "value": fraction_to_text(self.value)
            if isinstance(self.value, Fraction)
            else str(self.value),
            "value_decimal": float(self.value),
            "error_bound": fraction_to_text(self.error_bound),
            "error_bound_decimal": float(self.error_bound),
            "terms_used": self.terms_used,
            "m": self.m,
            "method": self.method,
        }


class ToleranceNotReached(ArithmeticError):
    """The schedule ran out before the error bound dropped below ``tol``."""

    def __init__(self, best: Optional[KIntegralResult], tol):
        self.best = best
        self.tol = tol
        bound = "none" if best is None else f"{float(best.error_bound):.3g}"
        super().__init__(f"Tolerance {float(tol):.3g} not reached; best bound {bound}")


@dataclass(frozen=True)
class ScheduleEntry:
    delta: Fraction
    cover: ExceptionCover
    tail_index: int
    tail_sup: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta", to_fraction(self.delta))
        object.__setattr__(self, "tail_sup", to_fraction(self.tail_sup))


@dataclass(frozen=True)
class NUCertificate:
    """
    Finite evidence for nearly uniform convergence: a uniform bound ``C``
    and a schedule of ``(delta, cover, tail_index, tail_sup)`` entries.
    """

    uniform_bound: Fraction
    schedule: Tuple[ScheduleEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "uniform_bound", to_fraction(self.uniform_bound))
        object.__setattr__(self, "schedule", tuple(self.schedule))

    def validate(self):
        if self.uniform_bound < 0:
            raise MalformedCertificateError("Uniform bound must be nonnegative")
        if not self.schedule:
            raise MalformedCertificateError("Empty schedule")
        for i, entry in enumerate(self.schedule):
            if entry.delta <= 0 or entry.tail_sup < 0:
                raise MalformedCertificateError(f"Entry {i}: nonpositive delta or negative tail_sup")
            if entry.cover.total_volume >= entry.delta:
                raise MalformedCertificateError(
                    f"Entry {i}: cover volume {entry.cover.total_volume} is not below delta {entry.delta}"
                )
            if entry.tail_index < 1:
                raise MalformedCertificateError(f"Entry {i}: tail_index must be positive")
        for i, (a, b) in enumerate(zip(self.schedule, self.schedule[1:])):
            if not b.delta < a.delta:
                raise MalformedCertificateError(f"Entry {i + 1}: deltas must strictly decrease")
            if not b.tail_sup < a.tail_sup:
                raise MalformedCertificateError(f"Entry {i + 1}: tail_sup must strictly decrease")

    def to_json(self) -> dict:
        return {
            "uniform_bound": fraction_to_text(self.uniform_bound),
            "schedule": [
                {
                    "delta": fraction_to_text(e.delta),
                    "cover": e.cover.to_json(),
                    "tail_index": e.tail_index,
                    "tail_sup": fraction_to_text(e.tail_sup),
                }
                for e in self.schedule
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NUCertificate":
        try:
            schedule = tuple(
                ScheduleEntry(
                    delta=parse_rational(e["delta"]),
                    cover=ExceptionCover.from_json(e["cover"]),
                    tail_index=int(e["tail_index"]),
                    tail_sup=parse_rational(e["tail_sup"]),
                )
                for e in data["schedule"]
            )
            return cls(parse_rational(data["uniform_bound"]), schedule)
        except (KeyError, TypeError) as e:
            raise MalformedCertificateError(f"Malformed certificate: {e}")


@dataclass(frozen=True)
class NUVerdict:
    passed: bool
    failed_entry: Optional[int] = None
    index: Optional[int] = None
    observed: Optional[Fraction] = None
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "failed_entry": self.failed_entry,
            "index": self.index,
            "observed": None if self.observed is None else fraction_to_text(self.observed),
            "reason": self.reason,
        }


class FiniteSequence:
    """A finite family ``g_1, ..., g_N`` usable wherever a sequence is expected."""

    def __init__(self, items: Sequence[StepFunction]):
        if not items:
            raise ValueError("A finite sequence needs at least one element")
        self.items = list(items)

    def __len__(self) -> int:
        return len(self.items)

    def __call__(self, m: int) -> StepFunction:
        if not 1 <= m <= len(self.items):
            raise IndexError(f"Index {m} outside 1..{len(self.items)}")
        return self.items[m - 1]


def _indices(seq: StepSequence, tail_index: int, horizon: int) -> range:
    stop = tail_index + horizon
    if hasattr(seq, "__len__"):
        stop = min(stop, len(seq) + 1)
    return range(tail_index, stop)


def verify_nu(
    seq: StepSequence,
    target: Target,
    cert: NUCertificate,
    samples: int = 64,
    horizon: int = 32,
    seed: int = 0,
    no_progress: bool = True,
) -> NUVerdict:
    """
    Check a certificate against a sequence of step functions.

    For each schedule entry, the indices ``tail_index .. tail_index+horizon-1``
    (clipped to the length of finite families) are checked. Step targets are
    compared exactly off the cover; oracle targets at ``samples``
    Latin-hypercube points off the cover.
    """
    cert.validate()
    C = cert.uniform_bound
    for entry_index, entry in enumerate(
        tqdm(cert.schedule, disable=no_progress, desc="Verifying schedule")
    ):
        for m in _indices(seq, entry.tail_index, horizon):
            g = seq(m)
            bound = g.max_abs()
            if bound > C:
                return NUVerdict(
                    passed=False,
                    failed_entry=entry_index,
                    index=m,
                    observed=bound,
                    reason=f"max |g_{m}| = {bound} exceeds the uniform bound {C}",
                )
            if isinstance(target, StepFunction):
                observed = sup_diff_outside(g, target, entry.cover.bricks)
            else:
                observed = _sampled_sup(g, target, entry.cover, samples, seed)
            if observed > entry.tail_sup:
                return NUVerdict(
                    passed=False,
                    failed_entry=entry_index,
                    index=m,
                    observed=observed,
                    reason=f"sup off cover {observed} exceeds tail_sup {entry.tail_sup}",
                )
    return NUVerdict(passed=True)


def _sampled_sup(
    g: StepFunction, target: Callable, cover: ExceptionCover, samples: int, seed: int
) -> Fraction:
    ambient = g.ambient
    observed = Fraction(0)
    for unit in unit_latin_hypercube(ambient.dimension, samples, seed):
        x = tuple(f.lo + f.length * u for f, u in zip(ambient.factors, unit))
        if cover.contains(x):
            continue
        value = to_fraction(target(x))
        observed = max(observed, abs(g.evaluate(x) - value))
    return observed


def k_integral(seq: StepSequence, cert: NUCertificate, tol) -> KIntegralResult:
    """
    Integral of the limit from a verified certificate: ``∫ g_m`` at the tail
    index of the first entry whose bound ``tail_sup·λ(T) + 2·C·delta`` is
    within ``tol``. The certificate is assumed to pass ``verify_nu``.
    """
    cert.validate()
    tol = to_fraction(tol)
    best = None
    for entry in cert.schedule:
        g = seq(entry.tail_index)
        error = entry.tail_sup * g.ambient.volume + 2 * cert.uniform_bound * entry.delta
        result = KIntegralResult(
            value=g.integral(),
            error_bound=error,
            terms_used=entry.tail_index,
            m=entry.tail_index,
            certificate=cert,
        )
        if best is None or error < best.error_bound:
            best = result
        if error <= tol:
            return result
    logger.warning("schedule exhausted before reaching tolerance %s", float(tol))
    raise ToleranceNotReached(best, tol)


def compose_diagonal(
    inner_sequences: Sequence[StepSequence],
    inner_certificates: Sequence[NUCertificate],
    outer: NUCertificate,
) -> Tuple[FiniteSequence, NUCertificate]:
    """
    Diagonal sequence for a nearly uniform limit of K-integrable functions.

    ``inner_sequences[i-1]`` approximates ``f_i`` with ``inner_certificates[i-1]``,
    and ``outer`` certifies ``f_i -> f`` (its ``tail_index`` counts ``i``). The
    diagonal picks, for each ``i``, the step function at the tail index of the
    last entry of the inner certificate. Each outer entry becomes an entry whose
    cover joins the outer cover with the inner covers of all later ``f_i``.
    """
    if len(inner_sequences) != len(inner_certificates):
        raise ValueError("Need one certificate per inner sequence")
    if not inner_sequences:
        raise ValueError("Need at least one inner sequence")
    outer.validate()
    for cert in inner_certificates:
        cert.validate()
    K = len(inner_sequences)
    lasts = [cert.schedule[-1] for cert in inner_certificates]
    diagonal = FiniteSequence(
        [seq(last.tail_index) for seq, last in zip(inner_sequences, lasts)]
    )

    schedule: List[ScheduleEntry] = []
    for entry in outer.schedule:
        start = entry.tail_index
        if start > K:
            break
        tail = lasts[start - 1 :]
        cover = entry.cover
        for last in tail:
            cover = cover.union(last.cover)
        schedule.append(
            ScheduleEntry(
                delta=entry.delta + sum((last.delta for last in tail), Fraction(0)),
                cover=cover,
                tail_index=start,
                tail_sup=entry.tail_sup + max(last.tail_sup for last in tail),
            )
        )
    if not schedule:
        raise ValueError("No outer entry starts within the inner family")
    bound = max(
        [outer.uniform_bound] + [cert.uniform_bound for cert in inner_certificates]
    )
    return diagonal, NUCertificate(uniform_bound=bound, schedule=tuple(schedule))
