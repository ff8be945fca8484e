"""
Command-line front end.

Every subcommand writes one report: JSON with sorted keys (or CSV rows with
``--format csv``) to ``--out`` or stdout. Exit codes: 0 success, 2 a
negative verdict (evidence of non-integrability, instability, failed
verification), 1 an error, 3 a tolerance the schedule could not reach.
"""

import json
import logging
import sys

import mpmath
import torch
import tqdm

from argparse import ArgumentParser
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from . import __version__
from . import dsl, gallery
from .algorithms.directional import (
    DirectionalConfig,
    Kind,
    Verdict,
    classify,
    decide_k_integrability,
)
from .algorithms.gauge import Gauge, cousin_partition, verify_fine
from .algorithms.indefinite import (
    DEFAULT_DERIVATIVE_RADII,
    IndefiniteIntegral,
    check_indefinite_integral,
    reconstruct,
)
from .algorithms.integrator import (
    DEFAULT_M_SCHEDULE,
    IntegrandSpec,
    fubini,
    k_integrate,
    sample_step,
)
from .convergence import NUCertificate, ToleranceNotReached, k_integral, verify_nu
from .geometry import Brick, parse_brick
from .jordan import boundary_cells, content_bounds
from .utils import atomic_write, fraction_to_text, parse_point, parse_rational, to_fraction

__all__ = [
    "SCHEMA_VERSION",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_NEGATIVE",
    "EXIT_TOLERANCE",
    "COMMANDS",
    "RunConfig",
    "report_schema_version",
    "run",
    "render",
    "build_parser",
    "main",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0.0"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2
EXIT_TOLERANCE = 3

COMMANDS = (
    "integrate",
    "fubini",
    "classify",
    "jordan",
    "partition",
    "reconstruct",
    "check-psi",
    "gallery",
    "verify",
)

Rows = Tuple[List[str], List[list]]


def report_schema_version() -> str:
    return SCHEMA_VERSION


def _increasing(values: Sequence, name: str):
    values = list(values)
    if not values:
        raise ValueError(f"Empty {name} schedule")
    if values != sorted(set(values)):
        raise ValueError(f"{name} schedule must be strictly increasing: {values}")


@dataclass(frozen=True)
class RunConfig:
    """
    One CLI invocation. ``depth`` and ``format`` default per command when
    None; ``radii`` defaults to the directional or derivative schedule.
    """

    command: str
    spec: Optional[str] = None
    ambient: Optional[str] = None
    tol: Fraction = Fraction(1, 1000)
    m: Tuple[int, ...] = DEFAULT_M_SCHEDULE
    depth: Optional[Tuple[int, ...]] = None
    radii: Optional[Tuple[Fraction, ...]] = None
    seed: int = 0
    out: Optional[str] = None
    format: Optional[str] = None
    point: Optional[str] = None
    gauge: Optional[str] = None
    region: Optional[str] = None
    cert: Optional[str] = None
    trials: int = 16
    samples: int = 64
    progress: bool = False
    name: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        object.__setattr__(self, "tol", to_fraction(self.tol))
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        _increasing(self.m, "m")
        if any(m < 1 for m in self.m):
            raise ValueError("m values must be positive")
        if self.depth is not None:
            _increasing(self.depth, "depth")
            if any(d < 0 for d in self.depth):
                raise ValueError("Depths must be nonnegative")
        if self.radii is not None:
            radii = tuple(to_fraction(r) for r in self.radii)
            if not radii or any(r <= 0 for r in radii) or list(radii) != sorted(set(radii), reverse=True):
                raise ValueError("Radii must be positive and strictly decreasing")
            object.__setattr__(self, "radii", radii)
        if self.format not in (None, "json", "csv"):
            raise ValueError(f"Unknown format {self.format!r}")
        if self.trials < 1 or self.samples < 2:
            raise ValueError("trials must be positive and samples at least 2")

    @property
    def output_format(self) -> str:
        if self.format is not None:
            return self.format
        return "csv" if self.command == "partition" else "json"

    def depths(self, default: Tuple[int, ...]) -> Tuple[int, ...]:
        return default if self.depth is None else self.depth

    def provenance(self) -> dict:
        return {
            "seed": self.seed,
            "spec": self.spec,
            "ambient": self.ambient,
            "tol": fraction_to_text(self.tol),
            "schedules": {
                "m": list(self.m),
                "depth": None if self.depth is None else list(self.depth),
                "radii": None if self.radii is None else [fraction_to_text(r) for r in self.radii],
            },
            "versions": {
                "brickint": __version__,
                "torch": torch.__version__,
                "mpmath": mpmath.__version__,
                "tqdm": tqdm.__version__,
            },
        }


# spec loading


def _ambient(config: RunConfig) -> Optional[Brick]:
    return None if config.ambient is None else parse_brick(config.ambient)


def _load_function(config: RunConfig):
    """A point oracle with an ``ambient`` brick: a gallery fixture, a JSON spec file or an expression."""
    if config.spec is None:
        raise ValueError(f"{config.command} needs --spec")
    ambient = _ambient(config)
    if config.spec.startswith("gallery:") and ambient is None:
        return gallery.resolve(config.spec)
    if config.spec.endswith(".json"):
        return dsl.FunctionSpec.from_file(config.spec)
    return dsl.parse(config.spec, ambient=ambient)


def _integrand(config: RunConfig) -> IntegrandSpec:
    function = _load_function(config)
    support = None
    if config.region is not None:
        support = dsl.parse_condition(config.region, function.ambient.dimension)
    return IntegrandSpec.from_function(function, support=support)


def _point(config: RunConfig) -> Tuple[Fraction, ...]:
    if config.point is None:
        raise ValueError(f"{config.command} needs --point")
    return parse_point(config.point)


def _directional_config(config: RunConfig) -> DirectionalConfig:
    if config.radii is None:
        return DirectionalConfig(samples=config.samples, seed=config.seed)
    return DirectionalConfig(radii=config.radii, samples=config.samples, seed=config.seed)


def _derivative_radii(config: RunConfig) -> Tuple[Fraction, ...]:
    return DEFAULT_DERIVATIVE_RADII if config.radii is None else config.radii


# commands


def _integrate(config: RunConfig):
    f = _integrand(config)
    result = k_integrate(f, config.tol, config.m, no_progress=not config.progress)
    rows = (["value", "error_bound", "m"], [[float(result.value), float(result.error_bound), result.m]])
    body = result.to_json()
    body["certificate_entries"] = 0 if result.certificate is None else len(result.certificate.schedule)
    return body, rows, EXIT_OK


def _fubini(config: RunConfig):
    f = _integrand(config)
    m = config.m[-1]
    value = fubini(f, m, no_progress=not config.progress)
    body = {"value": fraction_to_text(value), "value_decimal": float(value), "m": m}
    return body, (["value", "m"], [[float(value), m]]), EXIT_OK


def _classify(config: RunConfig):
    f = _load_function(config)
    directional = _directional_config(config)
    if config.point is not None:
        found = classify(f, _point(config), f.ambient, directional)
        code = EXIT_NEGATIVE if found.kind is Kind.SECOND_KIND_SUSPECT else EXIT_OK
        return found.to_json(), (["kind"], [[found.kind.value]]), code
    decision = decide_k_integrability(
        f,
        f.ambient,
        config.depths((4, 5, 6)),
        config=directional,
        no_progress=not config.progress,
    )
    rows = (
        ["depth", "dis2_volume", "unbounded_volume", "fraction"],
        [[r.depth, float(r.dis2_volume), float(r.unbounded_volume), float(r.fraction)] for r in decision.rows],
    )
    code = EXIT_NEGATIVE if decision.verdict is Verdict.NOT_INTEGRABLE_EVIDENCE else EXIT_OK
    return decision.to_json(), rows, code


def _condition_dimension(text: str) -> int:
    parser = dsl.Parser(text)
    parser.condition()
    parser.finish()
    return max(parser.max_index, 1)


def _jordan(config: RunConfig):
    ambient = _ambient(config)
    text = config.region or config.spec
    if text is None:
        raise ValueError("jordan needs --region (or --spec) holding a condition")
    if ambient is None:
        ambient = Brick.unit(_condition_dimension(text))
    member = dsl.parse_condition(text, ambient.dimension)
    table = []
    for depth in config.depths((4, 6, 8)):
        bounds = content_bounds(member, ambient, depth, no_progress=not config.progress)
        boundary = boundary_cells(member, ambient, depth)
        table.append([depth, float(bounds.inner), float(bounds.outer), float(bounds.gap), float(boundary.total_volume)])
    header = ["depth", "inner", "outer", "gap", "boundary_volume"]
    body = {"region": text, "ambient": str(ambient), "rows": [dict(zip(header, row)) for row in table]}
    return body, (header, table), EXIT_OK


def _partition(config: RunConfig):
    if config.gauge is None:
        raise ValueError("partition needs --gauge")
    ambient = _ambient(config) or Brick.unit(1)
    radius = dsl.parse(config.gauge, ambient=ambient)
    gauge = Gauge(lambda x: to_fraction(radius(x)))
    depth_limit = config.depths((16,))[-1]
    partition = cousin_partition(gauge, ambient, depth_limit=depth_limit, no_progress=not config.progress)
    verdict = verify_fine(partition, gauge, ambient)
    lines = partition.to_csv().splitlines()
    header, rows = lines[0].split(","), [line.split(",") for line in lines[1:]]
    body = {"cells": len(partition), "fine": verdict.to_json(), "rows": [dict(zip(header, row)) for row in rows]}
    return body, (header, rows), EXIT_OK if verdict.ok else EXIT_NEGATIVE


def _reconstruct(config: RunConfig):
    psi = IndefiniteIntegral(_integrand(config), tol=config.tol)
    found = reconstruct(psi, _point(config), _derivative_radii(config), config.samples, config.tol, config.seed)
    rows = (["radius", "sup"], [[float(row.radius), row.max] for row in found.table])
    return found.to_json(), rows, EXIT_OK if found.converged else EXIT_NEGATIVE


def _check_psi(config: RunConfig):
    psi = IndefiniteIntegral(_integrand(config), tol=config.tol)
    points = [] if config.point is None else [_point(config)]
    report = check_indefinite_integral(
        psi,
        trials=config.trials,
        seed=config.seed,
        points=points,
        radii=_derivative_radii(config),
        probes=config.samples,
        tol=config.tol,
        no_progress=not config.progress,
    )
    rows = (
        ["condition", "holds"],
        [[k, v] for k, v in sorted(report.conditions.items())],
    )
    return report.to_json(), rows, EXIT_OK if report.k_profile else EXIT_NEGATIVE


def _gallery(config: RunConfig):
    if config.name is None:
        names = list(gallery.available())
        return {"fixtures": names}, (["fixture"], [[name] for name in names]), EXIT_OK
    fixture = gallery.resolve(config.name)
    body = {"name": fixture.reference, "ambient": str(fixture.ambient), "dimension": fixture.dimension}
    rows = (["name", "dimension"], [[fixture.reference, fixture.dimension]])
    if config.point is not None:
        point = _point(config)
        value = fixture(point)
        body["point"] = [fraction_to_text(c) for c in point]
        body["value"] = str(value)
        rows = (["name", "value"], [[fixture.reference, float(value)]])
    return body, rows, EXIT_OK


def _verify(config: RunConfig):
    if config.cert is None:
        raise ValueError("verify needs --cert")
    f = _integrand(config)
    with open(config.cert) as handle:
        cert = NUCertificate.from_json(json.load(handle))

    def seq(m: int):
        return sample_step(f, m)

    verdict = verify_nu(seq, f, cert, samples=config.samples, seed=config.seed, no_progress=not config.progress)
    body = {"verdict": verdict.to_json()}
    if verdict.passed:
        body["integral"] = k_integral(seq, cert, config.tol).to_json()
    rows = (["passed", "failed_entry", "index"], [[verdict.passed, verdict.failed_entry, verdict.index]])
    return body, rows, EXIT_OK if verdict.passed else EXIT_NEGATIVE


HANDLERS: dict = {
    "integrate": _integrate,
    "fubini": _fubini,
    "classify": _classify,
    "jordan": _jordan,
    "partition": _partition,
    "reconstruct": _reconstruct,
    "check-psi": _check_psi,
    "gallery": _gallery,
    "verify": _verify,
}


def _envelope(config: RunConfig, result: dict, rows: Optional[Rows]) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": config.command,
        "header": {"generated_at": datetime.now(timezone.utc).isoformat()},
        "provenance": config.provenance(),
        "result": result,
    }
    if rows is not None:
        report["rows"] = {"header": rows[0], "values": rows[1]}
    return report


def run(config: RunConfig) -> Tuple[dict, int]:
    """Execute one command; failures become reports with exit code 1 or 3."""
    try:
        result, rows, code = HANDLERS[config.command](config)
    except ToleranceNotReached as e:
        logger.warning(str(e))
        best = None if e.best is None else e.best.to_json()
        return _envelope(config, {"error": str(e), "best": best}, None), EXIT_TOLERANCE
    except (ValueError, ArithmeticError, OSError) as e:
        logger.error(str(e))
        return _envelope(config, {"error": str(e), "kind": type(e).__name__}, None), EXIT_ERROR
    return _envelope(config, result, rows), code


def render(report: dict, output_format: str = "json") -> str:
    if output_format == "csv" and "rows" in report:
        header, values = report["rows"]["header"], report["rows"]["values"]
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in values]
        return "\n".join(lines) + "\n"
    return json.dumps(report, sort_keys=True, indent=2, default=str) + "\n"


def _schedule(text: str, convert: Callable = int) -> tuple:
    return tuple(convert(part) for part in text.split(",") if part.strip())


def build_parser() -> ArgumentParser:
    p = ArgumentParser(prog="brickint", description="K-integrals of functions on bricks")
    p.add_argument("command", choices=COMMANDS, help="What to compute")
    p.add_argument("--spec", type=str, help="Expression, gallery:<name>[?k=v] or a JSON spec file")
    p.add_argument("--ambient", type=str, help="Ambient brick, e.g. [0,1]x[0,1]")
    p.add_argument("--tol", type=str, default="1e-3", help="Tolerance")
    p.add_argument("--m", type=str, help="Comma-separated m schedule")
    p.add_argument("--depth", type=str, help="Comma-separated depth schedule")
    p.add_argument("--radii", type=str, help="Comma-separated decreasing radii")
    p.add_argument("--seed", type=int, default=0, help="Seed for all randomized probing")
    p.add_argument("--out", type=str, help="Report path (stdout when missing)")
    p.add_argument("--format", choices=("json", "csv"), help="Report format")
    p.add_argument("--point", type=str, help="Comma-separated point")
    p.add_argument("--gauge", type=str, help="Gauge expression for partition")
    p.add_argument("--region", type=str, help="Condition: support region or set for jordan")
    p.add_argument("--cert", type=str, help="Certificate JSON for verify")
    p.add_argument("--trials", type=int, default=16, help="Random trials for check-psi")
    p.add_argument("--samples", type=int, default=64, help="Samples or probes per radius")
    p.add_argument("--name", type=str, help="Gallery fixture for the gallery command")
    p.add_argument("--progress", action="store_true", help="Toggle for showing progress bar")
    p.add_argument("--verbose", action="store_true", help="Debug logging")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = RunConfig(
            command=args.command,
            spec=args.spec,
            ambient=args.ambient,
            tol=parse_rational(args.tol),
            m=DEFAULT_M_SCHEDULE if args.m is None else _schedule(args.m),
            depth=None if args.depth is None else _schedule(args.depth),
            radii=None if args.radii is None else _schedule(args.radii, parse_rational),
            seed=args.seed,
            out=args.out,
            format=args.format,
            point=args.point,
            gauge=args.gauge,
            region=args.region,
            cert=args.cert,
            trials=args.trials,
            samples=args.samples,
            progress=args.progress,
            name=args.name,
        )
    except ValueError as e:
        sys.stderr.write(f"brickint: {e}\n")
        return EXIT_ERROR
    report, code = run(config)
    text = render(report, config.output_format)
    if config.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(config.out, text)
    return code


if __name__ == "__main__":
    sys.exit(main())
