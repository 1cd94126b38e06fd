"""
gwk: command line front end of the toolkit.

    gwk analyze law.json
    gwk limit law.json --n-max 200 --s 0,0.25
    gwk invariant law.json --mode empirical
    gwk simulate law.json --n 12 --reps 100000 --seed 7
    gwk verify law.json

Exit codes: 0 success, 1 invalid law or input, 2 numerical failure or a
failed identity, 3 usage error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from pydantic import TypeAdapter, ValidationError

from api.v1.exceptions.base import BranchingException
from api.v1.exceptions.cli import LawFileIoException, LawFileParseException, UsageException
from api.v1.schemas.asymptotics import NuSource
from api.v1.schemas.offspring import LawFile, OffspringLaw
from api.v1.services.offspring import from_law_file
from api.v1.services.reports import ReportService
from core.config import get_settings
from core.logging import get_logger, set_log_level
from core.utils import dumps_csv, dumps_json, dumps_table, flatten, loads_strict

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_USAGE = 3

_law_file_adapter = TypeAdapter(LawFile)


class GwkArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 3."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_law_file(path: str | Path, renormalize: bool = False) -> OffspringLaw:
    """Read, parse and validate a law file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        logger.error(f"Cannot read law file {path}: {exc}")
        raise LawFileIoException(f"Cannot read law file {path}: {exc.strerror or exc}")

    try:
        raw = loads_strict(text)
    except json.JSONDecodeError as exc:
        raise LawFileParseException(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except ValueError as exc:
        raise LawFileParseException(f"{path}: {exc}")

    try:
        body = _law_file_adapter.validate_python(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}" for error in exc.errors()
        )
        raise LawFileParseException(f"{path}: {problems}")
    return from_law_file(body, renormalize=renormalize)


def _probe_points(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def build_parser() -> GwkArgumentParser:
    common = GwkArgumentParser(add_help=False)
    common.add_argument("law", help="law file (JSON)")
    common.add_argument("--format", choices=["json", "csv", "table"], default="json")
    common.add_argument("--out", help="write the report to this path instead of stdout")
    common.add_argument("--n-max", type=_positive_int, dest="n_max")
    common.add_argument("--tol", type=float)
    common.add_argument("--j-max", type=_positive_int, dest="j_max")
    common.add_argument("--s", type=_probe_points, dest="s_points", help="comma separated probe points")
    common.add_argument("--seed", type=_seed)
    common.add_argument("--reps", type=_positive_int)
    common.add_argument("--renormalize", action="store_true", help="rescale masses to unit sum")
    common.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=get_settings().app_settings.LOG_LEVEL.upper(),
    )

    parser = GwkArgumentParser(prog="gwk", description="Galton-Watson Kolmogorov constant toolkit")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("analyze", parents=[common], help="full report")
    commands.add_parser("limit", parents=[common], help="iteration limit and delta estimates")
    commands.add_parser("bounds", parents=[common], help="Delta_1/Delta_2 bounds and stepwise sandwich")
    invariant = commands.add_parser("invariant", parents=[common], help="Q-process invariant measure")
    invariant.add_argument("--mode", choices=["closed", "empirical"], default="closed")
    qprocess = commands.add_parser("qprocess", parents=[common], help="Q-process rows, moments and a trajectory")
    qprocess.add_argument("--steps", type=_positive_int, default=10)
    qprocess.add_argument("--i", type=int, default=1, dest="start")
    simulate = commands.add_parser("simulate", parents=[common], help="Monte Carlo oracle")
    simulate.add_argument("--n", type=_positive_int, default=12)
    commands.add_parser("verify", parents=[common], help="verification ledger")
    return parser


def _execute(args: argparse.Namespace, service: ReportService) -> tuple[Any, int]:
    law = parse_law_file(args.law, renormalize=args.renormalize)
    if args.command == "analyze":
        report = service.analyze(law, args.s_points, args.n_max, args.tol, args.j_max)
        return report, EXIT_OK if report.limit.converged else EXIT_NUMERICAL
    if args.command == "limit":
        limit = service.limit(law, args.s_points, args.n_max, args.tol)
        return limit, EXIT_OK if limit.converged else EXIT_NUMERICAL
    if args.command == "bounds":
        return service.bounds(law, args.s_points, args.n_max, args.tol), EXIT_OK
    if args.command == "invariant":
        mode = NuSource.closed_form if args.mode == "closed" else NuSource.empirical
        return service.invariant(law, mode, args.j_max, args.tol), EXIT_OK
    if args.command == "qprocess":
        if args.start < 1:
            raise UsageException(f"--i must be at least 1, got {args.start}")
        return service.qprocess(law, args.steps, args.start, args.seed, args.j_max), EXIT_OK
    if args.command == "simulate":
        if args.reps == 0:
            raise UsageException("--reps must be at least 1")
        return service.simulate(law, args.n, args.reps, args.seed), EXIT_OK
    ledger = service.verify(law)
    return ledger, EXIT_OK if ledger.passed else EXIT_NUMERICAL


def report_rows(command: str, result: Any) -> list[dict[str, Any]]:
    """Plot-ready rows of a result for the csv and table formats."""
    if command == "limit":
        return [
            {"s": trace.s, "n": row.n, "f_n": row.f_n_at_s, "R_n": row.R_n, "beta_n_over_R_n": row.normalized}
            for trace in result.traces
            for row in trace.rows
        ]
    if command == "bounds":
        return [step.model_dump() for step in result.sandwich]
    if command == "invariant":
        return [
            {"j": j, "nu": nu, "pi": pi}
            for j, (nu, pi) in enumerate(zip(result.measure.nu, result.measure.pi), start=1)
        ]
    if command == "qprocess":
        return [{"step": k, "state": state} for k, state in enumerate(result.trajectory.states)]
    if command == "verify":
        return [entry.model_dump() for entry in result.entries]
    return [{"key": key, "value": value} for key, value in flatten(result)]


def render(command: str, result: Any, output_format: str) -> str:
    if output_format == "json":
        return dumps_json(result)
    rows = report_rows(command, result)
    if output_format == "csv":
        return dumps_csv(rows)
    return dumps_table(rows)


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    set_log_level(args.log_level)

    try:
        result, code = _execute(args, ReportService())
    except BranchingException as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        print(f"gwk: {exc}", file=sys.stderr)
        return exc.exit_code

    text = render(args.command, result, args.format)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"gwk: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    if code != EXIT_OK:
        logger.warning(f"{args.command} finished with exit code {code}")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
