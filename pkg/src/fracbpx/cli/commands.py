import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from pydantic import TypeAdapter, ValidationError

from fracbpx.config import Settings
from fracbpx.models.schemas import (
    BenchConfig,
    BenchMode,
    InequalityReport,
    OutputFormat,
    PreconditionerKind,
)
from fracbpx.services.benchmark import (
    DEFAULT_N_VALUES,
    compare_to_reference,
    default_s_values,
    reference_table_path,
    run_benchmark,
    tolerance_for_mode,
    write_rows,
)
from fracbpx.services.logger import get_run_logger
from fracbpx.services.theory import run_theory_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMPARISON_FAILED = 1
EXIT_CONFIG_ERROR = 2

REFERENCE_ALIASES = {
    "table1": BenchMode.POSITIVE,
    "table2": BenchMode.NEGATIVE,
}

_reports_adapter = TypeAdapter(list[InequalityReport])


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}")


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracbpx",
        description="Benchmark multilevel preconditioners for the discrete fractional Laplacian",
    )
    parser.add_argument(
        "--mode", choices=[m.value for m in BenchMode], default=BenchMode.POSITIVE.value
    )
    parser.add_argument("--s", type=_float_list, help="comma list of exponents")
    parser.add_argument("--n", type=_int_list, help="comma list of fine-mesh element counts")
    parser.add_argument("--levels", type=int, default=settings.levels)
    parser.add_argument("--tol", type=float, default=settings.tol)
    parser.add_argument("--max-iter", type=int, default=settings.max_iter)
    parser.add_argument("--seed", type=int, default=settings.seed)
    parser.add_argument(
        "--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value
    )
    parser.add_argument("--out", help="write output here instead of stdout")
    parser.add_argument(
        "--preconditioner",
        choices=[p.value for p in PreconditionerKind],
        default=PreconditionerKind.MULTILEVEL.value,
    )
    parser.add_argument(
        "--compare", help="reference table path, or 'table1' / 'table2' for the shipped data"
    )
    parser.add_argument("--workers", type=int, default=settings.workers)
    parser.add_argument(
        "--exact-max-n",
        type=int,
        default=settings.exact_condition_max_n,
        help="compute the dense exact condition number for N up to this size",
    )
    parser.add_argument(
        "--no-timing", action="store_true", help="write wall_time as 0 for byte-stable output"
    )
    return parser


def config_from_args(args: argparse.Namespace) -> BenchConfig:
    mode = BenchMode(args.mode)
    return BenchConfig(
        mode=mode,
        s_values=args.s if args.s is not None else default_s_values(mode),
        n_values=args.n if args.n is not None else list(DEFAULT_N_VALUES),
        j_levels=args.levels,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        output_format=OutputFormat(args.format),
        output_path=args.out,
        preconditioner=PreconditionerKind(args.preconditioner),
        compare_path=args.compare,
        exact_condition_max_n=args.exact_max_n,
        workers=args.workers,
        record_timing=not args.no_timing,
    )


def resolve_reference(compare: str) -> Path:
    if compare in REFERENCE_ALIASES:
        return reference_table_path(REFERENCE_ALIASES[compare])
    path = Path(compare)
    if not path.exists():
        raise ValueError(f"reference table {compare!r} not found")
    return path


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def run_bench_command(
    config: BenchConfig, settings: Settings, reference: Optional[Path] = None
) -> int:
    rows = run_benchmark(config)
    text = write_rows(rows, config.output_format, config.output_path)
    if config.output_path is None:
        sys.stdout.write(text)

    passed = None
    if reference is not None:
        report = compare_to_reference(rows, reference, tolerance_for_mode(config.mode, settings))
        passed = report.passed
        logger.info(
            "compared %d cells against %s: %d flagged, %d unmatched",
            len(report.cells),
            reference,
            len(report.flagged_cells),
            report.unmatched_rows,
        )

    if settings.record_runs:
        try:
            get_run_logger(settings.logs_dir).log_benchmark(config, rows, passed)
        except OSError as e:
            logger.warning("failed to record run: %s", e)

    return EXIT_COMPARISON_FAILED if passed is False else EXIT_OK


def run_theory_command(config: BenchConfig, settings: Settings) -> int:
    reports = run_theory_suite(seed=config.seed)
    _emit(_reports_adapter.dump_json(reports, indent=2).decode() + "\n", config.output_path)

    if settings.record_runs:
        try:
            get_run_logger(settings.logs_dir).log_theory(reports)
        except OSError as e:
            logger.warning("failed to record run: %s", e)

    return EXIT_OK if all(r.passed for r in reports) else EXIT_COMPARISON_FAILED


def dispatch(args: argparse.Namespace, settings: Settings) -> int:
    # only configuration problems map to exit 2; failures during a run propagate
    try:
        config = config_from_args(args)
        reference = (
            resolve_reference(config.compare_path)
            if config.compare_path and config.mode != BenchMode.THEORY
            else None
        )
    except (ValidationError, ValueError) as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG_ERROR

    if config.mode == BenchMode.THEORY:
        return run_theory_command(config, settings)
    return run_bench_command(config, settings, reference)
