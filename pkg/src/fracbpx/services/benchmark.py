"""Experiment grids: solve A_h^s u = f by PCG for every (s, N) cell.

Positive mode preconditions with B^s, negative mode with the sandwich B~^s
(including s = 0, whose reference values come from B~ with inner exponent
1/2). ``--preconditioner spectral`` swaps in the exact inverse for comparison.
"""

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import TypeAdapter

from fracbpx.config import Settings
from fracbpx.exceptions import NotPositiveDefiniteError, SolverBreakdownError
from fracbpx.models.schemas import (
    CSV_HEADER,
    BenchConfig,
    BenchMode,
    BenchRow,
    CellDeviation,
    ComparisonReport,
    ComparisonTolerance,
    OutputFormat,
    PreconditionerKind,
    ReferenceCell,
    SolveReport,
)
from fracbpx.services.krylov import cg_iteration_bound, exact_condition_number, pcg
from fracbpx.services.mesh import MeshHierarchy, build_hierarchy
from fracbpx.services.preconditioner import (
    DualToPrimalOperator,
    SpectralPreconditioner,
    build_for_exponent,
)
from fracbpx.services.spectral import get_decomposition_cache

logger = logging.getLogger(__name__)

POSITIVE_S_VALUES = tuple(round(0.1 * i, 1) for i in range(11))
NEGATIVE_S_VALUES = tuple(round(-1.0 + 0.1 * i, 1) for i in range(11))
DEFAULT_N_VALUES = (32, 64, 128, 256, 512)

_rows_adapter = TypeAdapter(list[BenchRow])


def default_s_values(mode: BenchMode) -> list[float]:
    if mode == BenchMode.NEGATIVE:
        return list(NEGATIVE_S_VALUES)
    return list(POSITIVE_S_VALUES)


def reference_table_path(mode: BenchMode) -> Path:
    """Shipped reference data for the positive or negative grid."""
    if mode == BenchMode.THEORY:
        raise ValueError("theory mode has no reference table")
    return Path(str(resources.files("fracbpx") / "data" / f"table_{mode.value}.csv"))


def tolerance_for_mode(mode: BenchMode, settings: Settings) -> ComparisonTolerance:
    if mode == BenchMode.NEGATIVE:
        return ComparisonTolerance(
            condition_rtol=settings.negative_condition_rtol,
            iteration_atol=settings.negative_iteration_atol,
            iteration_rtol=settings.negative_iteration_rtol,
        )
    return ComparisonTolerance(
        condition_rtol=settings.positive_condition_rtol,
        iteration_atol=settings.positive_iteration_atol,
        iteration_rtol=settings.positive_iteration_rtol,
    )


def cell_seeds(seed: int) -> tuple[int, int]:
    """Independent seeds for the right-hand side and the initial guess."""
    rhs_seed, guess_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(rhs_seed), int(guess_seed)


def _preconditioner_for(
    config: BenchConfig, hierarchy: MeshHierarchy, s: float
) -> DualToPrimalOperator:
    if config.preconditioner == PreconditionerKind.SPECTRAL:
        return SpectralPreconditioner(hierarchy, s)
    return build_for_exponent(hierarchy, s, sandwich_at_zero=config.mode == BenchMode.NEGATIVE)


def run_cell(config: BenchConfig, s: float, n: int) -> BenchRow:
    hierarchy = build_hierarchy(n, config.j_levels)
    system = get_decomposition_cache().get(hierarchy.finest).fractional(s)
    precond = _preconditioner_for(config, hierarchy, s)

    rhs_seed, guess_seed = cell_seeds(config.seed)
    rhs = np.random.default_rng(rhs_seed).uniform(-1.0, 1.0, system.dim)

    try:
        _, report = pcg(
            system.apply,
            precond.apply,
            rhs,
            tol=config.tol,
            max_iter=config.max_iter,
            seed=guess_seed,
        )
    except SolverBreakdownError as e:
        logger.warning("solver breakdown at s=%g, N=%d: %s", s, n, e)
        report = e.report or SolveReport(iterations=0, converged=False)

    exact = None
    if n <= config.exact_condition_max_n:
        try:
            exact = exact_condition_number(system.apply, precond.apply, system.dim)
        except NotPositiveDefiniteError as e:
            logger.warning("no exact condition number at s=%g, N=%d: %s", s, n, e)

    if report.converged and report.iterations > cg_iteration_bound(
        report.condition_estimate, config.tol
    ):
        logger.warning(
            "s=%g N=%d took %d iterations, more than CG allows for condition %.2f",
            s,
            n,
            report.iterations,
            report.condition_estimate,
        )

    logger.info(
        "s=%5.2f N=%4d J=%d: %3d iterations, condition %.2f",
        s,
        n,
        config.j_levels,
        report.iterations,
        report.condition_estimate,
    )
    return BenchRow(
        s=s,
        N=n,
        J=config.j_levels,
        iterations=report.iterations,
        condition_estimate=report.condition_estimate,
        exact_condition=exact,
        wall_time=report.wall_time if config.record_timing else 0.0,
        seed=config.seed,
        converged=report.converged,
    )


def run_benchmark(config: BenchConfig) -> list[BenchRow]:
    """One row per (s, N) cell, ordered by (s, N) whatever the completion order."""
    if config.mode == BenchMode.THEORY:
        raise ValueError("theory mode has no benchmark grid")

    cells = sorted({(s, n) for s in config.s_values for n in config.n_values})
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(lambda cell: run_cell(config, *cell), cells))
    return [run_cell(config, s, n) for s, n in cells]


def _format_float(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6g}"


def format_rows(rows: list[BenchRow], fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        return _rows_adapter.dump_json(rows, indent=2, by_alias=True).decode() + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                f"{row.s:g}",
                row.n,
                row.j,
                row.iterations,
                _format_float(row.condition_estimate),
                _format_float(row.exact_condition),
                _format_float(row.wall_time),
                row.seed,
            ]
        )
    return buffer.getvalue()


def write_rows(rows: list[BenchRow], fmt: OutputFormat, path: Optional[str] = None) -> str:
    text = format_rows(rows, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_reference_table(path: str | Path) -> list[ReferenceCell]:
    """CSV with columns s,N,iterations,condition; lines starting with '#' are provenance."""
    lines = [
        line
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    return [ReferenceCell.model_validate(record) for record in csv.DictReader(lines)]


def _cell_key(s: float, n: int) -> tuple[float, int]:
    return round(s, 6), n


def compare_to_reference(
    rows: list[BenchRow],
    reference_table_path: str | Path,
    tolerance: Optional[ComparisonTolerance] = None,
) -> ComparisonReport:
    """Per-cell deviations from a reference table; cells outside tolerance are flagged."""
    tolerance = tolerance or ComparisonTolerance()
    reference = {
        _cell_key(cell.s, cell.n): cell for cell in load_reference_table(reference_table_path)
    }

    cells = []
    unmatched = 0
    for row in rows:
        ref = reference.get(_cell_key(row.s, row.n))
        if ref is None:
            unmatched += 1
            continue
        iteration_deviation = abs(row.iterations - ref.iterations)
        condition_deviation = abs(row.condition_estimate / ref.condition - 1.0)
        flagged = (
            not row.converged
            or iteration_deviation > tolerance.allowed_iterations(ref.iterations)
            or condition_deviation > tolerance.condition_rtol
        )
        cells.append(
            CellDeviation(
                s=row.s,
                N=row.n,
                reference_iterations=ref.iterations,
                measured_iterations=row.iterations,
                iteration_deviation=iteration_deviation,
                reference_condition=ref.condition,
                measured_condition=row.condition_estimate,
                condition_deviation=condition_deviation,
                converged=row.converged,
                flagged=flagged,
            )
        )

    report = ComparisonReport(
        reference_path=str(reference_table_path),
        tolerance=tolerance,
        cells=cells,
        unmatched_rows=unmatched,
    )
    for cell in report.flagged_cells:
        logger.warning(
            "s=%g N=%d off reference: %d vs %d iterations, condition %.2f vs %.2f",
            cell.s,
            cell.n,
            cell.measured_iterations,
            cell.reference_iterations,
            cell.measured_condition,
            cell.reference_condition,
        )
    return report
