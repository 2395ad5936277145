from datetime import datetime
from pathlib import Path

from fracbpx.models.schemas import BenchConfig, BenchRow, InequalityReport


class RunLogger:
    """Markdown ledger of benchmark and theory runs, one file per mode."""

    def __init__(self, logs_dir: str = "logs"):
        self.logs_dir = Path(logs_dir)
        self.logs_dir.mkdir(parents=True, exist_ok=True)

    def _open_entry(self, mode: str, title: str) -> tuple[Path, list[str], datetime]:
        log_file = self.logs_dir / f"{mode}.md"
        now = datetime.now()
        date_str = now.strftime("%Y-%m-%d")

        file_exists = log_file.exists()
        needs_date_header = True
        if file_exists and f"## {date_str}" in log_file.read_text():
            needs_date_header = False

        entry_parts = []
        if not file_exists:
            entry_parts.append(f"# Run Log: {mode}\n")
        if needs_date_header:
            entry_parts.append(f"\n## {date_str}\n")
        entry_parts.append(f"\n### {now.strftime('%H:%M:%S')} {title}")
        return log_file, entry_parts, now

    @staticmethod
    def _append(log_file: Path, entry_parts: list[str]) -> None:
        entry_parts.append("")
        with open(log_file, "a") as f:
            f.write("\n".join(entry_parts))

    def log_benchmark(
        self, config: BenchConfig, rows: list[BenchRow], passed: bool | None = None
    ) -> datetime:
        """Append a benchmark entry with a row-per-cell summary table."""
        log_file, entry_parts, now = self._open_entry(
            config.mode.value, f"{config.preconditioner.value} preconditioner"
        )
        entry_parts.append(
            f"*J={config.j_levels} | tol={config.tol:.0e} | seed={config.seed}*\n"
        )
        if passed is not None:
            entry_parts.append(f"- **Reference comparison**: {'passed' if passed else 'FAILED'}\n")

        entry_parts.append("| s | N | iterations | condition | converged |")
        entry_parts.append("|---|---|---|---|---|")
        for row in rows:
            entry_parts.append(
                f"| {row.s:.1f} | {row.n} | {row.iterations} | "
                f"{row.condition_estimate:.1f} | {'yes' if row.converged else 'no'} |"
            )

        self._append(log_file, entry_parts)
        return now

    def log_theory(self, reports: list[InequalityReport]) -> datetime:
        log_file, entry_parts, now = self._open_entry("theory", "inequality suite")
        for report in reports:
            status = "ok" if report.passed else "VIOLATED"
            entry_parts.append(
                f"- **{report.name}**: {status} (worst {report.worst_violation:.2e}, "
                f"{report.trials} trials)"
            )
        self._append(log_file, entry_parts)
        return now


# Singleton instance
_logger_instance: RunLogger | None = None


def get_run_logger(logs_dir: str = "logs") -> RunLogger:
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = RunLogger(logs_dir)
    return _logger_instance


def reset_run_logger():
    """Reset the logger instance (useful for testing)."""
    global _logger_instance
    _logger_instance = None
