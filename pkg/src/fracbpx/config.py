from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_TOLERANCE = 1e-15
DEFAULT_MAX_ITER = 500
DEFAULT_LEVELS = 5


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="FRACBPX_",
        extra="ignore",
    )

    # Solver defaults (overridable per run from the CLI)
    levels: int = DEFAULT_LEVELS
    tol: float = DEFAULT_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0

    # Benchmark
    exact_condition_max_n: int = 128
    workers: int = 1

    # Run ledger and diagnostics
    logs_dir: str = "logs"
    record_runs: bool = True
    log_level: str = "INFO"

    # Regression tolerances against the reference tables
    positive_condition_rtol: float = 0.15
    positive_iteration_atol: int = 3
    positive_iteration_rtol: float = 0.20
    negative_condition_rtol: float = 0.20
    negative_iteration_atol: int = 5
    negative_iteration_rtol: float = 0.25


@lru_cache
def get_settings() -> Settings:
    return Settings()
