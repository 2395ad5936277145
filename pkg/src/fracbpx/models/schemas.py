from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from fracbpx.config import DEFAULT_LEVELS, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE

# Most negative normalized eigenvalue an inequality check may report and still pass
VIOLATION_TOLERANCE = 1e-9

CSV_HEADER = (
    "s",
    "N",
    "J",
    "iterations",
    "condition_estimate",
    "exact_condition",
    "wall_time",
    "seed",
)


class BenchMode(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    THEORY = "theory"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class PreconditionerKind(str, Enum):
    MULTILEVEL = "multilevel"
    SPECTRAL = "spectral"


class MeshLevel(BaseModel):
    """Uniform partition of the unit interval with Dirichlet nodes eliminated."""

    model_config = ConfigDict(frozen=True)

    n_elements: int = Field(..., ge=2, description="Number of elements, N = 1/h")

    @computed_field
    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @computed_field
    @property
    def n_interior_dofs(self) -> int:
        return self.n_elements - 1

    def nodes(self) -> np.ndarray:
        """Interior node coordinates, left to right."""
        return np.arange(1, self.n_elements) / self.n_elements


class SymmetricSparseMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(..., ge=1)
    entries: sp.csr_matrix
    is_spd: bool = False

    @model_validator(mode="after")
    def _check_shape_and_symmetry(self) -> "SymmetricSparseMatrix":
        if self.entries.shape != (self.dim, self.dim):
            raise ValueError(
                f"entries have shape {self.entries.shape}, expected {self.dim}x{self.dim}"
            )
        if (self.entries != self.entries.T).nnz:
            raise ValueError("entries are not symmetric")
        return self

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.dim:
            raise ValueError(f"vector of length {x.shape[0]} does not match dimension {self.dim}")
        return self.entries @ x

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal()

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()


class SpectralDecomposition(BaseModel):
    """Eigenpairs of the pencil (A, M), eigenvectors M-orthonormal, eigenvalues ascending."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @model_validator(mode="after")
    def _check_consistency(self) -> "SpectralDecomposition":
        n = self.eigenvalues.shape[0]
        if self.eigenvalues.ndim != 1 or self.eigenvectors.shape != (n, n):
            raise ValueError(
                f"eigenvalues {self.eigenvalues.shape} and eigenvectors "
                f"{self.eigenvectors.shape} are inconsistent"
            )
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        return self

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


class SolveReport(BaseModel):
    iterations: int = Field(..., ge=0)
    converged: bool
    relative_preconditioned_residuals: list[float] = Field(default_factory=list)
    condition_estimate: float = Field(1.0, ge=1.0)
    condition_history: list[float] = Field(default_factory=list)
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    wall_time: float = Field(0.0, ge=0.0)
    seed: Optional[int] = None


class InequalityReport(BaseModel):
    name: str
    trials: int = Field(..., ge=0)
    worst_violation: float = Field(
        ..., description="Most negative eigenvalue of the difference operator, normalized"
    )
    constants: dict[str, float] = Field(default_factory=dict)

    @computed_field
    @property
    def passed(self) -> bool:
        return self.worst_violation >= -VIOLATION_TOLERANCE


class BenchConfig(BaseModel):
    mode: BenchMode
    s_values: list[float] = Field(default_factory=list)
    n_values: list[int] = Field(default_factory=list)
    j_levels: int = Field(DEFAULT_LEVELS, ge=1)
    tol: float = Field(DEFAULT_TOLERANCE, gt=0)
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1)
    seed: int = 0
    output_format: OutputFormat = OutputFormat.CSV
    output_path: Optional[str] = None
    preconditioner: PreconditionerKind = PreconditionerKind.MULTILEVEL
    compare_path: Optional[str] = None
    exact_condition_max_n: int = Field(128, ge=0)
    workers: int = Field(1, ge=1)
    record_timing: bool = True

    @model_validator(mode="after")
    def _check_grid(self) -> "BenchConfig":
        if self.mode == BenchMode.THEORY:
            return self
        if not self.s_values or not self.n_values:
            raise ValueError("benchmark grid needs at least one s value and one N value")
        if self.mode == BenchMode.POSITIVE:
            bad = [s for s in self.s_values if not 0.0 <= s <= 1.0]
            if bad:
                raise ValueError(f"positive mode requires s in [0, 1], got {bad}")
        else:
            bad = [s for s in self.s_values if not -1.0 <= s <= 0.0]
            if bad:
                raise ValueError(f"negative mode requires s in [-1, 0], got {bad}")
        factor = 2 ** (self.j_levels - 1)
        for n in self.n_values:
            if n % factor or n // factor < 2:
                raise ValueError(
                    f"N={n} cannot carry {self.j_levels} levels: it must be divisible by "
                    f"{factor} with at least 2 coarse elements"
                )
        return self


class BenchRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    s: float
    n: int = Field(..., alias="N")
    j: int = Field(..., alias="J")
    iterations: int = Field(..., ge=0)
    condition_estimate: float = Field(..., ge=1.0)
    exact_condition: Optional[float] = None
    wall_time: float = 0.0
    seed: int
    converged: bool = True


class ReferenceCell(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    s: float
    n: int = Field(..., alias="N")
    iterations: int
    condition: float


class ComparisonTolerance(BaseModel):
    condition_rtol: float = Field(0.15, ge=0)
    iteration_atol: int = Field(3, ge=0)
    iteration_rtol: float = Field(0.20, ge=0)

    def allowed_iterations(self, reference: int) -> float:
        return max(float(self.iteration_atol), self.iteration_rtol * reference)


class CellDeviation(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    s: float
    n: int = Field(..., alias="N")
    reference_iterations: int
    measured_iterations: int
    iteration_deviation: int
    reference_condition: float
    measured_condition: float
    condition_deviation: float
    converged: bool = True
    flagged: bool = False


class ComparisonReport(BaseModel):
    reference_path: str
    tolerance: ComparisonTolerance
    cells: list[CellDeviation] = Field(default_factory=list)
    unmatched_rows: int = 0

    @property
    def flagged_cells(self) -> list[CellDeviation]:
        return [cell for cell in self.cells if cell.flagged]

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.flagged_cells
