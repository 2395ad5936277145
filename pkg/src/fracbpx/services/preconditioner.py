"""Additive multilevel preconditioners for A_h^s.

For s in [0, 1] the BPX-type operator

    B^s = Q_1^T (A_1^s)^-1 Q_1 + sum_{k=2..J} Q_k^T R_k^s Q_k

uses the exact fractional inverse on the coarsest level and the diagonal
smoother (R_k^s)_ii = 1 / (M_ii^(1-s) A_ii^s) on every finer level. Each level
assembles its own stiffness and mass matrices; coarse fractional operators
are never Galerkin projections of fine ones.

For s in [-1, 0] the sandwich B~^s = B^t A B^t with t = (1 + s)/2 reuses the
positive-exponent operator.

All preconditioners take dual vectors and return primal vectors.
"""

import logging
from abc import ABC, abstractmethod

import numpy as np

from fracbpx.models.schemas import MeshLevel, SymmetricSparseMatrix
from fracbpx.services.assembly import assemble_mass, assemble_stiffness
from fracbpx.services.krylov import assemble_dense
from fracbpx.services.mesh import MeshHierarchy
from fracbpx.services.spectral import FractionalOperator, get_decomposition_cache

logger = logging.getLogger(__name__)


class DualToPrimalOperator(ABC):
    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def apply(self, dual: np.ndarray) -> np.ndarray: ...

    def __call__(self, dual: np.ndarray) -> np.ndarray:
        return self.apply(dual)

    def _check(self, dual: np.ndarray) -> None:
        if dual.shape[0] != self.dim:
            raise ValueError(
                f"dual vector has length {dual.shape[0]}, preconditioner acts on {self.dim} dofs"
            )

    def to_dense(self) -> np.ndarray:
        """Assemble the operator column by column."""
        return assemble_dense(self.apply, self.dim)


class LevelSmoother:
    def __init__(self, level_index: int, diag: np.ndarray):
        if np.any(diag <= 0.0):
            raise ValueError(f"smoother on level {level_index} has nonpositive entries")
        self.level_index = level_index
        self.diag = diag

    @classmethod
    def from_matrices(
        cls,
        level_index: int,
        stiffness: SymmetricSparseMatrix,
        mass: SymmetricSparseMatrix,
        s: float,
    ) -> "LevelSmoother":
        # log-affine in s between 1/diag(M) (s = 0) and 1/diag(A) (s = 1)
        diag = np.exp((s - 1.0) * np.log(mass.diagonal()) - s * np.log(stiffness.diagonal()))
        return cls(level_index, diag)

    def apply(self, dual: np.ndarray) -> np.ndarray:
        return self.diag * dual


class MultilevelPreconditioner(DualToPrimalOperator):
    def __init__(self, hierarchy: MeshHierarchy, s: float):
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"multilevel preconditioner needs s in [0, 1], got {s}")
        self.s = s
        self.hierarchy = hierarchy
        self.coarse_solver: FractionalOperator = (
            get_decomposition_cache().get(hierarchy.coarsest).fractional(s)
        )
        self.smoothers = [
            self._build_smoother(k, level, s)
            for k, level in enumerate(hierarchy.levels)
            if k > 0
        ]

    @staticmethod
    def _build_smoother(k: int, level: MeshLevel, s: float) -> LevelSmoother:
        return LevelSmoother.from_matrices(k, assemble_stiffness(level), assemble_mass(level), s)

    @property
    def dim(self) -> int:
        return self.hierarchy.finest.n_interior_dofs

    def apply(self, dual: np.ndarray) -> np.ndarray:
        self._check(dual)
        restricted = self.hierarchy.restrict_dual_cascade(dual)

        # accumulate from the coarsest level upward: x_k = I_{k-1} x_{k-1} + R_k Q_k b
        x = self.coarse_solver.solve(restricted[0])
        for smoother in self.smoothers:
            k = smoother.level_index
            x = self.hierarchy.prolongate(k - 1, x) + smoother.apply(restricted[k])
        return x


class SandwichPreconditioner(DualToPrimalOperator):
    """B~^s = B^((1+s)/2) A_h B^((1+s)/2) for s in [-1, 0]."""

    def __init__(self, hierarchy: MeshHierarchy, s: float):
        if not -1.0 <= s <= 0.0:
            raise ValueError(f"sandwich preconditioner needs s in [-1, 0], got {s}")
        self.s = s
        self.inner = MultilevelPreconditioner(hierarchy, (1.0 + s) / 2.0)
        self.stiffness = assemble_stiffness(hierarchy.finest)

    @property
    def inner_exponent(self) -> float:
        return self.inner.s

    @property
    def dim(self) -> int:
        return self.inner.dim

    def apply(self, dual: np.ndarray) -> np.ndarray:
        self._check(dual)
        primal = self.inner.apply(dual)
        return self.inner.apply(self.stiffness.matvec(primal))


class SpectralPreconditioner(DualToPrimalOperator):
    """Exact (A_h^s)^-1 from the fine-level decomposition; the reference realization."""

    def __init__(self, hierarchy: MeshHierarchy, s: float):
        self.s = s
        self.operator = get_decomposition_cache().get(hierarchy.finest).fractional(s)

    @property
    def dim(self) -> int:
        return self.operator.dim

    def apply(self, dual: np.ndarray) -> np.ndarray:
        return self.operator.solve(dual)


def build_preconditioner(hierarchy: MeshHierarchy, s: float) -> MultilevelPreconditioner:
    precond = MultilevelPreconditioner(hierarchy, s)
    logger.debug("built B^s for s=%.2f on %d levels", s, hierarchy.j_levels)
    return precond


def build_tilde_preconditioner(hierarchy: MeshHierarchy, s: float) -> SandwichPreconditioner:
    precond = SandwichPreconditioner(hierarchy, s)
    logger.debug(
        "built B~^s for s=%.2f (inner exponent %.2f) on %d levels",
        s,
        precond.inner_exponent,
        hierarchy.j_levels,
    )
    return precond


def build_for_exponent(
    hierarchy: MeshHierarchy, s: float, sandwich_at_zero: bool = False
) -> DualToPrimalOperator:
    """B^s for s > 0, B~^s for s < 0; at s = 0 either, as requested."""
    if s < 0.0 or (s == 0.0 and sandwich_at_zero):
        return build_tilde_preconditioner(hierarchy, s)
    return build_preconditioner(hierarchy, s)
