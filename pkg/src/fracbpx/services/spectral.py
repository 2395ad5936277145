"""Generalized eigendecomposition of (A, M) and the fractional matrices built from it.

With A u_i = lambda_i M u_i and U^T M U = I, the matrix realizations are

    A^s       = (M U) Lambda^s (M U)^T        primal -> dual
    (A^s)^-1  = U Lambda^-s U^T               dual -> primal
    M^-1 A^s  = U Lambda^s U^T M              primal -> primal (group property holds here)
"""

import logging
import threading

import numpy as np
import scipy.linalg as sla

from fracbpx.exceptions import NotPositiveDefiniteError
from fracbpx.models.schemas import MeshLevel, SpectralDecomposition, SymmetricSparseMatrix
from fracbpx.services.assembly import assemble_mass, assemble_stiffness

logger = logging.getLogger(__name__)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column positive; argmax takes the lowest index on ties
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def decompose(
    stiffness: SymmetricSparseMatrix, mass: SymmetricSparseMatrix
) -> SpectralDecomposition:
    """Solve A u = lambda M u densely through the Cholesky reduction M = L L^T."""
    if stiffness.dim != mass.dim:
        raise ValueError(f"stiffness has dim {stiffness.dim}, mass has dim {mass.dim}")

    a = stiffness.toarray()
    try:
        lower = sla.cholesky(mass.toarray(), lower=True)
    except sla.LinAlgError as e:
        raise NotPositiveDefiniteError(f"mass matrix is not positive definite: {e}") from e

    # C = L^-1 A L^-T, symmetrized against roundoff
    c = sla.solve_triangular(lower, a, lower=True)
    c = sla.solve_triangular(lower, c.T, lower=True)
    c = 0.5 * (c + c.T)

    eigenvalues, v = sla.eigh(c)
    if eigenvalues[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"pencil has nonpositive eigenvalue {eigenvalues[0]:.3e}; stiffness is not SPD"
        )
    eigenvectors = sla.solve_triangular(lower.T, v, lower=False)

    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=_fix_signs(eigenvectors))


def _powers(eigenvalues: np.ndarray, s: float) -> np.ndarray:
    return np.exp(s * np.log(eigenvalues))


class FractionalOperator:
    """Matrix realization of A_h^s on one mesh level."""

    def __init__(
        self,
        s: float,
        decomposition: SpectralDecomposition,
        mass: SymmetricSparseMatrix,
    ):
        if not -1.0 <= s <= 1.0:
            raise ValueError(f"fractional exponent must lie in [-1, 1], got {s}")
        if decomposition.dim != mass.dim:
            raise ValueError(
                f"decomposition has dim {decomposition.dim}, mass has dim {mass.dim}"
            )
        self.s = s
        self.decomposition = decomposition
        self.mass = mass
        self._mu = mass.entries @ decomposition.eigenvectors
        self._powers = _powers(decomposition.eigenvalues, s)

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    def _check(self, x: np.ndarray) -> None:
        if x.shape[0] != self.dim:
            raise ValueError(f"vector of length {x.shape[0]} does not match dimension {self.dim}")

    def apply(self, primal: np.ndarray) -> np.ndarray:
        """A^s x, primal in, dual out."""
        self._check(primal)
        return self._mu @ (self._powers * (self._mu.T @ primal))

    def solve(self, dual: np.ndarray) -> np.ndarray:
        """(A^s)^-1 b = U Lambda^-s U^T b, dual in, primal out."""
        self._check(dual)
        u = self.decomposition.eigenvectors
        return u @ ((u.T @ dual) / self._powers)

    def __call__(self, primal: np.ndarray) -> np.ndarray:
        return self.apply(primal)

    def matrix(self) -> np.ndarray:
        return (self._mu * self._powers) @ self._mu.T

    def inverse_matrix(self) -> np.ndarray:
        u = self.decomposition.eigenvectors
        return (u / self._powers) @ u.T

    def with_exponent(self, s: float) -> "FractionalOperator":
        return FractionalOperator(s, self.decomposition, self.mass)


def mass_inverse_power(
    decomposition: SpectralDecomposition, mass: SymmetricSparseMatrix, t: float
) -> np.ndarray:
    """Dense M^-1 A^t = U Lambda^t U^T M, defined for any real t."""
    u = decomposition.eigenvectors
    return (u * _powers(decomposition.eigenvalues, t)) @ (mass.entries @ u).T


def group_property_defect(op: FractionalOperator, s: float, t: float) -> float:
    """Relative spectral-norm defect of (M^-1 A^s)(M^-1 A^t) against M^-1 A^(s+t)."""
    lhs = mass_inverse_power(op.decomposition, op.mass, s) @ mass_inverse_power(
        op.decomposition, op.mass, t
    )
    rhs = mass_inverse_power(op.decomposition, op.mass, s + t)
    return float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(rhs, 2))


class LevelOperators:
    """Stiffness, mass and their pencil decomposition for one mesh level."""

    def __init__(self, level: MeshLevel):
        self.level = level
        self.stiffness = assemble_stiffness(level)
        self.mass = assemble_mass(level)
        self.decomposition = decompose(self.stiffness, self.mass)

    def fractional(self, s: float) -> FractionalOperator:
        return FractionalOperator(s, self.decomposition, self.mass)


def build_fractional_operator(level: MeshLevel, s: float) -> FractionalOperator:
    return get_decomposition_cache().get(level).fractional(s)


class DecompositionCache:
    """Per-N memo of level operators; the dense eigensolve does not depend on s."""

    def __init__(self):
        self._entries: dict[int, LevelOperators] = {}
        self._lock = threading.Lock()

    def get(self, level: MeshLevel) -> LevelOperators:
        with self._lock:
            cached = self._entries.get(level.n_elements)
            if cached is None:
                logger.debug("decomposing pencil for N=%d", level.n_elements)
                cached = LevelOperators(level)
                self._entries[level.n_elements] = cached
            return cached

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


# Factory function
_cache_instance: DecompositionCache | None = None
_cache_lock = threading.Lock()


def get_decomposition_cache() -> DecompositionCache:
    global _cache_instance
    # benchmark workers may ask for the cache concurrently
    with _cache_lock:
        if _cache_instance is None:
            _cache_instance = DecompositionCache()
        return _cache_instance


def reset_decomposition_cache():
    """Reset the cache instance (useful for testing)."""
    global _cache_instance
    with _cache_lock:
        _cache_instance = None
