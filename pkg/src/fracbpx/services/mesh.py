"""Nested uniform meshes of the unit interval and the transfers between them.

A level with N elements carries the N - 1 interior nodes x_i = i/N. Refining
by bisection puts coarse node i at fine node 2i, and the new odd fine nodes
sit halfway between two coarse nodes (or between a coarse node and the
boundary):

    coarse   0-------1-------2-------3-------4      (N = 4)
    fine     0---1---2---3---4---5---6---7---8      (N = 8)

The prolongation matrix interpolates coarse hat functions at fine nodes, so
its columns read (1/2, 1, 1/2). Its transpose restricts dual vectors.
"""

import logging

import numpy as np
import scipy.sparse as sp

from fracbpx.models.schemas import MeshLevel

logger = logging.getLogger(__name__)

REFINEMENT_FACTOR = 2


def prolongation_matrix(coarse: MeshLevel) -> sp.csr_matrix:
    """Matrix of the inclusion V_coarse -> V_fine for one bisection step."""
    n_coarse = coarse.n_interior_dofs
    n_fine = REFINEMENT_FACTOR * coarse.n_elements - 1

    # zero-based: coarse dof c sits at fine dof 2c + 1, its neighbours at 2c and 2c + 2
    cols = np.repeat(np.arange(n_coarse), 3)
    rows = (2 * cols + 1) + np.tile([-1, 0, 1], n_coarse)
    vals = np.tile([0.5, 1.0, 0.5], n_coarse)

    return sp.coo_matrix((vals, (rows, cols)), shape=(n_fine, n_coarse)).tocsr()


class MeshHierarchy:
    """Levels ordered coarsest first; ``prolongations[k]`` maps level k to level k + 1."""

    def __init__(self, levels: list[MeshLevel], prolongations: list[sp.csr_matrix]):
        if not levels:
            raise ValueError("a hierarchy needs at least one level")
        if len(prolongations) != len(levels) - 1:
            raise ValueError(
                f"{len(levels)} levels need {len(levels) - 1} prolongations, "
                f"got {len(prolongations)}"
            )
        for k, (coarse, fine) in enumerate(zip(levels, levels[1:])):
            if fine.n_elements != REFINEMENT_FACTOR * coarse.n_elements:
                raise ValueError(
                    f"level {k + 1} has {fine.n_elements} elements, expected "
                    f"{REFINEMENT_FACTOR * coarse.n_elements}"
                )
            expected = (fine.n_interior_dofs, coarse.n_interior_dofs)
            if prolongations[k].shape != expected:
                raise ValueError(
                    f"prolongation {k} has shape {prolongations[k].shape}, expected {expected}"
                )
        self.levels = tuple(levels)
        self.prolongations = tuple(prolongations)

    @property
    def j_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> MeshLevel:
        return self.levels[-1]

    @property
    def coarsest(self) -> MeshLevel:
        return self.levels[0]

    def _check_transfer_index(self, level_index: int) -> None:
        if not 0 <= level_index < len(self.prolongations):
            raise ValueError(
                f"level index {level_index} has no prolongation "
                f"(valid: 0..{len(self.prolongations) - 1})"
            )

    def prolongate(self, level_index: int, coarse_primal: np.ndarray) -> np.ndarray:
        """Primal vector on level k -> primal vector of the same function on level k + 1."""
        self._check_transfer_index(level_index)
        expected = self.levels[level_index].n_interior_dofs
        if coarse_primal.shape[0] != expected:
            raise ValueError(
                f"coarse vector has length {coarse_primal.shape[0]}, level {level_index} "
                f"has {expected} interior dofs"
            )
        return self.prolongations[level_index] @ coarse_primal

    def restrict_dual(self, level_index: int, fine_dual: np.ndarray) -> np.ndarray:
        """Dual vector on level k + 1 -> dual vector on level k (transpose of prolongate)."""
        self._check_transfer_index(level_index)
        expected = self.levels[level_index + 1].n_interior_dofs
        if fine_dual.shape[0] != expected:
            raise ValueError(
                f"fine vector has length {fine_dual.shape[0]}, level {level_index + 1} "
                f"has {expected} interior dofs"
            )
        return self.prolongations[level_index].T @ fine_dual

    def restrict_dual_cascade(self, fine_dual: np.ndarray) -> list[np.ndarray]:
        """Q_k b for every level k, coarsest first, by repeated single-level restriction."""
        expected = self.finest.n_interior_dofs
        if fine_dual.shape[0] != expected:
            raise ValueError(
                f"dual vector has length {fine_dual.shape[0]}, finest level has {expected} dofs"
            )
        restricted = [fine_dual]
        for k in range(len(self.prolongations) - 1, -1, -1):
            restricted.append(self.prolongations[k].T @ restricted[-1])
        restricted.reverse()
        return restricted

    def prolongate_to_finest(self, level_index: int, coarse_primal: np.ndarray) -> np.ndarray:
        """Q_k^T applied to a level-k primal vector: the same function on the finest mesh."""
        x = coarse_primal
        for k in range(level_index, len(self.prolongations)):
            x = self.prolongate(k, x)
        return x


def build_hierarchy(n_fine: int, j_levels: int) -> MeshHierarchy:
    """Uniform bisection hierarchy with ``j_levels`` levels ending at ``n_fine`` elements."""
    if n_fine < 1 or j_levels < 1:
        raise ValueError(f"n_fine and j_levels must be positive, got {n_fine} and {j_levels}")
    factor = REFINEMENT_FACTOR ** (j_levels - 1)
    if n_fine % factor:
        raise ValueError(f"n_fine={n_fine} is not divisible by {factor} (J={j_levels})")
    n_coarse = n_fine // factor
    if n_coarse < 2:
        raise ValueError(
            f"coarsest level would have {n_coarse} element(s) and no interior dof "
            f"(n_fine={n_fine}, J={j_levels})"
        )

    levels = [MeshLevel(n_elements=n_coarse * REFINEMENT_FACTOR**k) for k in range(j_levels)]
    prolongations = [prolongation_matrix(level) for level in levels[:-1]]
    logger.debug(
        "built hierarchy with %d levels: %s", j_levels, [lvl.n_elements for lvl in levels]
    )
    return MeshHierarchy(levels, prolongations)
