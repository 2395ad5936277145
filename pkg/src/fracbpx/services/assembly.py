"""P1 stiffness and mass matrices on a uniform mesh, Dirichlet dofs eliminated.

Element integrals are exact: on an element of width h the hat-function
derivatives are ±1/h and the products integrate to h/3 (same node) and h/6
(neighbours), giving

    stiffness = (1/h)  * tridiag(-1, 2, -1)
    mass      = (h/6)  * tridiag( 1, 4,  1)
"""

import numpy as np
import scipy.sparse as sp

from fracbpx.models.schemas import MeshLevel, SymmetricSparseMatrix


def _tridiagonal(n: int, diagonal: float, off_diagonal: float) -> sp.csr_matrix:
    main = np.arange(n)
    upper = np.arange(n - 1)
    rows = np.concatenate([main, upper, upper + 1])
    cols = np.concatenate([main, upper + 1, upper])
    vals = np.concatenate(
        [np.full(n, diagonal), np.full(n - 1, off_diagonal), np.full(n - 1, off_diagonal)]
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(level: MeshLevel) -> SymmetricSparseMatrix:
    n = level.n_interior_dofs
    h = level.h
    return SymmetricSparseMatrix(
        dim=n, entries=_tridiagonal(n, 2.0 / h, -1.0 / h), is_spd=True
    )


def assemble_mass(level: MeshLevel) -> SymmetricSparseMatrix:
    n = level.n_interior_dofs
    h = level.h
    return SymmetricSparseMatrix(
        dim=n, entries=_tridiagonal(n, 2.0 * h / 3.0, h / 6.0), is_spd=True
    )
