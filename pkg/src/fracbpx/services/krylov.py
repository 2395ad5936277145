"""Preconditioned conjugate gradients with a Lanczos condition-number estimate.

Convergence is measured by the relative preconditioned residual
<B r_k, r_k> / <B r_0, r_0>. The CG step lengths alpha_j and ratios beta_j
define the Lanczos tridiagonal of B A,

    T[0, 0]     = 1/alpha_0
    T[j, j]     = 1/alpha_j + beta_{j-1}/alpha_{j-1}
    T[j, j + 1] = sqrt(beta_j)/alpha_j

whose extreme eigenvalues (Ritz values) estimate the spectrum of B A.
"""

import logging
import time
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from fracbpx.config import DEFAULT_MAX_ITER, DEFAULT_TOLERANCE
from fracbpx.exceptions import NotPositiveDefiniteError, SolverBreakdownError
from fracbpx.models.schemas import SolveReport

logger = logging.getLogger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]

DENSE_LIMIT = 1024


def lanczos_extremes(alphas: list[float], betas: list[float]) -> tuple[float, float]:
    """Smallest and largest Ritz values from CG coefficients.

    Only the first len(alphas) - 1 betas enter the tridiagonal; a trailing beta
    belongs to a step that was never taken.
    """
    if len(alphas) == 1:
        return 1.0 / alphas[0], 1.0 / alphas[0]
    a = np.asarray(alphas)
    b = np.asarray(betas[: len(alphas) - 1])
    if b.shape[0] != a.shape[0] - 1:
        raise ValueError(f"{len(alphas)} alphas need {len(alphas) - 1} betas, got {len(betas)}")
    diagonal = 1.0 / a
    diagonal[1:] += b / a[:-1]
    off_diagonal = np.sqrt(b) / a[:-1]
    ritz = sla.eigvalsh_tridiagonal(diagonal, off_diagonal)
    return float(ritz[0]), float(ritz[-1])


def _report(
    alphas: list[float],
    betas: list[float],
    residuals: list[float],
    history: list[float],
    converged: bool,
    started: float,
    seed: Optional[int],
) -> SolveReport:
    if alphas:
        lam_min, lam_max = lanczos_extremes(alphas, betas)
        condition = max(lam_max / lam_min, 1.0)
    else:
        lam_min = lam_max = None
        condition = 1.0
    return SolveReport(
        iterations=len(alphas),
        converged=converged,
        relative_preconditioned_residuals=residuals,
        condition_estimate=condition,
        condition_history=history,
        lambda_min=lam_min,
        lambda_max=lam_max,
        wall_time=time.perf_counter() - started,
        seed=seed,
    )


def pcg(
    apply_A: Operator,
    apply_B: Operator,
    rhs: np.ndarray,
    tol: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: Optional[int] = 0,
    initial_guess: Optional[np.ndarray] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve A x = rhs from a random start (uniform on [-1, 1], seeded).

    ``apply_A`` maps primal to dual vectors and ``apply_B`` dual to primal.
    A run that hits ``max_iter`` returns ``converged=False``; a nonpositive
    <B r, r> or <A p, p> raises SolverBreakdownError carrying the partial report.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    started = time.perf_counter()

    if initial_guess is None:
        x = np.random.default_rng(seed).uniform(-1.0, 1.0, rhs.shape[0])
    else:
        x = np.array(initial_guess, dtype=float)

    r = rhs - apply_A(x)
    z = apply_B(r)
    rho = float(r @ z)

    alphas: list[float] = []
    betas: list[float] = []
    residuals = [1.0]
    history: list[float] = []

    if rho == 0.0:
        return x, _report(alphas, betas, residuals, history, True, started, seed)
    if rho < 0.0:
        raise SolverBreakdownError(
            f"<B r_0, r_0> = {rho:.3e} is negative; preconditioner is not SPD",
            _report(alphas, betas, residuals, history, False, started, seed),
        )
    rho0 = rho
    p = z.copy()
    converged = False

    for iteration in range(1, max_iter + 1):
        q = apply_A(p)
        curvature = float(p @ q)
        if curvature <= 0.0:
            raise SolverBreakdownError(
                f"<A p, p> = {curvature:.3e} at iteration {iteration}; operator is not SPD",
                _report(alphas, betas, residuals, history, False, started, seed),
            )
        alpha = rho / curvature
        x += alpha * p
        r -= alpha * q
        alphas.append(alpha)
        if callback is not None:
            callback(iteration, x)

        z = apply_B(r)
        rho_next = float(r @ z)
        if rho_next < 0.0:
            raise SolverBreakdownError(
                f"<B r, r> = {rho_next:.3e} at iteration {iteration}; preconditioner is not SPD",
                _report(alphas, betas, residuals, history, False, started, seed),
            )
        residuals.append(rho_next / rho0)

        lam_min, lam_max = lanczos_extremes(alphas, betas)
        history.append(max(lam_max / lam_min, 1.0))

        if residuals[-1] <= tol:
            converged = True
            break

        beta = rho_next / rho
        betas.append(beta)
        p = z + beta * p
        rho = rho_next

    if not converged:
        logger.warning(
            "PCG stopped after %d iterations at relative residual %.3e (tol %.1e)",
            max_iter,
            residuals[-1],
            tol,
        )
    return x, _report(alphas, betas, residuals, history, converged, started, seed)


def assemble_dense(apply: Operator, dim: int) -> np.ndarray:
    identity = np.eye(dim)
    return np.column_stack([apply(identity[:, i]) for i in range(dim)])


def exact_condition_number(apply_A: Operator, apply_B: Operator, dim: int) -> float:
    """lambda_max / lambda_min of B A from a dense symmetrized eigensolve.

    With B = L L^T, B A is similar to L^T A L, which is symmetric.
    """
    if dim > DENSE_LIMIT:
        raise ValueError(f"dense condition number limited to dim <= {DENSE_LIMIT}, got {dim}")
    a = assemble_dense(apply_A, dim)
    b = assemble_dense(apply_B, dim)
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    try:
        lower = sla.cholesky(b, lower=True)
    except sla.LinAlgError as e:
        raise NotPositiveDefiniteError(f"preconditioner is not positive definite: {e}") from e

    eigenvalues = sla.eigvalsh(lower.T @ a @ lower)
    if eigenvalues[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"preconditioned operator has nonpositive eigenvalue {eigenvalues[0]:.3e}"
        )
    return float(eigenvalues[-1] / eigenvalues[0])


def cg_iteration_bound(condition: float, tol: float) -> int:
    """Iterations after which <B r_k, r_k> / <B r_0, r_0> <= tol is guaranteed.

    From |e_k|_A <= 2 q^k |e_0|_A with q = (sqrt(K) - 1) / (sqrt(K) + 1) and
    lambda_min |e|_A^2 <= <B r, r> <= lambda_max |e|_A^2, in exact arithmetic.
    """
    if condition < 1.0 or tol <= 0.0:
        raise ValueError(f"need condition >= 1 and tol > 0, got {condition} and {tol}")
    if condition == 1.0:
        return 1
    root = np.sqrt(condition)
    q = (root - 1.0) / (root + 1.0)
    return max(1, int(np.ceil(np.log(tol / (4.0 * condition)) / (2.0 * np.log(q)))))
