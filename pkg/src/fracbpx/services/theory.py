"""Dense numerical checks of the operator inequalities behind the preconditioner.

Every "X <= Y" between symmetric operators is checked as a statement about
the smallest eigenvalue of Y - X, normalized by the operator scale, so a
report's ``worst_violation`` is negative only when the inequality fails.
"""

import logging

import numpy as np
import scipy.linalg as sla

from fracbpx.models.schemas import InequalityReport, MeshLevel
from fracbpx.services.mesh import MeshHierarchy, build_hierarchy
from fracbpx.services.preconditioner import LevelSmoother
from fracbpx.services.spectral import get_decomposition_cache, group_property_defect

logger = logging.getLogger(__name__)

MAX_RANDOM_DIM = 50
MAX_SMOOTHER_DIM = 255
SPACE_DIMENSION = 1

DEFAULT_EXPONENTS = (0.25, 0.5, 0.75)
GROUP_PROPERTY_PAIRS = ((0.5, -0.5), (0.0, 0.0), (1.0, -1.0))


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def random_spd(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Q D Q^T with Haar-like Q and eigenvalues log-uniform in [1e-2, 1e2]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    d = 10.0 ** rng.uniform(-2.0, 2.0, dim)
    return _sym((q * d) @ q.T)


def random_psd(dim: int, rng: np.random.Generator) -> np.ndarray:
    rank = int(rng.integers(1, dim + 1))
    g = rng.standard_normal((dim, rank))
    scale = 10.0 ** rng.uniform(-2.0, 2.0)
    return _sym(scale * (g @ g.T) / rank)


def matrix_power(a: np.ndarray, s: float) -> np.ndarray:
    if s == 0.0:
        return np.eye(a.shape[0])
    if s == 1.0:
        return a.copy()
    eigenvalues, vectors = sla.eigh(_sym(a))
    powers = np.clip(eigenvalues, 0.0, None) ** s
    return _sym((vectors * powers) @ vectors.T)


def check_loewner_heinz(dim: int, trials: int, s: float, seed: int = 0) -> InequalityReport:
    """A <= B implies A^s <= B^s, on random SPD A and B = A + (random PSD)."""
    if dim > MAX_RANDOM_DIM:
        raise ValueError(f"random inequality checks are limited to dim <= {MAX_RANDOM_DIM}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"operator monotonicity holds for s in [0, 1], got {s}")

    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        a = random_spd(dim, rng)
        b = a + random_psd(dim, rng)
        bs = matrix_power(b, s)
        diff = bs - matrix_power(a, s)
        scale = max(np.linalg.norm(bs, 2), np.finfo(float).tiny)
        worst = min(worst, sla.eigvalsh(_sym(diff))[0] / scale)

    return InequalityReport(
        name=f"loewner-heinz(s={s:g})",
        trials=trials,
        worst_violation=float(worst) if trials else 0.0,
        constants={"dim": float(dim)},
    )


def check_subspace_inequality(hierarchy: MeshHierarchy, s: float) -> InequalityReport:
    """I^T A_fine^s I <= A_coarse^s on every adjacent pair of levels.

    Gaps are generalized eigenvalues of (A_coarse^s - I^T A_fine^s I, M_coarse),
    normalized by the largest eigenvalue of A_coarse^s.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"the subspace estimate holds for s in [0, 1], got {s}")

    cache = get_decomposition_cache()
    worst = np.inf
    largest = 0.0
    for k in range(hierarchy.j_levels - 1):
        coarse = cache.get(hierarchy.levels[k])
        fine = cache.get(hierarchy.levels[k + 1])
        inclusion = hierarchy.prolongations[k].toarray()

        conjugated = inclusion.T @ fine.fractional(s).matrix() @ inclusion
        diff = _sym(coarse.fractional(s).matrix() - conjugated)
        gaps = sla.eigh(diff, coarse.mass.toarray(), eigvals_only=True)
        scale = coarse.decomposition.eigenvalues[-1] ** s

        worst = min(worst, gaps[0] / scale)
        largest = max(largest, gaps[-1] / scale)

    pairs = hierarchy.j_levels - 1
    return InequalityReport(
        name=f"subspace-estimate(s={s:g})",
        trials=pairs,
        worst_violation=float(worst) if pairs else 0.0,
        constants={"largest_gap": float(largest)},
    )


def check_smoother_bounds(level: MeshLevel, s: float) -> InequalityReport:
    """Best C1, C2 in C1 |v|^2 / lambda^s <= <R v, v> <= C2 <A^-s v, v>.

    In dual coordinates f: |v|^2 = f^T M^-1 f and <A^-s v, v> = f^T (A^s)^-1 f.

    Both pencils are SPD, so ``worst_violation`` stays 0 unless C1 comes out
    nonpositive or C2 is not finite. The constants themselves are the result;
    their level independence is read off ``smoother_bound_drift``.
    """
    if level.n_interior_dofs > MAX_SMOOTHER_DIM:
        raise ValueError(
            f"smoother bounds are computed densely up to dim {MAX_SMOOTHER_DIM}, "
            f"got {level.n_interior_dofs}"
        )
    ops = get_decomposition_cache().get(level)
    smoother = np.diag(LevelSmoother.from_matrices(0, ops.stiffness, ops.mass, s).diag)
    lambda_max = ops.decomposition.eigenvalues[-1]

    upper = sla.eigh(smoother, ops.fractional(s).inverse_matrix(), eigvals_only=True)
    lower = sla.eigh(smoother, np.linalg.inv(ops.mass.toarray()), eigvals_only=True)
    c1 = float(lambda_max**s * lower[0])
    c2 = float(upper[-1])

    worst = min(0.0, c1)
    if not np.isfinite(c2):
        worst = -np.inf
    return InequalityReport(
        name=f"smoother-bounds(N={level.n_elements}, s={s:g})",
        trials=1,
        worst_violation=worst,
        constants={"c1": c1, "c2": c2},
    )


def smoother_bound_drift(hierarchy: MeshHierarchy, s: float) -> InequalityReport:
    """C1 and C2 on every smoothed level (k >= 2); both should stay O(1)."""
    reports = [check_smoother_bounds(level, s) for level in hierarchy.levels[1:]]
    if not reports:
        return InequalityReport(name=f"smoother-drift(s={s:g})", trials=0, worst_violation=0.0)

    c1 = [r.constants["c1"] for r in reports]
    c2 = [r.constants["c2"] for r in reports]
    return InequalityReport(
        name=f"smoother-drift(s={s:g})",
        trials=len(reports),
        worst_violation=min(r.worst_violation for r in reports),
        constants={
            "c1_min": min(c1),
            "c1_max": max(c1),
            "c2_min": min(c2),
            "c2_max": max(c2),
        },
    )


def measure_decomposition_constant(level: MeshLevel) -> InequalityReport:
    """Best K0 with sum_nu |v_nu|^2 <= K0 |v|^2 for the nodal splitting v_nu = v(x_nu) phi_nu.

    The splitting's squared norms sum to v^T diag(M) v, so K0 is the largest
    eigenvalue of the pencil (diag M, M). Compared against the bound n + 1.
    """
    mass = get_decomposition_cache().get(level).mass
    k0 = float(
        sla.eigh(np.diag(mass.diagonal()), mass.toarray(), eigvals_only=True)[-1]
    )
    bound = float(SPACE_DIMENSION + 1)
    return InequalityReport(
        name=f"decomposition-constant(N={level.n_elements})",
        trials=1,
        worst_violation=min(0.0, (bound - k0) / bound),
        constants={"k0": k0, "bound": bound},
    )


def check_group_property(
    n_elements: int = 16, pairs: tuple[tuple[float, float], ...] = GROUP_PROPERTY_PAIRS
) -> InequalityReport:
    op = get_decomposition_cache().get(MeshLevel(n_elements=n_elements)).fractional(0.0)
    defects = {f"defect({s:g},{t:g})": group_property_defect(op, s, t) for s, t in pairs}
    return InequalityReport(
        name=f"group-property(N={n_elements})",
        trials=len(pairs),
        worst_violation=-max(defects.values(), default=0.0),
        constants=defects,
    )


def run_theory_suite(
    seed: int = 0,
    dim: int = 10,
    trials: int = 200,
    exponents: tuple[float, ...] = DEFAULT_EXPONENTS,
    n_fine: int = 128,
) -> list[InequalityReport]:
    # coarsest level of two elements, so every adjacent pair up to n_fine is covered
    hierarchy = build_hierarchy(n_fine, int(np.log2(n_fine)))

    reports = [check_loewner_heinz(dim, trials, s, seed) for s in exponents]
    reports += [check_subspace_inequality(hierarchy, s) for s in exponents]
    reports.append(check_group_property())
    reports += [smoother_bound_drift(hierarchy, s) for s in (0.0, 0.5, 1.0)]
    reports.append(measure_decomposition_constant(hierarchy.finest))

    for report in reports:
        if not report.passed:
            logger.warning("%s violated: worst %.3e", report.name, report.worst_violation)
    return reports
