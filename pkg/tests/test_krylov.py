import numpy as np
import pytest

from fracbpx.exceptions import NotPositiveDefiniteError, SolverBreakdownError
from fracbpx.services.krylov import (
    DENSE_LIMIT,
    assemble_dense,
    cg_iteration_bound,
    exact_condition_number,
    lanczos_extremes,
    pcg,
)
from fracbpx.services.mesh import build_hierarchy
from fracbpx.services.preconditioner import MultilevelPreconditioner
from fracbpx.services.spectral import get_decomposition_cache

DIAGONAL = np.arange(1.0, 11.0)


def diagonal_operator(x):
    return DIAGONAL * x


def identity(x):
    return x.copy()


class TestPcg:
    def test_solves_diagonal_system(self):
        rhs = np.ones(10)
        x, report = pcg(diagonal_operator, identity, rhs, tol=1e-20)
        np.testing.assert_allclose(x, 1.0 / DIAGONAL, rtol=1e-8)
        assert report.converged
        assert report.iterations <= 20

    def test_condition_estimate_recovers_spectrum(self):
        _, report = pcg(diagonal_operator, identity, np.ones(10), tol=1e-20)
        assert report.lambda_min == pytest.approx(1.0, rel=1e-6)
        assert report.lambda_max == pytest.approx(10.0, rel=1e-6)
        assert report.condition_estimate == pytest.approx(10.0, rel=1e-6)

    def test_residual_and_condition_histories(self):
        _, report = pcg(diagonal_operator, identity, np.ones(10), tol=1e-12)
        assert report.relative_preconditioned_residuals[0] == 1.0
        assert len(report.relative_preconditioned_residuals) == report.iterations + 1
        assert len(report.condition_history) == report.iterations
        assert report.relative_preconditioned_residuals[-1] <= 1e-12
        history = np.array(report.condition_history)
        assert np.all(np.diff(history) >= -1e-8 * history[1:])

    def test_same_seed_same_run(self):
        x1, r1 = pcg(diagonal_operator, identity, np.ones(10), seed=7)
        x2, r2 = pcg(diagonal_operator, identity, np.ones(10), seed=7)
        np.testing.assert_array_equal(x1, x2)
        assert r1.relative_preconditioned_residuals == r2.relative_preconditioned_residuals
        assert r1.seed == 7

    def test_max_iter_returns_partial_report(self):
        _, report = pcg(diagonal_operator, identity, np.ones(10), max_iter=3)
        assert not report.converged
        assert report.iterations == 3
        assert report.condition_estimate >= 1.0

    def test_exact_initial_guess_needs_no_iterations(self):
        rhs = DIAGONAL.copy()
        x, report = pcg(diagonal_operator, identity, rhs, initial_guess=np.ones(10))
        assert report.converged
        assert report.iterations == 0
        assert report.condition_estimate == 1.0
        np.testing.assert_array_equal(x, np.ones(10))

    def test_callback_sees_every_iterate(self):
        seen = []
        _, report = pcg(
            diagonal_operator, identity, np.ones(10), callback=lambda k, x: seen.append(k)
        )
        assert seen == list(range(1, report.iterations + 1))

    def test_energy_error_decreases(self):
        exact = 1.0 / DIAGONAL
        errors = []

        def energy_error(_, x):
            e = x - exact
            errors.append(float(e @ diagonal_operator(e)))

        pcg(diagonal_operator, identity, np.ones(10), tol=1e-12, callback=energy_error)
        assert np.all(np.diff(errors) <= 1e-14)

    def test_indefinite_operator_breaks_down(self):
        with pytest.raises(SolverBreakdownError) as excinfo:
            pcg(lambda x: -x, identity, np.ones(5))
        assert excinfo.value.report is not None
        assert not excinfo.value.report.converged

    def test_late_breakdown_keeps_partial_report(self):
        calls = []

        def turns_indefinite(x):
            # initial residual plus two healthy iterations, then negative curvature
            calls.append(1)
            return diagonal_operator(x) if len(calls) <= 3 else -diagonal_operator(x)

        with pytest.raises(SolverBreakdownError, match="iteration 3") as excinfo:
            pcg(turns_indefinite, identity, np.ones(10))
        report = excinfo.value.report
        assert report.iterations == 2
        assert not report.converged
        assert report.condition_estimate >= 1.0

    def test_indefinite_preconditioner_breaks_down(self):
        with pytest.raises(SolverBreakdownError):
            pcg(diagonal_operator, lambda r: -r, np.ones(10))

    @pytest.mark.parametrize("tol", [0.0, -1e-3])
    def test_tolerance_must_be_positive(self, tol):
        with pytest.raises(ValueError):
            pcg(diagonal_operator, identity, np.ones(10), tol=tol)

    def test_energy_error_decreases_on_fractional_system(self):
        hierarchy = build_hierarchy(128, 5)
        system = get_decomposition_cache().get(hierarchy.finest).fractional(0.5)
        rhs = np.random.default_rng(5).uniform(-1.0, 1.0, system.dim)
        exact = system.solve(rhs)
        errors = []

        def energy_error(_, x):
            e = x - exact
            errors.append(float(e @ system.apply(e)))

        pcg(
            system.apply,
            MultilevelPreconditioner(hierarchy, 0.5).apply,
            rhs,
            tol=1e-12,
            callback=energy_error,
        )
        assert len(errors) > 3
        assert np.all(np.diff(errors) <= 1e-12 * errors[0])

    def test_multilevel_estimate_agrees_with_dense_condition(self):
        hierarchy = build_hierarchy(128, 5)
        system = get_decomposition_cache().get(hierarchy.finest).fractional(0.5)
        precond = MultilevelPreconditioner(hierarchy, 0.5)
        rhs = np.random.default_rng(3).uniform(-1.0, 1.0, system.dim)

        _, report = pcg(system.apply, precond.apply, rhs, seed=4)
        exact = exact_condition_number(system.apply, precond.apply, system.dim)
        assert report.converged
        assert report.condition_estimate == pytest.approx(exact, rel=0.10)


def test_lanczos_single_step():
    assert lanczos_extremes([0.5], []) == (2.0, 2.0)


def test_lanczos_ignores_trailing_beta():
    assert lanczos_extremes([0.5, 0.25], [0.2, 0.7]) == lanczos_extremes([0.5, 0.25], [0.2])


def test_lanczos_rejects_missing_betas():
    with pytest.raises(ValueError):
        lanczos_extremes([0.5, 0.25, 0.1], [0.2])


def test_lanczos_two_steps_matches_dense_tridiagonal():
    alphas, betas = [0.5, 0.25], [0.2]
    t = np.array(
        [[1 / 0.5, np.sqrt(0.2) / 0.5], [np.sqrt(0.2) / 0.5, 1 / 0.25 + 0.2 / 0.5]]
    )
    expected = np.linalg.eigvalsh(t)
    np.testing.assert_allclose(lanczos_extremes(alphas, betas), [expected[0], expected[-1]])


class TestExactConditionNumber:
    def test_identity(self):
        assert exact_condition_number(identity, identity, 6) == pytest.approx(1.0)

    def test_diagonal(self):
        assert exact_condition_number(diagonal_operator, identity, 10) == pytest.approx(10.0)

    def test_single_level_preconditioner_is_exact(self):
        hierarchy = build_hierarchy(32, 1)
        system = get_decomposition_cache().get(hierarchy.finest).fractional(0.5)
        precond = MultilevelPreconditioner(hierarchy, 0.5)
        assert exact_condition_number(system.apply, precond.apply, system.dim) == pytest.approx(
            1.0, abs=1e-8
        )

    def test_indefinite_preconditioner(self):
        with pytest.raises(NotPositiveDefiniteError):
            exact_condition_number(diagonal_operator, lambda r: -r, 10)

    def test_dense_limit(self):
        with pytest.raises(ValueError):
            exact_condition_number(identity, identity, DENSE_LIMIT + 1)


def test_assemble_dense_columns():
    np.testing.assert_array_equal(assemble_dense(diagonal_operator, 10), np.diag(DIAGONAL))


class TestIterationBound:
    def test_exact_preconditioner_needs_one_step(self):
        assert cg_iteration_bound(1.0, 1e-15) == 1

    def test_grows_with_condition(self):
        bounds = [cg_iteration_bound(k, 1e-15) for k in (2.0, 10.0, 100.0, 1000.0)]
        assert bounds == sorted(bounds)
        assert bounds[0] < bounds[-1]

    def test_pcg_stays_within_bound(self):
        _, report = pcg(diagonal_operator, identity, np.ones(10), tol=1e-12)
        assert report.iterations <= cg_iteration_bound(10.0, 1e-12)

    @pytest.mark.parametrize("condition, tol", [(0.5, 1e-6), (10.0, 0.0)])
    def test_invalid_arguments(self, condition, tol):
        with pytest.raises(ValueError):
            cg_iteration_bound(condition, tol)
