import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracbpx.models.schemas import MeshLevel
from fracbpx.services.mesh import MeshHierarchy, build_hierarchy, prolongation_matrix


def test_prolongation_columns_are_coarse_hats_at_fine_nodes():
    p = prolongation_matrix(MeshLevel(n_elements=4)).toarray()
    assert p.shape == (7, 3)
    np.testing.assert_allclose(p[:, 0], [0.5, 1.0, 0.5, 0, 0, 0, 0])
    np.testing.assert_allclose(p[:, 2], [0, 0, 0, 0, 0.5, 1.0, 0.5])
    np.testing.assert_allclose(p.sum(axis=0), 2.0)


def test_prolongation_interpolates_linearly(rng):
    coarse = MeshLevel(n_elements=8)
    v = rng.standard_normal(coarse.n_interior_dofs)
    fine = prolongation_matrix(coarse) @ v

    padded = np.concatenate([[0.0], v, [0.0]])
    np.testing.assert_allclose(fine[1::2], v)
    np.testing.assert_allclose(fine[0::2], 0.5 * (padded[:-1] + padded[1:]))


def test_build_hierarchy_levels():
    hierarchy = build_hierarchy(32, 5)
    assert [lvl.n_elements for lvl in hierarchy.levels] == [2, 4, 8, 16, 32]
    assert hierarchy.j_levels == 5
    assert hierarchy.coarsest.n_elements == 2
    assert hierarchy.finest.n_elements == 32
    assert [p.shape for p in hierarchy.prolongations] == [(3, 1), (7, 3), (15, 7), (31, 15)]


def test_single_level_hierarchy():
    hierarchy = build_hierarchy(16, 1)
    assert hierarchy.j_levels == 1
    assert hierarchy.prolongations == ()
    x = np.arange(15.0)
    np.testing.assert_allclose(hierarchy.restrict_dual_cascade(x)[0], x)


@pytest.mark.parametrize("n_fine, j_levels", [(30, 5), (16, 5), (0, 1), (8, 0)])
def test_build_hierarchy_rejects_bad_sizes(n_fine, j_levels):
    with pytest.raises(ValueError):
        build_hierarchy(n_fine, j_levels)


def test_hierarchy_rejects_inconsistent_levels():
    levels = [MeshLevel(n_elements=4), MeshLevel(n_elements=12)]
    with pytest.raises(ValueError, match="expected 8"):
        MeshHierarchy(levels, [prolongation_matrix(levels[0])])
    with pytest.raises(ValueError, match="prolongations"):
        MeshHierarchy([MeshLevel(n_elements=4)], [prolongation_matrix(levels[0])])


def test_transfer_dimension_checks():
    hierarchy = build_hierarchy(16, 3)
    with pytest.raises(ValueError):
        hierarchy.prolongate(0, np.ones(7))
    with pytest.raises(ValueError):
        hierarchy.restrict_dual(0, np.ones(3))
    with pytest.raises(ValueError):
        hierarchy.prolongate(2, np.ones(15))
    with pytest.raises(ValueError):
        hierarchy.restrict_dual_cascade(np.ones(14))


def test_cascade_matches_single_restrictions(rng):
    hierarchy = build_hierarchy(32, 4)
    b = rng.standard_normal(31)
    cascade = hierarchy.restrict_dual_cascade(b)
    assert [v.shape[0] for v in cascade] == [3, 7, 15, 31]
    np.testing.assert_allclose(cascade[2], hierarchy.restrict_dual(2, b))
    np.testing.assert_allclose(
        cascade[0], hierarchy.restrict_dual(0, hierarchy.restrict_dual(1, cascade[2]))
    )


def test_prolongate_to_finest_preserves_nodal_values():
    hierarchy = build_hierarchy(32, 4)
    coarse_nodes = hierarchy.coarsest.nodes()
    fine = hierarchy.prolongate_to_finest(0, coarse_nodes * (1.0 - coarse_nodes))
    # a piecewise-linear interpolant agrees with the coarse values at coarse nodes
    np.testing.assert_allclose(fine[7::8], coarse_nodes * (1.0 - coarse_nodes))
    np.testing.assert_allclose(hierarchy.prolongate_to_finest(3, np.ones(31)), np.ones(31))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), level_index=st.integers(0, 2))
def test_restriction_is_adjoint_of_prolongation(seed, level_index):
    hierarchy = build_hierarchy(32, 4)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(hierarchy.levels[level_index].n_interior_dofs)
    b = rng.standard_normal(hierarchy.levels[level_index + 1].n_interior_dofs)
    lhs = hierarchy.prolongate(level_index, x) @ b
    rhs = x @ hierarchy.restrict_dual(level_index, b)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
