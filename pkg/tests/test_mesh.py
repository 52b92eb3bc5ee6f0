import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscobeam.mesh import Mesh1D, merged_breakpoints, uniform_partition


def test_table_mesh():
    m = uniform_partition(4.0, 20)
    assert m.h_max == pytest.approx(0.2)
    assert m.nodes.size == 21


def test_single_element():
    np.testing.assert_array_equal(uniform_partition(1.0, 1).nodes, [0.0, 1.0])


def test_fine_mesh():
    assert uniform_partition(4.0, 160).h_max == pytest.approx(0.025)


@pytest.mark.parametrize("nodes", [[0.0], [1.0, 2.0], [0.0, 1.0, 1.0], [0.0, 2.0, 1.0]])
def test_rejects_bad_nodes(nodes):
    with pytest.raises(ValueError):
        Mesh1D(nodes)


@pytest.mark.parametrize("L, n", [(0.0, 3), (-1.0, 3), (1.0, 0)])
def test_rejects_bad_partition(L, n):
    with pytest.raises(ValueError):
        uniform_partition(L, n)


@given(st.floats(0.1, 100.0), st.integers(1, 500))
def test_lengths_sum_to_L(L, n):
    m = uniform_partition(L, n)
    assert abs(m.h.sum() - L) <= 1e-14 * L * 10
    assert m.nodes[-1] == L
    assert m.h_max == m.h.max()


@given(st.integers(1, 200))
def test_refinement_halves_h(n):
    m = uniform_partition(4.0, n)
    assert m.refine(2).h_max == pytest.approx(m.h_max / 2, rel=1e-13)
    assert m.is_nested_in(m.refine(2))


def test_locate_and_merge():
    m = uniform_partition(4.0, 4)
    np.testing.assert_array_equal(m.locate([0.0, 0.5, 1.0, 4.0]), [0, 0, 1, 3])
    with pytest.raises(ValueError):
        m.locate(4.5)
    b = merged_breakpoints(uniform_partition(4.0, 2), uniform_partition(4.0, 3))
    np.testing.assert_allclose(b, [0, 4 / 3, 2, 8 / 3, 4])
    assert not uniform_partition(4.0, 2).is_nested_in(uniform_partition(4.0, 3))
