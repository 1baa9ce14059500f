from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedelastic.polys import (barycentric_monomials, lagrange_basis,
                                lagrange_basis_dbary, lagrange_indices,
                                line_quadrature, node_kinds,
                                triangle_quadrature)


def reference_moment(a, b):
    # int over the unit triangle of x^a y^b, normalised by its area 1/2
    return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize('degree', range(0, 13))
def test_triangle_quadrature_exact(degree):
    bary, w = triangle_quadrature(degree)
    assert np.isclose(w.sum(), 1.0)
    assert np.all(bary >= 0)
    x, y = bary[:, 1], bary[:, 2]
    for a in range(degree + 1):
        b = degree - a
        assert np.isclose(w @ (x ** a * y ** b), reference_moment(a, b), rtol=1e-13)


@pytest.mark.parametrize('degree', range(0, 13))
def test_line_quadrature_exact(degree):
    s, w = line_quadrature(degree)
    for p in range(degree + 1):
        assert np.isclose(w @ s ** p, 1.0 / (p + 1), rtol=1e-13)


@pytest.mark.parametrize('m', range(0, 6))
def test_lagrange_nodal_property(m):
    idx = lagrange_indices(m)
    assert len(idx) == (m + 1) * (m + 2) // 2
    nodes = idx / max(m, 1) if m > 0 else np.array([[1 / 3, 1 / 3, 1 / 3]])
    phi = lagrange_basis(m, nodes)
    if m > 0:
        np.testing.assert_allclose(phi, np.eye(len(idx)), atol=1e-13)


def test_node_ordering_vertices_edges_interior():
    kind, where = node_kinds(3)
    assert list(kind[:3]) == [0, 0, 0]
    assert list(where[:3]) == [0, 1, 2]
    # two nodes per edge, edges in local order, then one interior node
    assert list(kind[3:9]) == [1] * 6
    assert list(where[3:9]) == [0, 0, 1, 1, 2, 2]
    assert kind[9] == 2


@settings(max_examples=40, deadline=None)
@given(m=st.integers(0, 5), pts=st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)),
                                          min_size=1, max_size=6))
def test_partition_of_unity(m, pts):
    p = np.array(pts)
    x = p[:, 0]
    y = p[:, 1] * (1 - x)
    bary = np.column_stack([1 - x - y, x, y])
    np.testing.assert_allclose(lagrange_basis(m, bary).sum(axis=1), 1.0, atol=1e-12)
    # derivatives of a partition of unity sum to zero along every barycentric direction
    d = lagrange_basis_dbary(m, bary).sum(axis=1)
    np.testing.assert_allclose(d - d[:, :1], 0.0, atol=1e-10)


@pytest.mark.parametrize('m', [1, 2, 3, 4])
def test_dbary_matches_finite_differences(m):
    rng = np.random.default_rng(m)
    bary = rng.dirichlet([1, 1, 1], size=4)
    d = lagrange_basis_dbary(m, bary)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (lagrange_basis(m, bary + e) - lagrange_basis(m, bary - e)) / (2 * h)
        np.testing.assert_allclose(d[:, :, i], fd, atol=1e-7)


def test_monomials_count_and_values():
    bary = np.array([[0.2, 0.3, 0.5]])
    v = barycentric_monomials(2, bary)
    assert v.shape == (1, 6)
    assert np.isclose(sorted(v[0])[-1], 0.25)
