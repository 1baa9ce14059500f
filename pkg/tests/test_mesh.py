import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixedelastic.mesh import (build_hierarchy, build_square_mesh, dump_mesh,
                               element_geometry, refine_uniform)


@pytest.mark.parametrize('n, counts', [(1, (4, 5, 2)), (2, (9, 16, 8)), (16, (289, 800, 512))])
def test_counts(n, counts):
    m = build_square_mesh(n)
    assert (m.num_vertices, m.num_edges, m.num_triangles) == counts


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 12))
def test_euler_and_area(n):
    m = build_square_mesh(n)
    assert m.num_vertices - m.num_edges + m.num_triangles == 1
    assert np.all(m.areas > 0)
    assert np.isclose(m.areas.sum(), 4.0)
    assert m.boundary_edge.sum() == 4 * n
    assert m.boundary_vertex.sum() == 4 * n


def test_bad_n():
    with pytest.raises(ValueError):
        build_square_mesh(0)
    with pytest.raises(ValueError):
        build_hierarchy(0)


def test_diagonal_direction():
    m = build_square_mesh(1)
    # both triangles share the bottom-left to top-right diagonal
    shared = set(m.triangles[0]) & set(m.triangles[1])
    pts = {tuple(m.vertices[v]) for v in shared}
    assert pts == {(-1.0, -1.0), (1.0, 1.0)}


def test_edge_orientation_and_normals():
    m = build_square_mesh(3)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    d = m.vertices[m.edges[:, 1]] - m.vertices[m.edges[:, 0]]
    np.testing.assert_allclose(m.edge_tangent * m.edge_length[:, None], d)
    np.testing.assert_allclose(np.einsum('ea,ea->e', m.edge_tangent, m.edge_normal), 0, atol=1e-15)
    # outward normals point away from the centroid
    c = m.vertices[m.triangles].mean(axis=1)
    for i in range(3):
        e = m.tri_to_edge[:, i]
        mid = 0.5 * (m.vertices[m.edges[e, 0]] + m.vertices[m.edges[e, 1]])
        assert np.all(np.einsum('ta,ta->t', mid - c, m.outward_normals[:, i]) > 0)
    # the two neighbours of an interior edge see opposite signs
    inner = ~m.boundary_edge
    t0, t1 = m.edge_to_tri[inner].T
    l0, l1 = m.edge_local[inner].T
    assert np.all(m.tri_edge_sign[t0, l0] == -m.tri_edge_sign[t1, l1])


def test_grad_lambda():
    m = build_square_mesh(2)
    np.testing.assert_allclose(m.grad_lambda.sum(axis=1), 0, atol=1e-14)
    p = m.vertices[m.triangles]
    # grad l_i . (x_j - x_0) = delta_ij - delta_i0
    for j in (1, 2):
        got = np.einsum('tid,td->ti', m.grad_lambda, p[:, j] - p[:, 0])
        want = np.zeros(3)
        want[j], want[0] = 1, -1
        np.testing.assert_allclose(got, np.broadcast_to(want, got.shape), atol=1e-13)


def test_refinement_nested():
    m = build_square_mesh(2)
    f = refine_uniform(m)
    assert (f.num_vertices, f.num_edges, f.num_triangles) == (25, 56, 32)
    assert f.n == 4 and f.level == 1
    np.testing.assert_array_equal(f.vertices[:m.num_vertices], m.vertices)
    mid = 0.5 * (f.vertices[f.vertex_parents[:, 0]] + f.vertices[f.vertex_parents[:, 1]])
    np.testing.assert_allclose(mid, f.vertices)
    assert np.isclose(f.areas.sum(), 4.0)
    assert np.allclose(f.areas, f.areas[0])


def test_hierarchy():
    h = build_hierarchy(16)
    assert [m.n for m in h.meshes] == [2, 4, 8, 16]
    assert len(h) == 4 and h.finest.n == 16
    assert [m.n for m in build_hierarchy(12).meshes] == [3, 6, 12]


def test_edge_bary_points():
    m = build_square_mesh(2)
    s = np.array([0.0, 0.3, 1.0])
    eb = m.edge_bary(s)
    for side in range(2):
        t = m.edge_to_tri[:, side]
        ok = t >= 0
        x = np.einsum('eqi,eid->eqd', eb[ok, side], m.vertices[m.triangles[t[ok]]])
        want = ((1 - s)[None, :, None] * m.vertices[m.edges[ok, 0]][:, None]
                + s[None, :, None] * m.vertices[m.edges[ok, 1]][:, None])
        np.testing.assert_allclose(x, want, atol=1e-14)


def test_element_geometry_and_dump():
    m = build_square_mesh(1)
    g = element_geometry(m, 0)
    assert np.isclose(g.area, 2.0)
    np.testing.assert_allclose(np.linalg.norm(g.tangents[0, 1]), 1.0)
    buf = io.StringIO()
    dump_mesh(m, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == 'vertices 4' and 'triangles 2' in lines and 'edges 5' in lines
