import numpy as np
import pytest

from mixedelastic.mesh import build_square_mesh
from mixedelastic.polys import line_quadrature
from mixedelastic.spaces import (AuxDofMap, DispDofMap, StressDofMap,
                                 count_disp_dofs, count_stress_dofs)


# [PAPER] total unknowns of the published tables
PUBLISHED = {1: [(16, 1891), (32, 7363)], 2: [(8, 1811), (16, 7075)], 3: [(4, 971), (8, 3763)]}


@pytest.mark.parametrize('k', [1, 2, 3])
def test_dof_counts(k):
    for n, total in PUBLISHED[k]:
        m = build_square_mesh(n)
        assert count_stress_dofs(m, k) + count_disp_dofs(m, k) == total
        assert StressDofMap(m, k).ndofs == count_stress_dofs(m, k)
        assert DispDofMap.for_stress_degree(m, k).ndofs == count_disp_dofs(m, k)


def test_bad_degree():
    with pytest.raises(ValueError):
        StressDofMap(build_square_mesh(1), 4)
    with pytest.raises(ValueError):
        DispDofMap(build_square_mesh(1), -1)


def poly_tensor(deg, rng):
    c = rng.standard_normal((3, deg + 1, deg + 1))

    def f(x, y):
        out = np.zeros(np.shape(x) + (2, 2))
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                mono = x ** a * y ** b
                out[..., 0, 0] += c[0, a, b] * mono
                out[..., 0, 1] += c[1, a, b] * mono
                out[..., 1, 1] += c[2, a, b] * mono
        out[..., 1, 0] = out[..., 0, 1]
        return out
    return f


@pytest.mark.parametrize('k', [1, 2, 3])
def test_interpolation_reproduces_polynomials(k):
    rng = np.random.default_rng(k)
    m = build_square_mesh(3)
    sdm = StressDofMap(m, k)
    f = poly_tensor(k, rng)
    c = sdm.interpolate(f)
    bary = rng.dirichlet([1, 1, 1], 5)
    pts = m.to_physical(bary)
    np.testing.assert_allclose(sdm.evaluate(c, bary), f(pts[..., 0], pts[..., 1]), atol=1e-11)


@pytest.mark.parametrize('k', [1, 2, 3])
def test_random_fields_have_continuous_normal_trace(k):
    # 50 random coefficient vectors; the normal trace agrees across every interior edge
    rng = np.random.default_rng(10 + k)
    m = build_square_mesh(3)
    sdm = StressDofMap(m, k)
    s, _ = line_quadrature(2 * k)
    inner = ~m.boundary_edge
    nu = m.edge_normal[inner]
    for _ in range(50):
        c = rng.standard_normal(sdm.ndofs)
        a = np.einsum('eqab,eb->eqa', sdm.evaluate_on_edges(c, s, 0)[inner], nu)
        b = np.einsum('eqab,eb->eqa', sdm.evaluate_on_edges(c, s, 1)[inner], nu)
        np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize('k', [2, 3])
def test_tangential_component_is_discontinuous(k):
    # the element-local t t^T functions make the full tensor jump
    rng = np.random.default_rng(0)
    m = build_square_mesh(2)
    sdm = StressDofMap(m, k)
    s, _ = line_quadrature(2)
    c = rng.standard_normal(sdm.ndofs)
    a = sdm.evaluate_on_edges(c, s, 0)[~m.boundary_edge]
    b = sdm.evaluate_on_edges(c, s, 1)[~m.boundary_edge]
    assert np.abs(a - b).max() > 1e-3


def test_vertex_dofs_shared():
    m = build_square_mesh(2)
    sdm = StressDofMap(m, 2)
    v = np.flatnonzero(~m.boundary_vertex)[0]
    owners = np.flatnonzero((m.triangles == v).any(axis=1))
    loc = [np.flatnonzero(m.triangles[t] == v)[0] for t in owners]
    dofs = {tuple(sdm.cell_dofs[t, 3 * i:3 * i + 3]) for t, i in zip(owners, loc)}
    assert dofs == {(3 * v, 3 * v + 1, 3 * v + 2)}


@pytest.mark.parametrize('k', [1, 2, 3])
def test_divergence_matches_finite_differences(k):
    rng = np.random.default_rng(k)
    m = build_square_mesh(2)
    sdm = StressDofMap(m, k)
    c = rng.standard_normal(sdm.ndofs)
    bary = np.array([[0.2, 0.3, 0.5]])
    div = sdm.divergence(c, bary)
    g = m.grad_lambda
    h = 1e-6
    # d/dx_d along barycentric directions: x -> bary moves by h * grad l
    fd = np.zeros_like(div)
    for d in range(2):
        bp = bary[None] + h * g[:, :, d][:, None, :]
        bm = bary[None] - h * g[:, :, d][:, None, :]
        vp = np.stack([sdm.evaluate(c, bp[t])[t] for t in range(m.num_triangles)])
        vm = np.stack([sdm.evaluate(c, bm[t])[t] for t in range(m.num_triangles)])
        fd += (vp - vm)[..., :, d] / (2 * h)
    np.testing.assert_allclose(div, fd, atol=1e-6)


def test_disp_project_and_interpolate():
    m = build_square_mesh(2)
    for deg in (0, 1, 2):
        ddm = DispDofMap(m, deg)

        def f(x, y):
            return np.stack([x ** deg + 0.5, 2.0 - y ** deg], axis=-1)
        bary = np.array([[0.1, 0.6, 0.3]])
        pts = m.to_physical(bary)
        want = f(pts[..., 0], pts[..., 1])
        np.testing.assert_allclose(ddm.evaluate(ddm.project(f), bary), want, atol=1e-12)
        np.testing.assert_allclose(ddm.evaluate(ddm.interpolate(f), bary), want, atol=1e-12)


def test_aux_map():
    m = build_square_mesh(3)
    adm = AuxDofMap(m)
    assert adm.ndofs == 2 * 4
    vals = adm.nodal_values(np.arange(adm.ndofs, dtype=float))
    assert np.all(vals[m.boundary_vertex] == 0)
    np.testing.assert_allclose(adm.interpolate(lambda x, y: np.stack([x, y], -1)).reshape(-1, 2),
                               m.vertices[m.interior_vertices])
