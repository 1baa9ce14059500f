"""Degree-of-freedom maps and field evaluation for the three discrete spaces.

Stress space
    Piecewise P_k symmetric tensors, continuous at vertices and with
    continuous normal trace across edges. Every local
    basis function is a scalar degree-k Lagrange function times a constant
    symmetric tensor:

    * vertex nodes: the three Cartesian tensors, shared by the vertex patch;
    * edge-interior nodes: the frame ``nu nu^T``, ``nu t^T + t nu^T`` (shared
      by the two neighbours, carrying the normal trace) and ``t t^T``
      (element-local, a divergence bubble);
    * element-interior nodes: three element-local Cartesian tensors.

Displacement space
    Discontinuous vector P_{k-1} Lagrange functions.

Auxiliary space
    Continuous vector P1 functions vanishing on the boundary, one pair of
    unknowns per interior vertex.
"""
import numpy as np

from .polys import (lagrange_basis, lagrange_basis_dbary, lagrange_indices,
                    node_kinds, triangle_quadrature)

__all__ = ['StressDofMap', 'DispDofMap', 'AuxDofMap', 'count_stress_dofs',
           'count_disp_dofs', 'bubble_dofs_per_element']

_CART = np.array([[[1.0, 0.0], [0.0, 0.0]],
                  [[0.0, 1.0], [1.0, 0.0]],
                  [[0.0, 0.0], [0.0, 1.0]]])
_CART_DUAL = np.array([[[1.0, 0.0], [0.0, 0.0]],
                       [[0.0, 0.5], [0.5, 0.0]],
                       [[0.0, 0.0], [0.0, 1.0]]])

VERTEX, EDGE_NORMAL, EDGE_TANGENTIAL, INTERIOR = range(4)


def _check_k(k):
    if k not in (1, 2, 3):
        raise ValueError(f'stress degree must be 1, 2 or 3, got {k}')


def bubble_dofs_per_element(k):
    return 3 * (k + 1) * (k + 2) // 2 - 9 - 6 * (k - 1)


def count_stress_dofs(mesh, k):
    _check_k(k)
    return (3 * mesh.num_vertices + 2 * (k - 1) * mesh.num_edges
            + bubble_dofs_per_element(k) * mesh.num_triangles)


def count_disp_dofs(mesh, k):
    _check_k(k)
    return k * (k + 1) * mesh.num_triangles


class StressDofMap:
    """Global numbering: vertex block, then edge block, then element block.

    Attributes
    ----------
    cell_dofs : (T, nloc) int array
        Global index of each local basis function.
    cell_tensors : (T, nloc, 2, 2)
        Constant tensor factor of each local basis function.
    cell_dual : (T, nloc, 2, 2)
        Tensor F with ``F : tau(node)`` the nodal functional of that function.
    local_node : (nloc,) int
        Lagrange node carrying each local function.
    local_kind : (T, nloc) int
        VERTEX, EDGE_NORMAL, EDGE_TANGENTIAL or INTERIOR.
    """

    def __init__(self, mesh, k):
        _check_k(k)
        self.mesh = mesh
        self.k = k
        nv, ne, nt = mesh.num_vertices, mesh.num_edges, mesh.num_triangles
        self.n_vertex = 3 * nv
        self.n_edge = 2 * (k - 1) * ne
        self.n_bubble = bubble_dofs_per_element(k)
        self.ndofs = self.n_vertex + self.n_edge + self.n_bubble * nt

        kind, where = node_kinds(k)
        idx = lagrange_indices(k)
        nnodes = len(idx)
        nloc = 3 * nnodes
        self.local_node = np.repeat(np.arange(nnodes), 3)
        dofs = np.empty((nt, nloc), dtype=np.int64)
        tens = np.empty((nt, nloc, 2, 2))
        dual = np.empty((nt, nloc, 2, 2))
        lkind = np.empty((nt, nloc), dtype=int)
        tri = mesh.triangles
        elem_base = self.n_vertex + self.n_edge + self.n_bubble * np.arange(nt)
        counter = 0
        for n in range(nnodes):
            cols = slice(3 * n, 3 * n + 3)
            if kind[n] == 0:
                v = tri[:, where[n]]
                dofs[:, cols] = 3 * v[:, None] + np.arange(3)
                tens[:, cols] = _CART
                dual[:, cols] = _CART_DUAL
                lkind[:, cols] = VERTEX
            elif kind[n] == 1:
                i = where[n]
                a = (i + 1) % 3
                j = idx[n][(i + 2) % 3]
                e = mesh.tri_to_edge[:, i]
                forward = tri[:, a] == mesh.edges[e, 0]
                pos = np.where(forward, j, k - j)
                base = self.n_vertex + 2 * (k - 1) * e + 2 * (pos - 1)
                dofs[:, 3 * n] = base
                dofs[:, 3 * n + 1] = base + 1
                dofs[:, 3 * n + 2] = elem_base + counter
                counter += 1
                nu = mesh.edge_normal[e]
                t = mesh.edge_tangent[e]
                nn = np.einsum('ta,tb->tab', nu, nu)
                nt_ = np.einsum('ta,tb->tab', nu, t)
                tt = np.einsum('ta,tb->tab', t, t)
                tens[:, 3 * n] = nn
                tens[:, 3 * n + 1] = nt_ + nt_.transpose(0, 2, 1)
                tens[:, 3 * n + 2] = tt
                dual[:, 3 * n] = nn
                dual[:, 3 * n + 1] = 0.5 * (nt_ + nt_.transpose(0, 2, 1))
                dual[:, 3 * n + 2] = tt
                lkind[:, cols] = [EDGE_NORMAL, EDGE_NORMAL, EDGE_TANGENTIAL]
            else:
                dofs[:, cols] = elem_base[:, None] + counter + np.arange(3)
                counter += 3
                tens[:, cols] = _CART
                dual[:, cols] = _CART_DUAL
                lkind[:, cols] = INTERIOR
        assert counter == self.n_bubble
        self.cell_dofs = dofs
        self.cell_tensors = tens
        self.cell_dual = dual
        self.local_kind = lkind

    @property
    def nloc(self):
        return self.cell_dofs.shape[1]

    def interpolate(self, func):
        """Nodal interpolant of a continuous tensor field.

        `func` maps arrays ``x, y`` to ``(..., 2, 2)`` tensors.
        """
        nodes = lagrange_indices(self.k) / self.k
        pts = self.mesh.to_physical(nodes)
        vals = np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float)
        vals = np.broadcast_to(vals, pts.shape[:2] + (2, 2))
        loc = np.einsum('tlab,tlab->tl', self.cell_dual,
                        vals[:, self.local_node])
        out = np.zeros(self.ndofs)
        out[self.cell_dofs.ravel()] = loc.ravel()
        return out

    def basis_values(self, bary):
        """Scalar factor of each local basis function, shape (nq, nloc)."""
        return lagrange_basis(self.k, bary)[:, self.local_node]

    def basis_gradients(self, bary):
        """Physical gradients of the scalar factors, shape (T, nq, nloc, 2)."""
        d = lagrange_basis_dbary(self.k, bary)[:, self.local_node]
        return np.einsum('qli,tid->tqld', d, self.mesh.grad_lambda)

    def evaluate(self, coeffs, bary):
        """Field values at barycentric points in every element: (T, nq, 2, 2)."""
        c = np.asarray(coeffs)[self.cell_dofs]
        phi = self.basis_values(bary)
        return np.einsum('tl,ql,tlab->tqab', c, phi, self.cell_tensors)

    def divergence(self, coeffs, bary):
        """Elementwise divergence (row-wise), shape (T, nq, 2)."""
        c = np.asarray(coeffs)[self.cell_dofs]
        g = self.basis_gradients(bary)
        return np.einsum('tl,tlab,tqlb->tqa', c, self.cell_tensors, g)

    def evaluate_on_edges(self, coeffs, s, side=0):
        """Values of the field on each edge, taken from the neighbour in
        slot `side`, at the points ``(1 - s) x_lo + s x_hi``: (E, n, 2, 2).
        Missing neighbours give zeros."""
        mesh = self.mesh
        t = mesh.edge_to_tri[:, side]
        ok = t >= 0
        bary = mesh.edge_bary(s)[ok, side]
        phi = lagrange_basis(self.k, bary.reshape(-1, 3))
        phi = phi.reshape(ok.sum(), len(s), -1)[:, :, self.local_node]
        c = np.asarray(coeffs)[self.cell_dofs[t[ok]]]
        out = np.zeros((mesh.num_edges, len(s), 2, 2))
        out[ok] = np.einsum('el,eql,elab->eqab', c, phi, self.cell_tensors[t[ok]])
        return out


class DispDofMap:
    """Discontinuous vector Lagrange functions of a given degree.

    Local index ``2 * node + component``; global index
    ``t * nloc + local``.
    """

    def __init__(self, mesh, degree):
        if degree < 0:
            raise ValueError(f'degree must be non-negative, got {degree}')
        self.mesh = mesh
        self.degree = degree
        self.nnodes = len(lagrange_indices(degree))
        self.nloc = 2 * self.nnodes
        self.ndofs = self.nloc * mesh.num_triangles
        self.cell_dofs = (np.arange(mesh.num_triangles)[:, None] * self.nloc
                          + np.arange(self.nloc))

    @classmethod
    def for_stress_degree(cls, mesh, k):
        _check_k(k)
        return cls(mesh, k - 1)

    def local(self, coeffs):
        """Coefficients as a (T, nnodes, 2) array."""
        return np.asarray(coeffs).reshape(-1, self.nnodes, 2)

    def evaluate(self, coeffs, bary):
        phi = lagrange_basis(self.degree, bary)
        return np.einsum('qn,tnc->tqc', phi, self.local(coeffs))

    def gradient(self, coeffs, bary):
        """(T, nq, 2, 2) with entry [..., c, d] = d u_c / d x_d."""
        d = lagrange_basis_dbary(self.degree, bary)
        g = np.einsum('qni,tid->tqnd', d, self.mesh.grad_lambda)
        return np.einsum('tqnd,tnc->tqcd', g, self.local(coeffs))

    def mass_reference(self):
        """int_K phi_m phi_n / |K| (independent of K)."""
        bary, w = triangle_quadrature(2 * self.degree)
        phi = lagrange_basis(self.degree, bary)
        return np.einsum('q,qm,qn->mn', w, phi, phi)

    def project(self, func, qdeg=None):
        """Elementwise L2 projection of a vector field ``func(x, y) -> (..., 2)``."""
        if qdeg is None:
            qdeg = self.degree + 10
        bary, w = triangle_quadrature(qdeg)
        phi = lagrange_basis(self.degree, bary)
        pts = self.mesh.to_physical(bary)
        vals = np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float)
        rhs = np.einsum('q,qn,tqc->tnc', w, phi, vals)
        minv = np.linalg.inv(self.mass_reference())
        return np.einsum('mn,tnc->tmc', minv, rhs).ravel()

    def interpolate(self, func):
        """Nodal interpolant (exact for fields of degree <= `degree`)."""
        if self.degree == 0:
            nodes = np.array([[1 / 3, 1 / 3, 1 / 3]])
        else:
            nodes = lagrange_indices(self.degree) / self.degree
        pts = self.mesh.to_physical(nodes)
        vals = np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float)
        return np.broadcast_to(vals, pts.shape[:2] + (2,)).ravel().copy()


class AuxDofMap:
    """Two unknowns per interior vertex: ``2 * vertex_index[v] + c``."""

    def __init__(self, mesh):
        self.mesh = mesh
        inner = mesh.interior_vertices
        self.vertex_index = np.full(mesh.num_vertices, -1, dtype=np.int64)
        self.vertex_index[inner] = np.arange(len(inner))
        self.ndofs = 2 * len(inner)

    def nodal_values(self, coeffs):
        """Vertex values (V, 2), zero on the boundary."""
        out = np.zeros((self.mesh.num_vertices, 2))
        inner = self.vertex_index >= 0
        out[inner] = np.asarray(coeffs).reshape(-1, 2)
        return out

    def interpolate(self, func):
        pts = self.mesh.vertices[self.mesh.interior_vertices]
        return np.asarray(func(pts[:, 0], pts[:, 1]), dtype=float).reshape(-1, 2).ravel()
