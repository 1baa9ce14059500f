"""Sparse assembly of the saddle-point system and the auxiliary problem.

All integrands are polynomial, so element integrals use quadrature exact
for the product degree; edge integrals use Gauss rules on the global edge
parametrisation ``(1 - s) x_lo + s x_hi``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .polys import (lagrange_basis, lagrange_basis_dbary, lagrange_indices,
                    line_quadrature, triangle_quadrature)
from .spaces import AuxDofMap, DispDofMap, StressDofMap
from .tensors import LameParams

__all__ = ['BlockSystem', 'assemble_system', 'assemble_weighted_mass',
           'assemble_mass_parts', 'assemble_div', 'assemble_stabilization',
           'assemble_disp_mass', 'assemble_strain_stiffness',
           'assemble_aux_stiffness', 'assemble_prolongation',
           'assemble_load', 'assemble_dirichlet_load', 'assemble_1h_gram',
           'assemble_0h_gram', 'p1_prolongation', 'stabilization_weight',
           'export_matrix_market']


def _scatter(rows, cols, vals, shape):
    a = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    a = a.tocsr()
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return a


def _cell_matrix(loc, dofs_r, dofs_c, shape):
    r = np.broadcast_to(dofs_r[:, :, None], loc.shape)
    c = np.broadcast_to(dofs_c[:, None, :], loc.shape)
    return _scatter(r, c, loc, shape)


def stabilization_weight(k):
    """eta = 1 for the low-order stabilised elements (k <= 2), else 0."""
    return 1.0 if k <= 2 else 0.0


def assemble_mass_parts(mesh, sdm):
    """Plain L2 mass and the trace-trace mass of the stress space.

    The weighted mass is ``(M_id - c M_tr) / (2 mu)``.
    """
    bary, w = triangle_quadrature(2 * sdm.k)
    phi = lagrange_basis(sdm.k, bary)
    mref = np.einsum('q,qm,qn->mn', w, phi, phi)[np.ix_(sdm.local_node, sdm.local_node)]
    E = sdm.cell_tensors
    ee = np.einsum('tlab,tmab->tlm', E, E)
    tr = np.trace(E, axis1=2, axis2=3)
    area = mesh.areas[:, None, None]
    n = sdm.ndofs
    m_id = _cell_matrix(area * mref * ee, sdm.cell_dofs, sdm.cell_dofs, (n, n))
    m_tr = _cell_matrix(area * mref * tr[:, :, None] * tr[:, None, :],
                        sdm.cell_dofs, sdm.cell_dofs, (n, n))
    return m_id, m_tr


def assemble_weighted_mass(mesh, sdm, params, parts=None):
    """(A sigma, tau) over the stress basis."""
    m_id, m_tr = parts if parts is not None else assemble_mass_parts(mesh, sdm)
    c = params.trace_coefficient
    return ((m_id - c * m_tr) / (2.0 * params.mu)).tocsr()


def assemble_div(mesh, sdm, ddm):
    """(div tau, v): displacement rows, stress columns."""
    k = sdm.k
    bary, w = triangle_quadrature(2 * k)
    psi = lagrange_basis(ddm.degree, bary)
    dphi = lagrange_basis_dbary(k, bary)[:, sdm.local_node]
    # G[m, l, i] = int psi_m dphi_l/dl_i / |K|
    G = np.einsum('q,qm,qli->mli', w, psi, dphi)
    # div(phi_l E_l) = E_l grad(phi_l); its component c is sum_i (E_l grad l_i)_c dphi_l/dl_i
    Eg = np.einsum('tlcd,tid->tlic', sdm.cell_tensors, mesh.grad_lambda)
    loc = np.einsum('mli,tlic->tmcl', G, Eg) * mesh.areas[:, None, None, None]
    loc = loc.reshape(mesh.num_triangles, ddm.nloc, sdm.nloc)
    return _cell_matrix(loc, ddm.cell_dofs, sdm.cell_dofs, (ddm.ndofs, sdm.ndofs))


def _edge_jump_operator(mesh, ddm, s):
    """Jump traces on every edge.

    Returns ``(dofs, J)`` with `dofs` (E, 2*nloc) the displacement unknowns
    of both neighbours and ``J[e, q, c, j]`` the c-th component of the jump
    of basis function ``dofs[e, j]`` at edge point q. The second half of
    `dofs`/`J` is a dummy (zero) block on boundary edges.
    """
    bary = mesh.edge_bary(s)
    ne, nq = mesh.num_edges, len(s)
    psi = lagrange_basis(ddm.degree, bary.reshape(-1, 3)).reshape(ne, 2, nq, -1)
    nloc = ddm.nloc
    dofs = np.zeros((ne, 2, nloc), dtype=np.int64)
    J = np.zeros((ne, nq, 2, 2, nloc))
    for side in range(2):
        t = mesh.edge_to_tri[:, side]
        ok = t >= 0
        sign = np.zeros(ne)
        sign[ok] = mesh.tri_edge_sign[t[ok], mesh.edge_local[ok, side]]
        dofs[ok, side] = ddm.cell_dofs[t[ok]]
        for c in range(2):
            J[:, :, c, side, c::2] = sign[:, None, None] * psi[:, side]
    return dofs.reshape(ne, -1), J.reshape(ne, nq, 2, -1)


def _edge_penalty(mesh, ddm, power):
    """sum_F h_F^power int_F [u].[v] ds."""
    s, w = line_quadrature(2 * ddm.degree)
    dofs, J = _edge_jump_operator(mesh, ddm, s)
    h = mesh.edge_length
    loc = np.einsum('q,eqci,eqcj->eij', w, J, J) * (h ** (power + 1))[:, None, None]
    return _cell_matrix(loc, dofs, dofs, (ddm.ndofs, ddm.ndofs))


def assemble_stabilization(mesh, ddm, k, eta=None):
    """eta sum_F h_F^{-1} int_F [u].[v] ds with [w] = w on boundary edges."""
    if eta is None:
        eta = stabilization_weight(k)
    if eta == 0:
        return sp.csr_matrix((ddm.ndofs, ddm.ndofs))
    return (eta * _edge_penalty(mesh, ddm, -1)).tocsr()


def assemble_disp_mass(mesh, ddm):
    mref = ddm.mass_reference()
    nn = ddm.nnodes
    loc = np.zeros((nn, 2, nn, 2))
    for c in range(2):
        loc[:, c, :, c] = mref
    loc = loc.reshape(ddm.nloc, ddm.nloc)
    loc = mesh.areas[:, None, None] * loc[None]
    return _cell_matrix(loc, ddm.cell_dofs, ddm.cell_dofs, (ddm.ndofs, ddm.ndofs))


def _strain_of_basis(mesh, ddm, bary):
    """eps of each local vector basis function: (T, nq, nloc, 2, 2)."""
    d = lagrange_basis_dbary(ddm.degree, bary)
    g = np.einsum('qni,tid->tqnd', d, mesh.grad_lambda)
    nt, nq, nn, _ = g.shape
    eps = np.zeros((nt, nq, nn, 2, 2, 2))
    for c in range(2):
        eps[:, :, :, c, c, :] += 0.5 * g
        eps[:, :, :, c, :, c] += 0.5 * g
    return eps.reshape(nt, nq, 2 * nn, 2, 2)


def assemble_strain_stiffness(mesh, ddm):
    """Broken (eps_h u, eps_h v) over a discontinuous vector space."""
    bary, w = triangle_quadrature(max(0, 2 * ddm.degree - 2))
    eps = _strain_of_basis(mesh, ddm, bary)
    loc = np.einsum('q,tqiab,tqjab->tij', w, eps, eps) * mesh.areas[:, None, None]
    return _cell_matrix(loc, ddm.cell_dofs, ddm.cell_dofs, (ddm.ndofs, ddm.ndofs))


def assemble_1h_gram(mesh, ddm):
    """Gram matrix of |v|_{1,h}^2 = ||eps_h v||^2 + sum_F h_F^{-1} ||[v]||_F^2."""
    return (assemble_strain_stiffness(mesh, ddm) + _edge_penalty(mesh, ddm, -1)).tocsr()


def assemble_0h_gram(mesh, sdm):
    """Gram matrix of ||tau||_{0,h}^2 = ||tau||^2 + sum_F h_F ||tau nu_F||_F^2."""
    m_id, _ = assemble_mass_parts(mesh, sdm)
    s, w = line_quadrature(2 * sdm.k)
    ne = mesh.num_edges
    t = mesh.edge_to_tri[:, 0]
    bary = mesh.edge_bary(s)[:, 0]
    phi = lagrange_basis(sdm.k, bary.reshape(-1, 3)).reshape(ne, len(s), -1)
    phi = phi[:, :, sdm.local_node]
    En = np.einsum('elab,eb->ela', sdm.cell_tensors[t], mesh.edge_normal)
    h = mesh.edge_length
    loc = np.einsum('q,eqi,eqj,eia,eja->eij', w, phi, phi, En, En) * (h * h)[:, None, None]
    dofs = sdm.cell_dofs[t]
    edge = _cell_matrix(loc, dofs, dofs, (sdm.ndofs, sdm.ndofs))
    return (m_id + edge).tocsr()


def assemble_aux_stiffness(mesh, adm, mu):
    """2 mu (eps(u), eps(v)) for continuous P1 vectors vanishing on the boundary."""
    g = mesh.grad_lambda
    nt = mesh.num_triangles
    eps = np.zeros((nt, 3, 2, 2, 2))
    for c in range(2):
        eps[:, :, c, c, :] += 0.5 * g
        eps[:, :, c, :, c] += 0.5 * g
    eps = eps.reshape(nt, 6, 2, 2)
    loc = 2.0 * mu * np.einsum('tiab,tjab->tij', eps, eps) * mesh.areas[:, None, None]
    vi = adm.vertex_index[mesh.triangles]
    dofs = (2 * vi[:, :, None] + np.arange(2)).reshape(nt, 6)
    valid = (vi >= 0).repeat(2, axis=1)
    keep = valid[:, :, None] & valid[:, None, :]
    r = np.broadcast_to(dofs[:, :, None], loc.shape)[keep]
    c = np.broadcast_to(dofs[:, None, :], loc.shape)[keep]
    return _scatter(r, c, loc[keep], (adm.ndofs, adm.ndofs))


def assemble_prolongation(mesh, adm, ddm, k):
    """Matrix of the map from the auxiliary P1 space into the displacement
    space: inclusion (nodal interpolation) for k >= 2, elementwise mean
    (the L2 projection onto P0) for k = 1."""
    nt = mesh.num_triangles
    if k == 1:
        vals = np.full((1, 3), 1.0 / 3.0)
    else:
        # the hat of local vertex i takes the value l_i at each node
        vals = lagrange_indices(ddm.degree) / ddm.degree
    vi = adm.vertex_index[mesh.triangles]
    nn = vals.shape[0]
    rows, cols, data = [], [], []
    for n in range(nn):
        for i in range(3):
            if vals[n, i] == 0.0:
                continue
            ok = vi[:, i] >= 0
            for c in range(2):
                rows.append(ddm.cell_dofs[ok, 2 * n + c])
                cols.append(2 * vi[ok, i] + c)
                data.append(np.full(ok.sum(), vals[n, i]))
    if not rows:
        return sp.csr_matrix((ddm.ndofs, adm.ndofs))
    return _scatter(np.concatenate(rows), np.concatenate(cols),
                    np.concatenate(data), (ddm.ndofs, adm.ndofs))


def p1_prolongation(coarse_adm, fine_adm, fine_mesh):
    """Interlevel interpolation between nested auxiliary spaces."""
    parents = fine_mesh.vertex_parents
    fi = fine_adm.vertex_index
    ci = coarse_adm.vertex_index
    rows, cols, data = [], [], []
    for j in range(2):
        p = parents[:, j]
        ok = (fi >= 0) & (ci[p] >= 0)
        for c in range(2):
            rows.append(2 * fi[ok] + c)
            cols.append(2 * ci[p[ok]] + c)
            data.append(np.full(ok.sum(), 0.5))
    return _scatter(np.concatenate(rows), np.concatenate(cols),
                    np.concatenate(data), (fine_adm.ndofs, coarse_adm.ndofs))


def assemble_load(mesh, ddm, f, qdeg=None):
    """Right-hand side -(f, v) for the displacement test functions.

    `f` is a constant 2-vector or a callable ``f(x, y) -> (..., 2)``.
    """
    if qdeg is None:
        qdeg = ddm.degree if not callable(f) else ddm.degree + 10
    bary, w = triangle_quadrature(qdeg)
    psi = lagrange_basis(ddm.degree, bary)
    if callable(f):
        pts = mesh.to_physical(bary)
        vals = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
        vals = np.broadcast_to(vals, pts.shape[:2] + (2,))
    else:
        vals = np.broadcast_to(np.asarray(f, dtype=float),
                               (mesh.num_triangles, len(w), 2))
    loc = np.einsum('q,qn,tqc->tnc', w, psi, vals) * mesh.areas[:, None, None]
    return -loc.ravel()


def assemble_dirichlet_load(mesh, sdm, g, qdeg=None):
    """Boundary term int_{dOmega} (tau nu) . g ds for prescribed displacement
    `g(x, y) -> (..., 2)`; zero for the homogeneous problem."""
    if qdeg is None:
        qdeg = sdm.k + 10
    s, w = line_quadrature(qdeg)
    bd = np.flatnonzero(mesh.boundary_edge)
    t = mesh.edge_to_tri[bd, 0]
    bary = mesh.edge_bary(s)[bd, 0]
    phi = lagrange_basis(sdm.k, bary.reshape(-1, 3)).reshape(len(bd), len(s), -1)
    phi = phi[:, :, sdm.local_node]
    x = ((1 - s)[None, :, None] * mesh.vertices[mesh.edges[bd, 0]][:, None]
         + s[None, :, None] * mesh.vertices[mesh.edges[bd, 1]][:, None])
    gv = np.asarray(g(x[..., 0], x[..., 1]), dtype=float)
    nu = mesh.outward_normals[t, mesh.edge_local[bd, 0]]
    En = np.einsum('elab,eb->ela', sdm.cell_tensors[t], nu)
    loc = np.einsum('q,eql,ela,eqa->el', w, phi, En, gv) * mesh.edge_length[bd][:, None]
    out = np.zeros(sdm.ndofs)
    np.add.at(out, sdm.cell_dofs[t].ravel(), loc.ravel())
    return out


@dataclass
class BlockSystem:
    """Saddle-point system [[M, B^T], [B, -C]] [sigma; u] = [g; f].

    `D` is the diagonal of the unweighted (lambda = 0) stress mass, used by
    the preconditioners; `g` is zero unless boundary displacements are
    prescribed.
    """

    M: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    Mu: sp.csr_matrix
    f: np.ndarray
    params: LameParams
    k: int
    n: int
    D: np.ndarray
    mesh: object = field(repr=False, default=None)
    sdm: StressDofMap = field(repr=False, default=None)
    ddm: DispDofMap = field(repr=False, default=None)
    g: np.ndarray = field(repr=False, default=None)

    @property
    def n_stress(self):
        return self.M.shape[0]

    @property
    def n_disp(self):
        return self.B.shape[0]

    @property
    def ndofs(self):
        return self.n_stress + self.n_disp

    def matrix(self):
        return sp.bmat([[self.M, self.B.T], [self.B, -self.C]], format='csr')

    def rhs(self):
        top = np.zeros(self.n_stress) if self.g is None else self.g
        return np.concatenate([top, self.f])

    def split(self, x):
        return x[:self.n_stress], x[self.n_stress:]


def assemble_system(mesh, k, params, f=(1.0, 1.0), g=None):
    """Assemble the full block system on `mesh` with load `f`.

    `g` optionally prescribes the boundary displacement (default zero).
    """
    sdm = StressDofMap(mesh, k)
    ddm = DispDofMap.for_stress_degree(mesh, k)
    parts = assemble_mass_parts(mesh, sdm)
    M = assemble_weighted_mass(mesh, sdm, params, parts)
    if params.lam == 0:
        D = M.diagonal().copy()
    else:
        D = (parts[0].diagonal() / (2.0 * params.mu))
    B = assemble_div(mesh, sdm, ddm)
    C = assemble_stabilization(mesh, ddm, k)
    Mu = assemble_disp_mass(mesh, ddm)
    load = assemble_load(mesh, ddm, f)
    gvec = None if g is None else assemble_dirichlet_load(mesh, sdm, g)
    return BlockSystem(M=M, B=B, C=C, Mu=Mu, f=load, params=params, k=k,
                       n=mesh.n, D=D, mesh=mesh, sdm=sdm, ddm=ddm, g=gvec)


def export_matrix_market(path, A, symmetric=None, comment=''):
    """Write `A` in MatrixMarket coordinate format (1-based indices)."""
    A = sp.coo_matrix(A)
    if symmetric is None:
        symmetric = A.shape[0] == A.shape[1]
        if symmetric and A.nnz:
            scale = abs(A).max()
            symmetric = abs(A - A.T).max() <= 1e-13 * scale
    scipy.io.mmwrite(str(path), A, comment=comment,
                     symmetry='symmetric' if symmetric else 'general',
                     field='real')
