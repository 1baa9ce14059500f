"""Quadrature rules and Lagrange bases on triangles, in barycentric coordinates.

Every element-level integral in the package goes through the helpers here.
Points are always given as barycentric triples ``(l0, l1, l2)`` so that the
same tables serve every triangle of a mesh; physical gradients follow from
``grad phi = sum_i dphi/dl_i * grad l_i``.
"""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ['triangle_quadrature', 'line_quadrature', 'lagrange_indices',
           'lagrange_basis', 'lagrange_basis_dbary', 'node_kinds',
           'barycentric_monomials']


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Collapsed Gauss rule on a triangle, exact for polynomials of `degree`.

    Returns
    -------
    bary : (n, 3) ndarray
        Barycentric coordinates of the points.
    weights : (n,) ndarray
        Weights normalised to sum to one, so ``int_K f = |K| * sum(w * f)``.
    """
    n = max(1, (degree + 2) // 2)
    # Gauss-Jacobi in the collapsed direction absorbs the Jacobian (1 - u).
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = np.polynomial.legendre.leggauss(n)
    u = (tj + 1.0) / 2.0
    v = (tl + 1.0) / 2.0
    uu, vv = np.meshgrid(u, v, indexing='ij')
    x = uu
    y = vv * (1.0 - uu)
    w = np.outer(wj / 4.0, wl / 2.0) * 2.0
    bary = np.column_stack([1.0 - x.ravel() - y.ravel(), x.ravel(), y.ravel()])
    bary.flags.writeable = False
    w = w.ravel()
    w.flags.writeable = False
    return bary, w


@lru_cache(maxsize=None)
def line_quadrature(degree):
    """Gauss-Legendre rule on [0, 1] exact for `degree`; weights sum to one."""
    n = max(1, (degree + 2) // 2)
    t, w = np.polynomial.legendre.leggauss(n)
    s = (t + 1.0) / 2.0
    w = w / 2.0
    s.flags.writeable = False
    w.flags.writeable = False
    return s, w


@lru_cache(maxsize=None)
def lagrange_indices(m):
    """Multi-indices of the degree-`m` Lagrange nodes.

    Order: the three vertices, then the interior nodes of local edge 0, 1, 2
    (edge i is opposite vertex i and runs from vertex i+1 to vertex i+2),
    then the element-interior nodes. For ``m == 0`` the single node is the
    barycenter, encoded as ``(0, 0, 0)``.
    """
    if m == 0:
        idx = np.zeros((1, 3), dtype=int)
        idx.flags.writeable = False
        return idx
    nodes = []
    for i in range(3):
        a = np.zeros(3, dtype=int)
        a[i] = m
        nodes.append(a)
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        for j in range(1, m):
            alpha = np.zeros(3, dtype=int)
            alpha[a] = m - j
            alpha[b] = j
            nodes.append(alpha)
    for a0 in range(1, m):
        for a1 in range(1, m - a0):
            a2 = m - a0 - a1
            if a2 >= 1:
                nodes.append(np.array([a0, a1, a2]))
    idx = np.array(nodes, dtype=int)
    idx.flags.writeable = False
    return idx


def node_kinds(m):
    """Classify the nodes of :func:`lagrange_indices` as vertex/edge/interior.

    Returns ``(kind, where)`` where `kind` is 0 (vertex), 1 (edge) or 2
    (interior); `where` is the local vertex or edge number (-1 for interior).
    """
    idx = lagrange_indices(m)
    kind = np.full(len(idx), 2, dtype=int)
    where = np.full(len(idx), -1, dtype=int)
    if m == 0:
        return kind, where
    for n, alpha in enumerate(idx):
        zeros = np.flatnonzero(alpha == 0)
        if len(zeros) == 2:
            kind[n] = 0
            where[n] = int(np.flatnonzero(alpha)[0])
        elif len(zeros) == 1:
            kind[n] = 1
            where[n] = int(zeros[0])
    return kind, where


def _factor(m, a, z):
    # prod_{j<a} (m z - j) / (j + 1) and its derivative in z
    val = np.ones_like(z)
    der = np.zeros_like(z)
    for j in range(a):
        f = (m * z - j) / (j + 1)
        der = der * f + val * m / (j + 1)
        val = val * f
    return val, der


def lagrange_basis(m, bary):
    """Values of the degree-`m` Lagrange basis at barycentric points.

    Parameters
    ----------
    m : int
        Polynomial degree (0 allowed).
    bary : (n, 3) array_like

    Returns
    -------
    (n, nbasis) ndarray
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    idx = lagrange_indices(m)
    if m == 0:
        return np.ones((len(bary), 1))
    out = np.ones((len(bary), len(idx)))
    for n, alpha in enumerate(idx):
        for i in range(3):
            out[:, n] *= _factor(m, alpha[i], bary[:, i])[0]
    return out


def lagrange_basis_dbary(m, bary):
    """Partial derivatives of the Lagrange basis w.r.t. each barycentric
    coordinate, treated as independent variables: shape (n, nbasis, 3)."""
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    idx = lagrange_indices(m)
    out = np.zeros((len(bary), len(idx), 3))
    if m == 0:
        return out
    for n, alpha in enumerate(idx):
        vals = [_factor(m, alpha[i], bary[:, i]) for i in range(3)]
        for i in range(3):
            d = vals[i][1].copy()
            for j in range(3):
                if j != i:
                    d *= vals[j][0]
            out[:, n, i] = d
    return out


@lru_cache(maxsize=None)
def _monomial_exponents(m):
    return np.array([(a, b, m - a - b) for a in range(m, -1, -1)
                     for b in range(m - a, -1, -1)], dtype=int)


def barycentric_monomials(m, bary):
    """Homogeneous barycentric monomials l0^a l1^b l2^c with a+b+c = m.

    They span P_m on a triangle since the coordinates sum to one.
    Returns (n, (m+1)(m+2)/2).
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    ex = _monomial_exponents(m)
    return np.prod(bary[:, None, :] ** ex[None, :, :], axis=2)
