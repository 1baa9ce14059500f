"""Symmetric 2x2 tensor algebra.

Tensors are plain ``(..., 2, 2)`` float arrays kept symmetric by
construction. ``LameParams`` carries the material constants, with
``lam = math.inf`` standing for the incompressible limit.
"""
import math
from dataclasses import dataclass

import numpy as np

from .polys import barycentric_monomials

__all__ = ['INFINITY', 'LameParams', 'sym', 'frobenius', 'identity',
           'edge_dyad_T', 'edge_dyad_N', 'compliance_apply', 'connection_EK',
           'parse_lambda', 'format_lambda']

INFINITY = math.inf


def sym(xx, xy, yy):
    """Assemble a symmetric tensor (array) from its three entries."""
    xx, xy, yy = np.broadcast_arrays(np.asarray(xx, float),
                                     np.asarray(xy, float),
                                     np.asarray(yy, float))
    out = np.empty(xx.shape + (2, 2))
    out[..., 0, 0] = xx
    out[..., 0, 1] = xy
    out[..., 1, 0] = xy
    out[..., 1, 1] = yy
    return out


def identity():
    return np.eye(2)


def frobenius(a, b):
    """A : B, broadcast over leading axes."""
    return np.einsum('...ij,...ij->...', a, b)


@dataclass(frozen=True)
class LameParams:
    mu: float = 0.5
    lam: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f'mu must be positive, got {self.mu}')
        if not (self.lam >= 0):
            raise ValueError(f'lambda must be non-negative or inf, got {self.lam}')

    @property
    def is_incompressible(self):
        return math.isinf(self.lam)

    @property
    def trace_coefficient(self):
        """c in  A s = (s - c tr(s) I) / (2 mu); tends to 1/2 as lam -> inf."""
        if self.is_incompressible:
            return 0.5
        return self.lam / (2.0 * self.lam + 2.0 * self.mu)


def parse_lambda(text):
    text = str(text).strip().lower()
    if text in ('inf', '+inf', 'infinity'):
        return INFINITY
    return float(text)


def format_lambda(lam):
    return 'inf' if math.isinf(lam) else f'{lam:g}'


def compliance_apply(sigma, params):
    """Compliance tensor action (sigma - c tr(sigma) I) / (2 mu)."""
    sigma = np.asarray(sigma, dtype=float)
    tr = np.trace(sigma, axis1=-2, axis2=-1)
    c = params.trace_coefficient
    return (sigma - c * tr[..., None, None] * np.eye(2)) / (2.0 * params.mu)


def _check_pair(i, j):
    if not (0 <= i < j <= 2):
        raise ValueError(f'need 0 <= i < j <= 2, got ({i}, {j})')


def edge_dyad_T(geom, i, j):
    """t t^T for the unit tangent of edge x_i x_j."""
    _check_pair(i, j)
    t = geom.tangents[i, j]
    return np.outer(t, t)


def edge_dyad_N(geom, i, j):
    """Dual partner of :func:`edge_dyad_T`: T_ij : N_kl = delta_ik delta_jl."""
    _check_pair(i, j)
    t = geom.tangents[i, j]
    ni, nj = geom.normals[i], geom.normals[j]
    a, b = ni @ t, nj @ t
    if abs(a) < 1e-14 or abs(b) < 1e-14:
        raise ValueError('degenerate element: normal orthogonal to tangent')
    return (np.outer(ni, nj) + np.outer(nj, ni)) / (2.0 * a * b)


_PAIRS = [(0, 1), (0, 2), (1, 2)]


def connection_EK(geom, coeffs, k):
    """Evaluator of sum_{i<j} l_i l_j q_ij T_ij on one element.

    Parameters
    ----------
    geom : ElementGeometry
    coeffs : (3, ndeg) array_like
        Coefficients of q_01, q_02, q_12 in the homogeneous barycentric
        monomials of degree ``k - 2``.
    k : int
        Stress degree, at least 2.

    Returns
    -------
    callable
        Maps barycentric points (n, 3) to tensors (n, 2, 2).
    """
    if k < 2:
        raise ValueError(f'bubbles need k >= 2, got {k}')
    coeffs = np.asarray(coeffs, dtype=float)
    T = np.array([edge_dyad_T(geom, i, j) for i, j in _PAIRS])

    def evaluate(bary):
        bary = np.atleast_2d(np.asarray(bary, dtype=float))
        q = barycentric_monomials(k - 2, bary) @ coeffs.T
        ll = np.column_stack([bary[:, i] * bary[:, j] for i, j in _PAIRS])
        return np.einsum('np,pab->nab', ll * q, T)

    return evaluate
