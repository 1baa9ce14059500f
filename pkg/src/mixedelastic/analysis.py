"""Manufactured solutions, mesh-dependent norms, displacement postprocessing
and convergence studies.

Mesh-dependent norms::

    ||tau||_{0,h}^2 = ||tau||_0^2 + sum_F h_F ||tau nu_F||_F^2
    |v|_{1,h}^2    = ||eps_h(v)||_0^2 + sum_F h_F^{-1} ||[v]||_F^2

with ``[v] = v`` on boundary edges.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import sympy

from .assembly import (_strain_of_basis, assemble_1h_gram, assemble_disp_mass,
                       assemble_div, assemble_mass_parts, assemble_system)
from .krylov import gmres_restart, minres
from .mesh import build_square_mesh
from .polys import (lagrange_basis, lagrange_indices, line_quadrature,
                    triangle_quadrature)
from .precond import BlockPrecondConfig, build_preconditioner
from .spaces import DispDofMap, StressDofMap
from .tensors import LameParams, compliance_apply, format_lambda

__all__ = ['ManufacturedCase', 'make_manufactured', 'CASES', 'norm_0h',
           'norm_1h', 'norm_l2_disp', 'postprocess_displacement',
           'merged_system', 'solve_system', 'ErrorReport', 'convergence_study',
           'observed_rates']

CASES = ('poly', 'trig', 'divfree')


def _vector_fn(exprs, args):
    fns = [sympy.lambdify(args, e, 'numpy') for e in exprs]

    def f(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.stack([np.broadcast_to(fn(x, y), x.shape) for fn in fns], axis=-1)
    return f


def _tensor_fn(mat, args):
    flat = _vector_fn([mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]], args)

    def f(x, y):
        v = flat(x, y)
        return v.reshape(v.shape[:-1] + (2, 2))
    return f


@dataclass
class ManufacturedCase:
    """Closed-form exact solution of the homogeneous Dirichlet problem.

    All evaluators take coordinate arrays ``x, y`` and return trailing
    vector (2,) or tensor (2, 2) axes.
    """

    name: str
    params: LameParams
    u: object
    grad_u: object
    sigma: object
    f: object
    div_u: object
    pressure_mean_zero: bool = False
    polynomial_degree: int = None
    exprs: dict = field(default_factory=dict, repr=False)

    def strain(self, x, y):
        g = self.grad_u(x, y)
        return 0.5 * (g + np.swapaxes(g, -1, -2))


def make_manufactured(case, params=None):
    """Build one of the manufactured cases ``'poly'``, ``'trig'`` or
    ``'divfree'``.

    ``divfree`` is divergence free with a zero-mean pressure ``p = x y``
    that enters the stress only in the incompressible limit (for finite
    lambda the pressure ``lambda div u`` vanishes).
    """
    params = params or LameParams()
    if case not in CASES:
        raise ValueError(f'unknown manufactured case {case!r}; choose from {CASES}')
    x, y = sympy.symbols('x y', real=True)
    mu = sympy.nsimplify(params.mu)
    degree = None
    p = sympy.Integer(0)
    if case == 'poly':
        b = (1 - x ** 2) * (1 - y ** 2)
        u = sympy.Matrix([b, 2 * b])
        degree = 4
    elif case == 'trig':
        u = sympy.Matrix([sympy.sin(sympy.pi * x) * sympy.sin(sympy.pi * y),
                          sympy.cos(sympy.pi * x / 2) * sympy.sin(sympy.pi * y)])
    else:
        psi = (1 - x ** 2) ** 2 * (1 - y ** 2) ** 2
        u = sympy.Matrix([sympy.diff(psi, y), -sympy.diff(psi, x)])
        degree = 7
        if params.is_incompressible:
            p = x * y
    if params.is_incompressible and case != 'divfree':
        raise ValueError('the incompressible limit needs the divfree case')
    grad = u.jacobian([x, y])
    eps = (grad + grad.T) / 2
    div = sympy.simplify(grad[0, 0] + grad[1, 1])
    if params.is_incompressible:
        sigma = 2 * mu * eps + p * sympy.eye(2)
    else:
        lam = sympy.nsimplify(params.lam)
        sigma = 2 * mu * eps + lam * div * sympy.eye(2)
    sigma = sigma.applyfunc(sympy.expand)
    f = -sympy.Matrix([sympy.diff(sigma[0, 0], x) + sympy.diff(sigma[0, 1], y),
                       sympy.diff(sigma[1, 0], x) + sympy.diff(sigma[1, 1], y)])
    args = (x, y)
    return ManufacturedCase(
        name=case, params=params, u=_vector_fn(list(u), args),
        grad_u=_tensor_fn(grad, args), sigma=_tensor_fn(sigma, args),
        f=_vector_fn(list(f), args), div_u=_vector_fn([div], args),
        pressure_mean_zero=params.is_incompressible, polynomial_degree=degree,
        exprs=dict(u=u, sigma=sigma, f=f, p=p))


# ---------------------------------------------------------------- norms

def _edge_points(mesh, s):
    lo = mesh.vertices[mesh.edges[:, 0]]
    hi = mesh.vertices[mesh.edges[:, 1]]
    return (1 - s)[None, :, None] * lo[:, None] + s[None, :, None] * hi[:, None]


def _disp_on_edges(ddm, coeffs, s, side):
    mesh = ddm.mesh
    t = mesh.edge_to_tri[:, side]
    ok = t >= 0
    bary = mesh.edge_bary(s)[ok, side]
    phi = lagrange_basis(ddm.degree, bary.reshape(-1, 3)).reshape(ok.sum(), len(s), -1)
    out = np.zeros((mesh.num_edges, len(s), 2))
    out[ok] = np.einsum('eqn,enc->eqc', phi, ddm.local(coeffs)[t[ok]])
    return out


def norm_0h(mesh, sdm, coeffs, exact=None, qdeg=None):
    """``||sigma_h - sigma||_{0,h}``; `exact` defaults to zero.

    The edge terms use the single-valued normal trace of the discrete field
    (taken from the first neighbour) against the exact ``sigma nu``.
    """
    if qdeg is None:
        qdeg = 2 * sdm.k + (8 if exact is not None else 0)
    bary, w = triangle_quadrature(qdeg)
    diff = sdm.evaluate(coeffs, bary)
    if exact is not None:
        pts = mesh.to_physical(bary)
        diff = diff - exact(pts[..., 0], pts[..., 1])
    vol = np.einsum('q,tq,t->', w, np.einsum('tqab,tqab->tq', diff, diff), mesh.areas)
    s, ws = line_quadrature(qdeg)
    ed = sdm.evaluate_on_edges(coeffs, s, side=0)
    if exact is not None:
        xe = _edge_points(mesh, s)
        ed = ed - exact(xe[..., 0], xe[..., 1])
    tn = np.einsum('eqab,eb->eqa', ed, mesh.edge_normal)
    h = mesh.edge_length
    edge = np.einsum('q,eq,e->', ws, np.einsum('eqa,eqa->eq', tn, tn), h * h)
    return math.sqrt(max(vol + edge, 0.0))


def norm_1h(mesh, ddm, coeffs, exact=None, exact_grad=None, qdeg=None):
    """``|u_h - u|_{1,h}`` for a discontinuous displacement field.

    `exact` and `exact_grad` (the displacement and its gradient) default to
    zero; the exact field is assumed continuous so it only enters the jump
    terms on the boundary.
    """
    if qdeg is None:
        qdeg = 2 * ddm.degree + (8 if exact is not None else 0)
    bary, w = triangle_quadrature(qdeg)
    g = ddm.gradient(coeffs, bary) if ddm.degree > 0 else \
        np.zeros((mesh.num_triangles, len(w), 2, 2))
    if exact_grad is not None:
        pts = mesh.to_physical(bary)
        g = g - exact_grad(pts[..., 0], pts[..., 1])
    eps = 0.5 * (g + np.swapaxes(g, -1, -2))
    vol = np.einsum('q,tq,t->', w, np.einsum('tqab,tqab->tq', eps, eps), mesh.areas)
    s, ws = line_quadrature(qdeg)
    jump = np.zeros((mesh.num_edges, len(s), 2))
    for side in range(2):
        t = mesh.edge_to_tri[:, side]
        ok = t >= 0
        sign = np.zeros(mesh.num_edges)
        sign[ok] = mesh.tri_edge_sign[t[ok], mesh.edge_local[ok, side]]
        jump += sign[:, None, None] * _disp_on_edges(ddm, coeffs, s, side)
    if exact is not None:
        bd = mesh.boundary_edge
        xe = _edge_points(mesh, s)[bd]
        t = mesh.edge_to_tri[bd, 0]
        sign = mesh.tri_edge_sign[t, mesh.edge_local[bd, 0]]
        jump[bd] -= sign[:, None, None] * exact(xe[..., 0], xe[..., 1])
    # h_F^{-1} |F| = 1 on every edge
    edge = np.einsum('q,eq->', ws, np.einsum('eqc,eqc->eq', jump, jump))
    return math.sqrt(max(vol + edge, 0.0))


def norm_l2_disp(mesh, ddm, coeffs, exact=None, qdeg=None):
    """``||u_h - u||_0``."""
    if qdeg is None:
        qdeg = 2 * ddm.degree + (8 if exact is not None else 0)
    bary, w = triangle_quadrature(qdeg)
    v = ddm.evaluate(coeffs, bary)
    if exact is not None:
        pts = mesh.to_physical(bary)
        v = v - exact(pts[..., 0], pts[..., 1])
    return math.sqrt(max(np.einsum('q,tqc,tqc,t->', w, v, v, mesh.areas), 0.0))


# ---------------------------------------------------------------- postprocessing

def _post_blocks(mesh, sdm, ddm, sigma, params):
    """Element matrices of the local postprocessing problems."""
    k = sdm.k
    dstar = DispDofMap(mesh, k + 1)
    bary, w = triangle_quadrature(2 * k + 2)
    eps = _strain_of_basis(mesh, dstar, bary)
    area = mesh.areas
    K = np.einsum('q,tqiab,tqjab->tij', w, eps, eps) * area[:, None, None]
    sig = sdm.evaluate(sigma, bary)
    asig = compliance_apply(sig, params)
    r = np.einsum('q,tqab,tqiab->ti', w, asig, eps) * area[:, None]
    psi = lagrange_basis(ddm.degree, bary)
    phi = lagrange_basis(k + 1, bary)
    mix = np.einsum('q,qm,qn->mn', w, psi, phi)
    nm, nn = mix.shape
    C = np.zeros((nm, 2, nn, 2))
    for c in range(2):
        C[:, c, :, c] = mix
    C = C.reshape(2 * nm, 2 * nn)
    return dstar, K, r, C


def postprocess_displacement(mesh, k, sigma, u, params):
    """Local reconstruction of an elementwise P_{k+1} displacement.

    On every element, ``u*`` minimises ``||eps(u*) - A sigma_h||_K`` subject
    to ``Q_h u* = u_h``. The optimality conditions are exactly the strain
    matching against ``(I - Q_h) P_{k+1}`` together with the projection
    constraint; rigid motions are pinned by the constraint.

    Returns
    -------
    ustar : ndarray
        Coefficients in ``DispDofMap(mesh, k + 1)`` numbering.
    dstar : DispDofMap
    """
    if k < 3:
        raise ValueError(f'postprocessing needs k >= 3, got {k}')
    sdm = StressDofMap(mesh, k)
    ddm = DispDofMap.for_stress_degree(mesh, k)
    dstar, K, r, C = _post_blocks(mesh, sdm, ddm, sigma, params)
    nt = mesh.num_triangles
    ns, nc = K.shape[1], C.shape[0]
    A = np.zeros((nt, ns + nc, ns + nc))
    A[:, :ns, :ns] = K
    A[:, :ns, ns:] = C.T[None]
    A[:, ns:, :ns] = C[None]
    mref = ddm.mass_reference()
    Mq = np.kron(mref, np.eye(2))
    rhs = np.concatenate([r, ddm.local(u).reshape(nt, -1) @ Mq.T], axis=1)
    try:
        sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        bad = int(np.argmin(np.abs(np.linalg.det(A))))
        raise np.linalg.LinAlgError(f'singular local postprocessing system on element {bad}')
    return sol[:, :ns].ravel(), dstar


def merged_system(system):
    """Dense matrix and right-hand side of the one-shot formulation whose
    displacement unknown already lives in the elementwise P_{k+1} space.

    Used only to cross-check :func:`postprocess_displacement` on small
    meshes. Unknowns are ``[sigma; u*]``.
    """
    mesh, sdm, ddm, k = system.mesh, system.sdm, system.ddm, system.k
    if k < 3:
        raise ValueError('the merged formulation needs k >= 3')
    dstar = DispDofMap(mesh, k + 1)
    Bs = assemble_div(mesh, sdm, dstar).toarray()
    # (eps(u*) - A sigma, eps((I - Q) v*)) in matrix form
    bary, w = triangle_quadrature(2 * k + 2)
    eps = _strain_of_basis(mesh, dstar, bary)
    area = mesh.areas
    E = np.einsum('q,tqiab,tqjab->tij', w, eps, eps) * area[:, None, None]
    phi = lagrange_basis(sdm.k, bary)[:, sdm.local_node]
    tens = compliance_apply(sdm.cell_tensors, system.params)
    G = np.einsum('q,ql,tlab,tqiab->til', w, phi, tens, eps) * area[:, None, None]
    # coefficient map of Q_h on P_{k+1}, then of the embedding back
    psi = lagrange_basis(ddm.degree, bary)
    phs = lagrange_basis(k + 1, bary)
    Q = np.linalg.solve(ddm.mass_reference(), np.einsum('q,qm,qn->mn', w, psi, phs))
    nodes = lagrange_indices(k + 1) / (k + 1)
    emb = lagrange_basis(ddm.degree, nodes)
    W1 = np.eye(len(phs[0])) - emb @ Q
    W = np.kron(W1, np.eye(2))
    Qv = np.kron(Q, np.eye(2))
    nt = mesh.num_triangles
    WE = np.einsum('ji,tjk->tik', W, E)
    WG = np.einsum('ji,tjl->til', W, G)
    n1, n2 = sdm.ndofs, dstar.ndofs
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = system.M.toarray()
    A[:n1, n1:] = Bs.T
    A[n1:, :n1] = Bs
    for t in range(nt):
        rows = n1 + dstar.cell_dofs[t]
        A[np.ix_(rows, rows)] += WE[t]
        A[np.ix_(rows, sdm.cell_dofs[t])] -= WG[t]
    # -(Q_h f, v*) = -(f, Q_h v*): pull the P_{k-1} load back through Q
    fl = system.f.reshape(nt, -1)
    b = np.zeros(n1 + n2)
    b[n1:] = (fl @ Qv).ravel()
    if system.g is not None:
        b[:n1] = system.g
    return A, b, dstar


# ---------------------------------------------------------------- solving

def _trace_functional(system):
    """Vector c with ``c . sigma = int tr(sigma)``."""
    m_id, _ = assemble_mass_parts(system.mesh, system.sdm)
    delta = system.sdm.interpolate(lambda x, y: np.broadcast_to(np.eye(2), np.shape(x) + (2, 2)))
    return m_id @ delta, delta


def solve_system(system, method='direct', tol=1e-12, maxit=5000, cfg=None):
    """Solve the block system tightly.

    In the incompressible limit the stress is determined up to a multiple
    of the identity; the returned stress has zero mean trace.

    Returns
    -------
    x : ndarray
    info : dict
        ``method``, ``iterations`` and the relative residual.
    """
    A = system.matrix()
    b = system.rhs()
    inc = system.params.is_incompressible
    iters = 0
    if method == 'direct':
        if inc:
            c, _ = _trace_functional(system)
            n = system.ndofs
            cc = np.concatenate([c, np.zeros(system.n_disp)])
            Ab = sp.bmat([[A, sp.csr_matrix(cc[:, None])],
                          [sp.csr_matrix(cc[None, :]), None]], format='csc')
            x = spla.splu(Ab).solve(np.concatenate([b, [0.0]]))[:n]
        else:
            x = spla.splu(A.tocsc()).solve(b)
    elif method in ('minres', 'gmres'):
        outer = 'diagonal' if method == 'minres' else 'triangular'
        cfg = cfg or BlockPrecondConfig(outer=outer)
        P = build_preconditioner(system, cfg)
        if method == 'minres':
            x, rep = minres(A, b, P, tol=tol, maxit=maxit)
        else:
            x, rep = gmres_restart(A, b, P, tol=tol, maxit=maxit)
        if not rep.converged:
            raise RuntimeError(f'{method} did not converge: {rep.message}')
        iters = rep.iterations
    else:
        raise ValueError(f'unknown solve method {method!r}')
    if inc:
        c, delta = _trace_functional(system)
        ns = system.n_stress
        x = x.copy()
        x[:ns] -= (c @ x[:ns]) / (c @ delta) * delta
    res = np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300)
    return x, dict(method=method, iterations=iters, residual=float(res))


# ---------------------------------------------------------------- studies

ERROR_NAMES = ('sigma_0h', 'u_1h', 'Qu_uh_1h', 'Qu_uh_0', 'u_ustar_1h', 'u_ustar_0')


def observed_rates(errors, levels):
    """``log(e_l / e_{l+1}) / log(N_{l+1} / N_l)`` between consecutive levels."""
    e = np.asarray(errors, dtype=float)
    n = np.asarray(levels, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        r = np.log(e[:-1] / e[1:]) / np.log(n[1:] / n[:-1])
    return [float(v) for v in r]


@dataclass
class ErrorReport:
    case: str
    k: int
    lam: float
    levels: list
    dofs: list
    errors: dict
    rates: dict
    exact: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    def finest_rate(self, name):
        return self.rates[name][-1]

    def to_dict(self):
        rows = [dict(level=int(n), dofs=int(d),
                     errors={k: float(v[i]) for k, v in self.errors.items()})
                for i, (n, d) in enumerate(zip(self.levels, self.dofs))]
        rates = {k: [None if not np.isfinite(r) else r for r in v]
                 for k, v in self.rates.items()}
        return dict(case=self.case, k=self.k, **{'lambda': format_lambda(self.lam)},
                    levels=rows, rates=rates, machine_precision=self.exact,
                    solver=self.solver)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def level_errors(system, case, x):
    """All error measures of one discrete solution."""
    mesh, sdm, ddm, k = system.mesh, system.sdm, system.ddm, system.k
    sig, u = system.split(x)
    out = {}
    out['sigma_0h'] = norm_0h(mesh, sdm, sig, case.sigma)
    out['u_1h'] = norm_1h(mesh, ddm, u, case.u, case.grad_u)
    e = ddm.project(case.u) - u
    out['Qu_uh_1h'] = math.sqrt(max(e @ (assemble_1h_gram(mesh, ddm) @ e), 0.0))
    out['Qu_uh_0'] = math.sqrt(max(e @ (assemble_disp_mass(mesh, ddm) @ e), 0.0))
    if k >= 3:
        ustar, dstar = postprocess_displacement(mesh, k, sig, u, system.params)
        out['u_ustar_1h'] = norm_1h(mesh, dstar, ustar, case.u, case.grad_u)
        out['u_ustar_0'] = norm_l2_disp(mesh, dstar, ustar, case.u)
    return out


def convergence_study(case, k, levels, params=None, method='direct', tol=1e-12):
    """Errors and observed rates on the uniform meshes with ``N`` in
    `levels` cells per side.

    `case` is a case id or a :class:`ManufacturedCase`. Error sizes below
    1e-11 relative to the coarsest level are flagged as machine precision;
    their rates carry no information.
    """
    if len(levels) < 2:
        raise ValueError('need at least two levels')
    if isinstance(case, str):
        case = make_manufactured(case, params)
    params = case.params
    errors, dofs, info = {}, [], []
    for N in levels:
        system = assemble_system(build_square_mesh(N), k, params, f=case.f)
        x, inf = solve_system(system, method=method, tol=tol)
        info.append(inf)
        dofs.append(system.ndofs)
        for name, v in level_errors(system, case, x).items():
            errors.setdefault(name, []).append(v)
    rates = {n: observed_rates(v, levels) for n, v in errors.items()}
    scale = max(1.0, max(max(v) for v in errors.values()))
    exact = {n: bool(max(v) < 1e-11 * scale) for n, v in errors.items()}
    return ErrorReport(case=case.name, k=k, lam=params.lam, levels=list(levels),
                       dofs=dofs, errors=errors, rates=rates, exact=exact,
                       solver=dict(method=method, tol=tol,
                                   residuals=[i['residual'] for i in info]))
