"""Preconditioned MINRES, restarted GMRES, Lanczos spectral estimates and a
dense reference solver.

Operators are anything :func:`scipy.sparse.linalg.aslinearoperator` accepts
(sparse or dense matrices, ``LinearOperator`` instances). Preconditioners
approximate the inverse and are applied as ``P @ r``.

Both Krylov solvers stop on the *unpreconditioned* relative residual
``||b - A x|| / ||b||``, so counts are comparable across preconditioners.
"""
from dataclasses import dataclass, field
import time
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import aslinearoperator, LinearOperator

__all__ = ['SolveReport', 'BreakdownError', 'minres', 'gmres_restart',
           'lanczos_extreme_eigs', 'dense_solve', 'identity_operator']


class BreakdownError(RuntimeError):
    """Preconditioned inner product was not positive."""


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    message: str = ''

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else float('nan')


def identity_operator(n):
    return LinearOperator((n, n), matvec=lambda x: x.copy(), dtype=float)


def _op(A):
    return None if A is None else aslinearoperator(A)


def minres(A, b, M=None, tol=1e-8, maxit=1000, x0=None, check_every=1):
    """Preconditioned MINRES for symmetric (indefinite) `A`.

    Parameters
    ----------
    A : operator
        Symmetric system operator.
    b : ndarray
    M : operator, optional
        Symmetric positive definite preconditioner (approximate inverse).
    tol : float
        Target for ``||b - A x|| / ||b||``.
    maxit : int
    x0 : ndarray, optional
        Initial guess, zero by default.
    check_every : int
        The true residual is recomputed every this many steps (and the
        history records it then); 1 reproduces the strict criterion.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    A = _op(A)
    n = A.shape[0]
    M = _op(M) if M is not None else identity_operator(n)
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    cfg = dict(solver='minres', tol=tol, maxit=maxit)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, True, [0.0], 0.0, cfg)

    v = b - A @ x
    res = [np.linalg.norm(v) / bnorm]
    if res[0] <= tol:
        return x, SolveReport(0, True, res, time.perf_counter() - t0, cfg)
    z = M @ v
    gamma = float(v @ z)
    if gamma <= 0:
        raise BreakdownError('preconditioner is not positive definite')
    gamma = np.sqrt(gamma)
    v_old = np.zeros(n)
    w = np.zeros(n)
    w_old = np.zeros(n)
    gamma_old = 1.0
    eta = gamma
    c, c_old, s, s_old = 1.0, 1.0, 0.0, 0.0
    converged = False
    message = 'maximum iterations reached'
    it = 0
    for it in range(1, maxit + 1):
        z = z / gamma
        Az = A @ z
        delta = float(Az @ z)
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = M @ v_new
        gamma_new = float(v_new @ z_new)
        if gamma_new < 0:
            raise BreakdownError('preconditioner is not positive definite')
        gamma_new = np.sqrt(gamma_new)
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        x += c_new * eta * w_new
        eta = -s_new * eta

        v_old, v = v, v_new
        w_old, w = w, w_new
        gamma_old, gamma = gamma, gamma_new
        c_old, c = c, c_new
        s_old, s = s, s_new
        z = z_new

        lucky = gamma_new == 0.0
        if it % check_every == 0 or lucky or it == maxit:
            r = np.linalg.norm(b - A @ x) / bnorm
            res.append(r)
            if r <= tol:
                converged = True
                message = 'converged'
                break
        if lucky:
            message = 'Krylov space exhausted'
            break
    return x, SolveReport(it, converged, res, time.perf_counter() - t0, cfg, message)


def gmres_restart(A, b, M=None, restart=20, tol=1e-8, maxit=1000, x0=None):
    """Right-preconditioned restarted GMRES with modified Gram-Schmidt.

    Solves ``A M y = b`` and returns ``x = M y``; the Arnoldi residual
    estimate therefore tracks the unpreconditioned residual. The true
    residual is recomputed at each restart and at exit; `maxit` counts
    inner iterations.
    """
    A = _op(A)
    n = A.shape[0]
    M = _op(M) if M is not None else identity_operator(n)
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    cfg = dict(solver='gmres', tol=tol, maxit=maxit, restart=restart)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, True, [0.0], 0.0, cfg)
    r = b - A @ x
    beta = np.linalg.norm(r)
    res = [beta / bnorm]
    total = 0
    message = 'maximum iterations reached'
    converged = res[0] <= tol
    if converged:
        message = 'converged'
    while not converged and total < maxit:
        m = min(restart, maxit - total)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        for j in range(m):
            Z[j] = M @ V[j]
            w = A @ Z[j]
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            hj1 = H[j + 1, j]
            H[j, j] = cs[j] * H[j, j] + sn[j] * hj1
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_done = j + 1
            est = abs(g[j + 1]) / bnorm
            if est <= tol or hj1 == 0.0:
                res.append(est)
                break
            res.append(est)
            V[j + 1] = w / hj1
        y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x += Z[:j_done].T @ y
        r = b - A @ x
        beta_new = np.linalg.norm(r)
        res[-1] = beta_new / bnorm
        if res[-1] <= tol:
            converged = True
            message = 'converged'
            break
        if beta_new >= beta * (1 - 1e-12):
            message = 'stagnated over a restart cycle'
            break
        beta = beta_new
    return x, SolveReport(total, converged, res, time.perf_counter() - t0, cfg, message)


def lanczos_extreme_eigs(S, X, iters=50, x0=None, seed=0):
    """Ritz estimates of the extreme eigenvalues of ``X S``.

    `S` and `X` must be symmetric positive definite; the Lanczos process runs
    in the ``X^{-1}`` inner product with full reorthogonalisation.

    Returns
    -------
    (lambda_min, lambda_max)
    """
    if iters < 2:
        raise ValueError('need at least 2 Lanczos steps')
    S = _op(S)
    X = _op(X)
    n = S.shape[0]
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(n) if x0 is None else np.array(x0, dtype=float)
    z = X @ r
    beta = np.sqrt(float(r @ z))
    Q, P = [], []
    alphas, betas = [], []
    for j in range(min(iters, n)):
        q = z / beta
        p = r / beta
        Q.append(q)
        P.append(p)
        r = S @ q
        alpha = float(q @ r)
        alphas.append(alpha)
        r = r - alpha * p - (betas[-1] * P[-2] if betas else 0.0)
        # reorthogonalise: <q_i, r> vanishes in exact arithmetic
        for qi, pi in zip(Q, P):
            r = r - float(qi @ r) * pi
        z = X @ r
        bb = float(r @ z)
        if bb <= 1e-28 * alpha * alpha:
            break
        beta = np.sqrt(bb)
        betas.append(beta)
    nb = len(alphas) - 1
    theta = sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas[:nb])) \
        if nb > 0 else np.array(alphas)
    return float(theta[0]), float(theta[-1])


def dense_solve(A, b):
    """LU with partial pivoting; raises ``numpy.linalg.LinAlgError`` when `A`
    is singular to working precision."""
    A = np.asarray(A.toarray() if hasattr(A, 'toarray') else A, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter('error', sla.LinAlgWarning)
        try:
            return sla.solve(A, b)
        except sla.LinAlgWarning as exc:
            raise np.linalg.LinAlgError(f'matrix is singular to working precision: {exc}')
