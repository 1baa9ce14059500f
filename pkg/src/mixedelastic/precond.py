"""Smoothers, geometric multigrid on the auxiliary P1 elasticity problem, the
auxiliary space preconditioner for the Schur complement and the block
preconditioners for the saddle-point system.

The Schur complement is replaced by ``S = scale * B D^{-1} B^T + C`` where
``D`` is the diagonal of the stress mass. ``S`` is assembled explicitly so
that Gauss-Seidel has entry access.
"""
from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator
from pyamg.relaxation import relaxation as _relax

from .assembly import (assemble_aux_stiffness, assemble_prolongation,
                       p1_prolongation)
from .mesh import build_hierarchy
from .spaces import AuxDofMap

__all__ = ['gauss_seidel', 'jacobi', 'AuxHierarchy', 'build_aux_hierarchy',
           'vcycle', 'SchurOperator', 'AuxSpacePrecond', 'BlockPrecondConfig',
           'block_diag_operator', 'block_tri_operator', 'block_diag_apply',
           'block_tri_apply', 'build_schur_precond', 'build_preconditioner',
           'check_pairing']

_DIRECTIONS = ('forward', 'backward', 'symmetric')


def _check_diagonal(A):
    d = A.diagonal()
    if np.any(d == 0):
        raise ValueError(f'zero diagonal entry at row {int(np.flatnonzero(d == 0)[0])}')


def gauss_seidel(A, b, x, sweeps=1, direction='forward'):
    """Gauss-Seidel sweeps in natural (forward) or reverse (backward) order.

    Returns a new vector; `x` is left untouched. ``'symmetric'`` performs a
    forward sweep followed by a backward one, `sweeps` times.
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f'direction must be one of {_DIRECTIONS}, got {direction!r}')
    A = sp.csr_matrix(A)
    _check_diagonal(A)
    x = np.array(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if sweeps > 0:
        _relax.gauss_seidel(A, x, b, iterations=sweeps, sweep=direction)
    return x


def jacobi(A, b, x, sweeps=1, omega=0.5):
    """Damped Jacobi; ``omega = 0.5`` keeps it convergent for the matrices
    arising here (at most 4 nonzero blocks per row would need less)."""
    A = sp.csr_matrix(A)
    _check_diagonal(A)
    x = np.array(x, dtype=float)
    if sweeps > 0:
        _relax.jacobi(A, x, np.asarray(b, dtype=float), iterations=sweeps, omega=omega)
    return x


@dataclass
class AuxHierarchy:
    """Stiffness matrices coarse to fine; ``prolongations[l]`` maps level
    ``l`` into level ``l + 1``."""

    matrices: list
    prolongations: list
    coarse_factor: object = None

    def __post_init__(self):
        if not self.matrices:
            raise ValueError('empty hierarchy')
        A0 = self.matrices[0].toarray()
        self.coarse_factor = sla.cho_factor(A0) if A0.size else None

    @property
    def num_levels(self):
        return len(self.matrices)

    def coarse_solve(self, b):
        if self.coarse_factor is None:
            return np.zeros(0)
        return sla.cho_solve(self.coarse_factor, b)


def _vertex_permutation(src, dst):
    """Index array ``p`` with ``dst.vertices[p[i]] == src.vertices[i]``."""
    def keys(v):
        return np.round(v * (1 << 20)).astype(np.int64)
    ks, kd = keys(src.vertices), keys(dst.vertices)
    od = np.lexsort(kd.T[::-1])
    os_ = np.lexsort(ks.T[::-1])
    if not np.array_equal(ks[os_], kd[od]):
        raise ValueError('meshes do not share their vertices')
    p = np.empty(len(ks), dtype=np.int64)
    p[os_] = od
    return p


def build_aux_hierarchy(mesh, mu, coarsest=2):
    """Rediscretised P1 elasticity hierarchy whose finest level lives on
    `mesh` (numbered like `mesh`, which must be a uniform square mesh)."""
    levels = build_hierarchy(mesh.n, coarsest=coarsest).meshes
    adms = [AuxDofMap(m) for m in levels]
    mats = [assemble_aux_stiffness(m, a, mu) for m, a in zip(levels[:-1], adms[:-1])]
    fine_adm = AuxDofMap(mesh)
    mats.append(assemble_aux_stiffness(mesh, fine_adm, mu))
    pro = [p1_prolongation(adms[i], adms[i + 1], levels[i + 1])
           for i in range(len(levels) - 1)]
    if pro:
        # renumber the finest rows from the hierarchy mesh to `mesh`
        vp = _vertex_permutation(mesh, levels[-1])
        inner = fine_adm.vertex_index >= 0
        src = adms[-1].vertex_index[vp[inner]]
        rows = (2 * src[:, None] + np.arange(2)).ravel()
        pro[-1] = pro[-1][rows].tocsr()
    return AuxHierarchy(mats, pro)


def vcycle(hierarchy, b, pre=1, post=1, level=None):
    """One V(pre, post) cycle from a zero guess; forward Gauss-Seidel before
    the coarse correction, backward after, exact solve on the coarsest."""
    if hierarchy is None or hierarchy.num_levels == 0:
        raise ValueError('empty hierarchy')
    if level is None:
        level = hierarchy.num_levels - 1
    if level == 0:
        return hierarchy.coarse_solve(b)
    A = hierarchy.matrices[level]
    P = hierarchy.prolongations[level - 1]
    x = np.zeros_like(b)
    if pre:
        _relax.gauss_seidel(A, x, b, iterations=pre, sweep='forward')
    x += P @ vcycle(hierarchy, P.T @ (b - A @ x), pre, post, level - 1)
    if post:
        _relax.gauss_seidel(A, x, b, iterations=post, sweep='backward')
    return x


class SchurOperator(LinearOperator):
    """``v -> scale * B D^{-1} B^T v + C v`` with its sparse assembly."""

    def __init__(self, B, Dinv, C, scale=1.0):
        self.B = sp.csr_matrix(B)
        self.Dinv = np.asarray(Dinv, dtype=float)
        self.C = sp.csr_matrix(C)
        self.scale = float(scale)
        n = self.B.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))
        self._matrix = None

    @property
    def matrix(self):
        if self._matrix is None:
            BD = self.B.multiply(self.Dinv[None, :]).tocsr()
            S = self.scale * (BD @ self.B.T) + self.C
            S = sp.csr_matrix(S)
            S.sum_duplicates()
            S.sort_indices()
            self._matrix = S
        return self._matrix

    def _matvec(self, v):
        v = np.ravel(v)
        return self.scale * (self.B @ (self.Dinv * (self.B.T @ v))) + self.C @ v

    def _adjoint(self):
        return self


class AuxSpacePrecond(LinearOperator):
    """Auxiliary space preconditioner for the Schur complement.

    Parameters
    ----------
    S : SchurOperator or sparse matrix
        Operator whose assembled matrix is smoothed.
    Pi : sparse matrix
        Auxiliary space to displacement space.
    hierarchy : AuxHierarchy
    mode : {'multiplicative', 'additive'}
    smoother : {'gauss-seidel', 'jacobi'}
    sweeps : int
        Smoothing steps before (and after, multiplicative mode) the
        auxiliary correction.
    coarse : {'vcycle', 'exact'}
        ``'exact'`` replaces the V-cycle by a direct solve with the finest
        auxiliary stiffness.
    pre, post : int
        V-cycle smoothing steps.
    """

    def __init__(self, S, Pi, hierarchy, mode='multiplicative',
                 smoother='gauss-seidel', sweeps=3, coarse='vcycle', pre=1, post=1):
        if mode not in ('multiplicative', 'additive'):
            raise ValueError(f'unknown mode {mode!r}')
        if smoother not in ('gauss-seidel', 'jacobi'):
            raise ValueError(f'unknown smoother {smoother!r}')
        if coarse not in ('vcycle', 'exact'):
            raise ValueError(f'unknown coarse solver {coarse!r}')
        if isinstance(S, SchurOperator):
            A = S.matrix
        elif sp.issparse(S):
            A = sp.csr_matrix(S)
        else:
            raise TypeError('smoothing needs the assembled Schur matrix, '
                            'got a matrix-free operator')
        _check_diagonal(A)
        if Pi.shape[0] != A.shape[0]:
            raise ValueError('prolongation does not match the Schur operator')
        self.A = A
        self.Pi = sp.csr_matrix(Pi)
        self.PiT = self.Pi.T.tocsr()
        self.hierarchy = hierarchy
        self.mode, self.smoother, self.sweeps = mode, smoother, int(sweeps)
        self.coarse, self.pre, self.post = coarse, int(pre), int(post)
        self._exact = None
        if coarse == 'exact':
            self._exact = sla.cho_factor(hierarchy.matrices[-1].toarray())
        n = A.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))

    def aux_solve(self, b):
        if self._exact is not None:
            return sla.cho_solve(self._exact, b)
        return vcycle(self.hierarchy, b, self.pre, self.post)

    def _coarse(self, r):
        return self.Pi @ self.aux_solve(self.PiT @ r)

    def _smooth(self, x, r, direction):
        if self.sweeps == 0:
            return x
        if self.smoother == 'jacobi':
            _relax.jacobi(self.A, x, r, iterations=self.sweeps, omega=0.5)
        else:
            _relax.gauss_seidel(self.A, x, r, iterations=self.sweeps, sweep=direction)
        return x

    def _matvec(self, r):
        r = np.ravel(r).astype(float)
        x = np.zeros_like(r)
        if self.mode == 'additive':
            if self.smoother == 'jacobi':
                x = self._smooth(x, r, None)
            elif self.sweeps:
                # symmetric Gauss-Seidel: forward then backward sweeps
                _relax.gauss_seidel(self.A, x, r, iterations=self.sweeps, sweep='symmetric')
            return x + self._coarse(r)
        x = self._smooth(x, r, 'forward')
        x += self._coarse(r - self.A @ x)
        return self._smooth(x, r, 'backward')

    def _adjoint(self):
        return self


@dataclass(frozen=True)
class BlockPrecondConfig:
    """Outer block structure and the settings of the inner Schur solver."""

    outer: str = 'diagonal'
    schur_scale: float = 1.0
    mode: str = 'multiplicative'
    smoother: str = 'gauss-seidel'
    sweeps: int = 3
    coarse: str = 'vcycle'
    pre: int = 1
    post: int = 1

    def __post_init__(self):
        if self.outer not in ('diagonal', 'triangular'):
            raise ValueError(f'unknown outer preconditioner {self.outer!r}')
        if not self.schur_scale > 0:
            raise ValueError('schur scale must be positive')
        if self.sweeps < 0 or self.pre < 0 or self.post < 0:
            raise ValueError('smoothing counts must be non-negative')


def block_diag_apply(Dinv, X, n_stress, r):
    r1, r2 = r[:n_stress], r[n_stress:]
    return np.concatenate([Dinv * r1, X @ r2])


def block_tri_apply(Dinv, B, X, n_stress, r):
    """Inverse of ``[[D, B^T], [B, -C]]`` when `X` inverts ``B D^{-1} B^T + C``."""
    r1, r2 = r[:n_stress], r[n_stress:]
    y2 = X @ (B @ (Dinv * r1) - r2)
    y1 = Dinv * (r1 - B.T @ y2)
    return np.concatenate([y1, y2])


def block_diag_operator(Dinv, X, n_stress):
    n = n_stress + X.shape[0]
    return LinearOperator((n, n), dtype=np.float64,
                          matvec=lambda r: block_diag_apply(Dinv, X, n_stress, np.ravel(r)))


def block_tri_operator(Dinv, B, X, n_stress):
    n = n_stress + X.shape[0]
    return LinearOperator((n, n), dtype=np.float64,
                          matvec=lambda r: block_tri_apply(Dinv, B, X, n_stress, np.ravel(r)))


def build_schur_precond(system, cfg=None, hierarchy=None):
    """Schur operator and its auxiliary space preconditioner for `system`."""
    cfg = cfg or BlockPrecondConfig()
    Dinv = 1.0 / system.D
    S = SchurOperator(system.B, Dinv, system.C, cfg.schur_scale)
    if hierarchy is None:
        hierarchy = build_aux_hierarchy(system.mesh, system.params.mu)
    Pi = assemble_prolongation(system.mesh, AuxDofMap(system.mesh), system.ddm, system.k)
    X = AuxSpacePrecond(S, Pi, hierarchy, mode=cfg.mode, smoother=cfg.smoother,
                        sweeps=cfg.sweeps, coarse=cfg.coarse, pre=cfg.pre, post=cfg.post)
    return S, X


def build_preconditioner(system, cfg=None, X=None):
    """Block preconditioner for `system` as a ``LinearOperator``.

    `X` overrides the Schur preconditioner (e.g. an exact inverse in tests).
    """
    cfg = cfg or BlockPrecondConfig()
    Dinv = 1.0 / system.D
    if X is None:
        _, X = build_schur_precond(system, cfg)
    if cfg.outer == 'diagonal':
        return block_diag_operator(Dinv, X, system.n_stress)
    return block_tri_operator(Dinv, system.B, X, system.n_stress)


def check_pairing(solver, outer):
    """Warn on solver/preconditioner pairings outside the tested ones."""
    expected = {'minres': 'diagonal', 'gmres': 'triangular'}
    if expected.get(solver) != outer:
        warnings.warn(f'{solver} with the {outer} preconditioner is untested'
                      + (' and MINRES needs a symmetric preconditioner'
                         if solver == 'minres' else ''), stacklevel=2)
