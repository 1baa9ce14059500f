"""Experiment drivers behind the command line: iteration tables, convergence
studies and condition number measurements."""
from concurrent.futures import ThreadPoolExecutor
import csv
import dataclasses
from dataclasses import dataclass, field
import json
import math
import time
import warnings

import numpy as np
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import LinearOperator

from .analysis import CASES, convergence_study, make_manufactured
from .assembly import (assemble_0h_gram, assemble_1h_gram,
                       assemble_mass_parts, assemble_system)
from .krylov import gmres_restart, lanczos_extreme_eigs, minres
from .mesh import build_square_mesh
from .precond import (BlockPrecondConfig, build_preconditioner,
                      build_schur_precond, check_pairing)
from .tensors import LameParams, format_lambda, parse_lambda

__all__ = ['ExperimentConfig', 'TableRow', 'CSV_COLUMNS', 'run_table',
           'run_convergence', 'run_condition', 'read_config_file',
           'write_rows_csv', 'rows_to_json']

CSV_COLUMNS = ('k', 'N', 'dofs', 'lambda', 'solver', 'precond', 'iterations',
               'time_s', 'final_rel_res')

DEFAULT_LEVELS = {1: (16, 32, 64, 128), 2: (8, 16, 32, 64), 3: (4, 8, 16, 32)}
STUDY_LAMBDAS = (0.0, 10.0, 100.0, 1000.0, math.inf)


def _parse_list(text, conv):
    if isinstance(text, (list, tuple)):
        return tuple(conv(t) for t in text)
    parts = str(text).replace(',', ' ').split()
    return tuple(conv(p) for p in parts)


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ('1', 'true', 'yes', 'on'):
        return True
    if t in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


@dataclass
class ExperimentConfig:
    """Settings of one experiment; defaults reproduce the published setup
    (unit square scaled to (-1, 1)^2, mu = 0.5, load f = (1, 1))."""

    k: int = 1
    levels: tuple = None
    lambdas: tuple = STUDY_LAMBDAS
    mu: float = 0.5
    solver: str = 'minres'
    precond: str = 'diagonal'
    tol: float = 1e-8
    maxit: int = 2000
    restart: int = 20
    sweeps: int = 3
    pre: int = 1
    post: int = 1
    schur_scale: float = 1.0
    mode: str = 'multiplicative'
    smoother: str = 'gauss-seidel'
    rhs: str = 'constant-one'
    method: str = 'direct'
    lanczos_iters: int = 60
    jobs: int = 1
    timing: bool = True
    output: str = None
    format: str = 'csv'

    _CONVERTERS = dict(k=int, levels=lambda v: _parse_list(v, int),
                       lambdas=lambda v: _parse_list(v, parse_lambda),
                       mu=float, tol=float, maxit=int, restart=int, sweeps=int,
                       pre=int, post=int, schur_scale=float, jobs=int,
                       lanczos_iters=int, timing=_parse_bool)

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ValueError(f'k must be 1, 2 or 3, got {self.k}')
        if self.levels is None:
            self.levels = DEFAULT_LEVELS[self.k]
        self.levels = tuple(int(n) for n in self.levels)
        self.lambdas = tuple(float(v) for v in self.lambdas)
        if self.solver not in ('minres', 'gmres'):
            raise ValueError(f'unknown solver {self.solver!r}')
        if self.precond not in ('diagonal', 'triangular'):
            raise ValueError(f'unknown preconditioner {self.precond!r}')
        if self.rhs != 'constant-one' and self.rhs not in CASES:
            raise ValueError(f'rhs must be constant-one or one of {CASES}')
        if self.format not in ('csv', 'json'):
            raise ValueError(f'unknown output format {self.format!r}')
        if self.method not in ('direct', 'minres', 'gmres'):
            raise ValueError(f'unknown solve method {self.method!r}')
        if self.jobs < 1:
            raise ValueError('jobs must be at least 1')
        LameParams(self.mu, 0.0)

    @classmethod
    def from_mapping(cls, values):
        """Build from string values (config file or command line)."""
        kw = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, val in values.items():
            key = key.strip().replace('-', '_')
            if key == 'lambda':
                key = 'lambdas'
            if key not in names:
                raise ValueError(f'unknown configuration key {key!r}')
            if val is None:
                continue
            conv = cls._CONVERTERS.get(key)
            kw[key] = conv(val) if conv else val
        return cls(**kw)

    def precond_config(self):
        return BlockPrecondConfig(outer=self.precond, schur_scale=self.schur_scale,
                                  mode=self.mode, smoother=self.smoother,
                                  sweeps=self.sweeps, pre=self.pre, post=self.post)

    def load(self):
        if self.rhs == 'constant-one':
            return (1.0, 1.0)
        return None


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError(f'{path}:{num}: expected key=value')
            key, val = line.split('=', 1)
            out[key.strip()] = val.strip()
    return out


@dataclass
class TableRow:
    k: int
    N: int
    dofs: int
    lam: float
    solver: str
    precond: str
    iterations: int
    time_s: float
    final_rel_res: float
    converged: bool
    setup_s: float = 0.0
    assembly_s: float = 0.0
    residuals: list = field(default_factory=list, repr=False)

    def csv_fields(self, timing=True):
        return [self.k, self.N, self.dofs, format_lambda(self.lam), self.solver,
                self.precond, self.iterations,
                f'{self.time_s:.4f}' if timing else 'nan',
                f'{self.final_rel_res:.6e}']

    def to_dict(self, timing=True):
        d = dict(zip(CSV_COLUMNS, self.csv_fields(timing)))
        d.update(k=self.k, N=self.N, dofs=self.dofs, iterations=self.iterations,
                 final_rel_res=self.final_rel_res, converged=self.converged,
                 time_s=self.time_s if timing else None,
                 setup_s=self.setup_s if timing else None,
                 assembly_s=self.assembly_s if timing else None)
        return d


def _system_for(cfg, N, lam):
    params = LameParams(cfg.mu, lam)
    f = cfg.load()
    if f is None:
        f = make_manufactured(cfg.rhs, params).f
    return assemble_system(build_square_mesh(N), cfg.k, params, f=f)


def _run_cell(cfg, N, lam):
    t0 = time.perf_counter()
    system = _system_for(cfg, N, lam)
    t1 = time.perf_counter()
    P = build_preconditioner(system, cfg.precond_config())
    A = system.matrix()
    b = system.rhs()
    t2 = time.perf_counter()
    if cfg.solver == 'minres':
        _, rep = minres(A, b, P, tol=cfg.tol, maxit=cfg.maxit)
    else:
        _, rep = gmres_restart(A, b, P, restart=cfg.restart, tol=cfg.tol, maxit=cfg.maxit)
    t3 = time.perf_counter()
    return TableRow(k=cfg.k, N=N, dofs=system.ndofs, lam=lam, solver=cfg.solver,
                    precond=cfg.precond, iterations=rep.iterations, time_s=t3 - t2,
                    final_rel_res=rep.final_residual, converged=rep.converged,
                    setup_s=t2 - t1, assembly_s=t1 - t0, residuals=rep.residuals)


def run_table(cfg):
    """One row per (level, lambda), ordered by level then lambda.

    Non-converged cells are recorded, not raised.
    """
    with warnings.catch_warnings():
        warnings.simplefilter('always')
        check_pairing(cfg.solver, cfg.precond)
    cells = [(N, lam) for N in cfg.levels for lam in cfg.lambdas]
    if cfg.jobs == 1:
        return [_run_cell(cfg, N, lam) for N, lam in cells]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(_run_cell, cfg, N, lam) for N, lam in cells]
        return [f.result() for f in futures]


def write_rows_csv(rows, stream, timing=True):
    w = csv.writer(stream, lineterminator='\n')
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields(timing))


def rows_to_json(rows, cfg=None, timing=True):
    out = dict(rows=[r.to_dict(timing) for r in rows])
    if cfg is not None:
        out['config'] = _config_dict(cfg)
    return json.dumps(out, indent=2)


def _config_dict(cfg):
    d = dataclasses.asdict(cfg)
    d['lambdas'] = [format_lambda(v) for v in cfg.lambdas]
    d['levels'] = list(cfg.levels)
    return d


def run_convergence(cfg):
    """Convergence study of the manufactured case ``cfg.rhs`` at the first
    lambda of the configuration."""
    if cfg.rhs not in CASES:
        raise ValueError('a convergence study needs a manufactured rhs '
                         f'({", ".join(CASES)})')
    params = LameParams(cfg.mu, cfg.lambdas[0])
    return convergence_study(cfg.rhs, cfg.k, cfg.levels, params,
                             method=cfg.method, tol=1e-12)


def _inverse_operator(A):
    lu = spla.splu(A.tocsc())
    return LinearOperator(A.shape, matvec=lu.solve, dtype=float)


def run_condition(cfg, norm_pairs=True):
    """Lanczos estimates per level.

    ``aux``: spectrum of ``X S`` for the auxiliary space preconditioner.
    ``schur_vs_1h``: generalized spectrum of ``(B M^{-1} B^T + C, G_1h)``.
    ``0h_vs_mass``: generalized spectrum of ``(G_0h, M)``.
    The compliance-free mass ``M`` is used; the Schur approximation does
    not depend on lambda.
    """
    params = LameParams(cfg.mu, 0.0)
    out = []
    for N in cfg.levels:
        system = assemble_system(build_square_mesh(N), cfg.k, params, f=(1.0, 1.0))
        S, X = build_schur_precond(system, cfg.precond_config())
        lo, hi = lanczos_extreme_eigs(S, X, iters=cfg.lanczos_iters)
        row = dict(N=N, dofs=system.ndofs, n_disp=system.n_disp,
                   aux=dict(lambda_min=lo, lambda_max=hi, kappa=hi / lo))
        if norm_pairs:
            Minv = _inverse_operator(system.M)
            B, C = system.B, system.C
            Sh = LinearOperator(C.shape, dtype=float,
                                matvec=lambda v: B @ (Minv @ (B.T @ v)) + C @ v)
            G1 = assemble_1h_gram(system.mesh, system.ddm)
            lo, hi = lanczos_extreme_eigs(Sh, _inverse_operator(G1), iters=cfg.lanczos_iters)
            row['schur_vs_1h'] = dict(lambda_min=lo, lambda_max=hi, kappa=hi / lo)
            m_id, _ = assemble_mass_parts(system.mesh, system.sdm)
            G0 = assemble_0h_gram(system.mesh, system.sdm)
            lo, hi = lanczos_extreme_eigs(G0, _inverse_operator(m_id), iters=cfg.lanczos_iters)
            row['0h_vs_mass'] = dict(lambda_min=lo, lambda_max=hi, kappa=hi / lo)
        out.append(row)
    return out


def level_variation(values):
    """Relative spread ``max / min - 1`` of positive measurements."""
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min() - 1.0)
