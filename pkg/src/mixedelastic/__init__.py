"""Symmetric H(div)-conforming mixed finite elements for plane linear
elasticity with block preconditioners and an auxiliary space
preconditioner for the Schur complement."""
from .mesh import Mesh, build_square_mesh, refine_uniform, build_hierarchy
from .tensors import INFINITY, LameParams
from .spaces import StressDofMap, DispDofMap, AuxDofMap
from .assembly import BlockSystem, assemble_system
from .krylov import SolveReport, minres, gmres_restart, lanczos_extreme_eigs, dense_solve
from .precond import (AuxSpacePrecond, BlockPrecondConfig, SchurOperator,
                      build_preconditioner, build_schur_precond)
from .analysis import ErrorReport, convergence_study, make_manufactured

__version__ = '0.1.0'

__all__ = ['Mesh', 'build_square_mesh', 'refine_uniform', 'build_hierarchy',
           'INFINITY', 'LameParams', 'StressDofMap', 'DispDofMap', 'AuxDofMap',
           'BlockSystem', 'assemble_system', 'SolveReport', 'minres',
           'gmres_restart', 'lanczos_extreme_eigs', 'dense_solve',
           'AuxSpacePrecond', 'BlockPrecondConfig', 'SchurOperator',
           'build_preconditioner', 'build_schur_precond', 'ErrorReport',
           'convergence_study', 'make_manufactured']
