"""Command line entry point.

Examples
--------
::

    mixedelastic table -k 1 --levels 16,32,64 --lambdas 0,10,inf
    mixedelastic table -k 2 --solver gmres --precond triangular --output t5.csv
    mixedelastic convergence -k 3 --rhs trig --levels 4,8,16,32 --format json
    mixedelastic condition -k 2 --levels 8,16,32
    mixedelastic export-matrices -k 1 --levels 4 --lambdas 0 --output out/
"""
import argparse
import contextlib
import json
import os
import sys

from .experiments import (ExperimentConfig, read_config_file, rows_to_json,
                          run_condition, run_convergence, run_table,
                          write_rows_csv, _system_for)
from .assembly import export_matrix_market
from .tensors import format_lambda

_OPTIONS = [
    ('-k', dict(dest='k', help='stress polynomial degree (1, 2 or 3)')),
    ('--levels', dict(help='cells per side, comma separated')),
    ('--lambdas', dict(help="Lame lambda values, comma separated; 'inf' for the incompressible limit")),
    ('--mu', dict(help='shear modulus (default 0.5)')),
    ('--solver', dict(choices=['minres', 'gmres'])),
    ('--precond', dict(choices=['diagonal', 'triangular'])),
    ('--tol', dict(help='relative residual tolerance (default 1e-8)')),
    ('--maxit', dict(help='iteration limit (default 2000)')),
    ('--restart', dict(help='GMRES restart length (default 20)')),
    ('--sweeps', dict(help='smoothing steps of the Schur preconditioner (default 3)')),
    ('--pre', dict(help='V-cycle pre-smoothing steps (default 1)')),
    ('--post', dict(help='V-cycle post-smoothing steps (default 1)')),
    ('--schur-scale', dict(dest='schur_scale', help='scale of B D^-1 B^T (default 1)')),
    ('--mode', dict(choices=['multiplicative', 'additive'])),
    ('--smoother', dict(choices=['gauss-seidel', 'jacobi'])),
    ('--rhs', dict(help='constant-one, poly, trig or divfree')),
    ('--method', dict(choices=['direct', 'minres', 'gmres'],
                      help='solver of convergence studies (default direct)')),
    ('--lanczos-iters', dict(dest='lanczos_iters')),
    ('--jobs', dict(help='worker threads for table cells')),
    ('--output', dict(help='output file (directory for export-matrices)')),
    ('--format', dict(choices=['csv', 'json'])),
]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key=value configuration file; flags take precedence')
    for flag, kw in _OPTIONS:
        common.add_argument(flag, default=None, **kw)
    common.add_argument('--no-timing', dest='timing', action='store_const', const='false',
                        default=None, help='omit wall times so output is reproducible')
    common.add_argument('--strict', action='store_true',
                        help='exit with status 1 if any solve fails to converge')
    common.add_argument('--plot', metavar='PATH', help='also render a PNG figure')

    parser = argparse.ArgumentParser(prog='mixedelastic', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('table', parents=[common], help='iteration counts over levels and lambda')
    sub.add_parser('convergence', parents=[common], help='errors and rates of a manufactured case')
    p = sub.add_parser('condition', parents=[common], help='Lanczos condition number estimates')
    p.add_argument('--no-norm-pairs', dest='norm_pairs', action='store_false',
                   help='only measure the auxiliary space preconditioner')
    sub.add_parser('export-matrices', parents=[common], help='write MatrixMarket files')
    return parser


def make_config(args):
    values = read_config_file(args.config) if args.config else {}
    for flag, kw in _OPTIONS:
        name = kw.get('dest', flag.lstrip('-').replace('-', '_'))
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.timing is not None:
        values['timing'] = args.timing
    return ExperimentConfig.from_mapping(values)


@contextlib.contextmanager
def _open_output(path):
    if path is None or path == '-':
        yield sys.stdout
    else:
        with open(path, 'w', newline='') as fh:
            yield fh


def cmd_table(cfg, args):
    rows = run_table(cfg)
    with _open_output(cfg.output) as fh:
        if cfg.format == 'csv':
            write_rows_csv(rows, fh, timing=cfg.timing)
        else:
            fh.write(rows_to_json(rows, cfg, timing=cfg.timing) + '\n')
    if args.plot:
        from .plotting import plot_table
        plot_table(rows, args.plot, title=f'{cfg.solver}/{cfg.precond}, k={cfg.k}')
    failed = [r for r in rows if not r.converged]
    for r in failed:
        print(f'warning: N={r.N} lambda={format_lambda(r.lam)} did not converge '
              f'(residual {r.final_rel_res:.2e})', file=sys.stderr)
    return bool(failed)


def cmd_convergence(cfg, args):
    report = run_convergence(cfg)
    with _open_output(cfg.output) as fh:
        if cfg.format == 'json':
            fh.write(report.to_json(indent=2) + '\n')
        else:
            names = list(report.errors)
            fh.write(','.join(['N', 'dofs'] + names + [f'rate_{n}' for n in names]) + '\n')
            for i, (n, d) in enumerate(zip(report.levels, report.dofs)):
                errs = [f'{report.errors[m][i]:.6e}' for m in names]
                rates = ['' if i == 0 else f'{report.rates[m][i - 1]:.4f}' for m in names]
                fh.write(','.join([str(n), str(d)] + errs + rates) + '\n')
    if args.plot:
        from .plotting import plot_convergence
        plot_convergence(report, args.plot)
    return False


def cmd_condition(cfg, args):
    rows = run_condition(cfg, norm_pairs=args.norm_pairs)
    with _open_output(cfg.output) as fh:
        if cfg.format == 'json':
            fh.write(json.dumps(dict(k=cfg.k, levels=rows), indent=2) + '\n')
        else:
            keys = [k for k in ('aux', 'schur_vs_1h', '0h_vs_mass') if k in rows[0]]
            head = ['k', 'N', 'dofs'] + [f'{k}_{q}' for k in keys
                                         for q in ('lambda_min', 'lambda_max', 'kappa')]
            fh.write(','.join(head) + '\n')
            for r in rows:
                vals = [str(cfg.k), str(r['N']), str(r['dofs'])]
                vals += [f'{r[k][q]:.6e}' for k in keys
                         for q in ('lambda_min', 'lambda_max', 'kappa')]
                fh.write(','.join(vals) + '\n')
    if args.plot:
        from .plotting import plot_condition
        plot_condition(rows, args.plot)
    return False


def cmd_export(cfg, args):
    outdir = cfg.output or '.'
    os.makedirs(outdir, exist_ok=True)
    for N in cfg.levels:
        for lam in cfg.lambdas:
            s = _system_for(cfg, N, lam)
            tag = f'k{cfg.k}_N{N}_lam{format_lambda(lam)}'
            note = f'k={cfg.k} N={N} lambda={format_lambda(lam)} mu={cfg.mu}'
            for name, mat in [('M', s.M), ('B', s.B), ('C', s.C), ('K', s.matrix())]:
                export_matrix_market(os.path.join(outdir, f'{tag}_{name}.mtx'), mat,
                                     comment=f'{name} {note}')
            with open(os.path.join(outdir, f'{tag}_rhs.txt'), 'w') as fh:
                fh.write('\n'.join(f'{v:.17g}' for v in s.rhs()) + '\n')
            with open(os.path.join(outdir, f'{tag}_D.txt'), 'w') as fh:
                fh.write('\n'.join(f'{v:.17g}' for v in s.D) + '\n')
            print(os.path.join(outdir, tag))
    return False


_COMMANDS = {'table': cmd_table, 'convergence': cmd_convergence,
             'condition': cmd_condition, 'export-matrices': cmd_export}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    failed = _COMMANDS[args.command](cfg, args)
    return 1 if (failed and args.strict) else 0


if __name__ == '__main__':
    sys.exit(main())
