import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
import scipy.io

from mixedelastic.cli import main
from mixedelastic.experiments import CSV_COLUMNS, ExperimentConfig, run_table

SMALL = ['-k', '1', '--levels', '2,4', '--lambdas', '0,inf']


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_table_csv(tmp_path, capsys):
    out = tmp_path / 't.csv'
    code, _ = run(['table', *SMALL, '--output', str(out)], capsys)
    assert code == 0
    raw = out.read_bytes()
    assert b'\r' not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [(r['N'], r['lambda']) for r in rows] == [('2', '0'), ('2', 'inf'),
                                                     ('4', '0'), ('4', 'inf')]
    assert all(float(r['final_rel_res']) <= 1e-8 for r in rows)
    # [DERIVED] k=1: three stress unknowns per vertex, two displacements per cell
    assert rows[0]['dofs'] == str(3 * 9 + 2 * 8)


def test_no_timing_is_reproducible(capsys):
    args = ['table', *SMALL, '--no-timing']
    _, first = run(args, capsys)
    _, second = run(args, capsys)
    assert first.out == second.out
    assert all(line.split(',')[7] == 'nan' for line in first.out.splitlines()[1:])


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / 'run.cfg'
    cfg.write_text('# small run\nk = 2\nlevels = 2, 4\nlambda = 10\n'
                   'solver = gmres\nprecond = triangular\n')
    _, res = run(['table', '--config', str(cfg), '--levels', '2', '--no-timing'], capsys)
    rows = list(csv.DictReader(io.StringIO(res.out)))
    assert len(rows) == 1
    assert rows[0]['k'] == '2' and rows[0]['N'] == '2' and rows[0]['lambda'] == '10'
    assert rows[0]['solver'] == 'gmres' and rows[0]['precond'] == 'triangular'


@pytest.mark.parametrize('text', ['k = 5\n', 'colour = red\n', 'no equals sign\n',
                                  'lambdas = abc\n'])
def test_invalid_config(tmp_path, capsys, text):
    cfg = tmp_path / 'bad.cfg'
    cfg.write_text(text)
    with pytest.raises(SystemExit) as exc:
        main(['table', '--config', str(cfg)])
    assert exc.value.code == 2


def test_strict_exit_code(capsys):
    code, res = run(['table', *SMALL, '--maxit', '2', '--strict'], capsys)
    assert code == 1 and 'did not converge' in res.err
    code, _ = run(['table', *SMALL, '--maxit', '2'], capsys)
    assert code == 0


def test_jobs_keep_order():
    base = dict(k=1, levels=(2, 4), lambdas=(0.0, 10.0, float('inf')))
    serial = run_table(ExperimentConfig(**base))
    threaded = run_table(ExperimentConfig(jobs=3, **base))
    assert [(r.N, r.lam, r.iterations) for r in serial] == \
        [(r.N, r.lam, r.iterations) for r in threaded]


def test_json_and_plot(tmp_path, capsys):
    png = tmp_path / 'table.png'
    _, res = run(['table', *SMALL, '--format', 'json', '--plot', str(png)], capsys)
    d = json.loads(res.out)
    assert len(d['rows']) == 4 and d['config']['lambdas'] == ['0', 'inf']
    assert png.read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'


def test_convergence_command(tmp_path, capsys):
    out = tmp_path / 'conv.json'
    png = tmp_path / 'conv.png'
    code, _ = run(['convergence', '-k', '3', '--rhs', 'trig', '--levels', '2,4',
                   '--format', 'json', '--output', str(out), '--plot', str(png)], capsys)
    assert code == 0
    d = json.loads(out.read_text())
    assert d['case'] == 'trig' and d['k'] == 3
    assert 'u_ustar_0' in d['rates'] and png.exists()
    _, res = run(['convergence', '-k', '2', '--rhs', 'poly', '--levels', '2,4'], capsys)
    assert res.out.splitlines()[0].startswith('N,dofs,sigma_0h')


def test_condition_command(capsys):
    _, res = run(['condition', '-k', '1', '--levels', '4', '--lanczos-iters', '20'], capsys)
    head, row = res.out.splitlines()
    assert head.split(',')[:3] == ['k', 'N', 'dofs'] and 'aux_kappa' in head
    assert 'schur_vs_1h_kappa' in head and '0h_vs_mass_kappa' in head
    assert float(row.split(',')[5]) >= 1.0
    _, res = run(['condition', '-k', '1', '--levels', '4', '--no-norm-pairs',
                  '--format', 'json'], capsys)
    d = json.loads(res.out)
    assert set(d['levels'][0]) == {'N', 'dofs', 'n_disp', 'aux'}


def test_export_matrices(tmp_path, capsys):
    run(['export-matrices', '-k', '1', '--levels', '2', '--lambdas', '0',
         '--output', str(tmp_path)], capsys)
    tag = tmp_path / 'k1_N2_lam0'
    K = scipy.io.mmread(f'{tag}_K.mtx').tocsr()
    M = scipy.io.mmread(f'{tag}_M.mtx')
    B = scipy.io.mmread(f'{tag}_B.mtx')
    rhs = np.loadtxt(f'{tag}_rhs.txt')
    D = np.loadtxt(f'{tag}_D.txt')
    assert K.shape == (len(rhs), len(rhs)) and M.shape[0] == len(D)
    np.testing.assert_allclose(K[:M.shape[0], :M.shape[0]].toarray(), M.toarray())
    np.testing.assert_allclose(K[M.shape[0]:, :M.shape[0]].toarray(), B.toarray())
    np.testing.assert_allclose(D, M.diagonal())


def test_module_entry_point():
    res = subprocess.run([sys.executable, '-m', 'mixedelastic', '--help'],
                         capture_output=True, text=True)
    assert res.returncode == 0 and 'export-matrices' in res.stdout
