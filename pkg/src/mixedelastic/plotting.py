"""Figures for experiment reports, written straight to image files."""
import math

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .tensors import format_lambda  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 4.8
fig_size = (fig_width, fig_width * golden_mean)

params = {'axes.labelsize': 9,
          'font.size': 8,
          'legend.fontsize': 7,
          'xtick.labelsize': 8,
          'ytick.labelsize': 8,
          'figure.figsize': fig_size,
          'figure.dpi': 150,
          'lines.markersize': 4,
          'lines.linewidth': 1.2,
          'axes.grid': True,
          'grid.alpha': 0.3}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_table(rows, path, title=None):
    """Iterations against number of unknowns, one line per lambda."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for lam in sorted({r.lam for r in rows}):
            sel = sorted((r for r in rows if r.lam == lam), key=lambda r: r.dofs)
            ax.semilogx([r.dofs for r in sel], [r.iterations for r in sel],
                        'o-', label=rf'$\lambda$={format_lambda(lam)}')
        ax.set_xlabel('unknowns')
        ax.set_ylabel('iterations')
        ax.set_ylim(bottom=0)
        if title:
            ax.set_title(title)
        ax.legend(ncol=2)
        return _save(fig, path)


def plot_convergence(report, path):
    """Errors against cells per side on log-log axes."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        n = np.asarray(report.levels, dtype=float)
        for name, err in report.errors.items():
            if report.exact.get(name):
                continue
            ax.loglog(n, err, 'o-', label=f'{name} ({report.rates[name][-1]:.2f})')
        ax.set_xlabel('cells per side')
        ax.set_ylabel('error')
        ax.set_title(f'{report.case}, k={report.k}')
        ax.legend()
        return _save(fig, path)


def plot_condition(rows, path):
    """Condition number estimates per level."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        n = [r['N'] for r in rows]
        for key in ('aux', 'schur_vs_1h', '0h_vs_mass'):
            if key in rows[0]:
                ax.semilogx(n, [r[key]['kappa'] for r in rows], 'o-', label=key)
        ax.set_xlabel('cells per side')
        ax.set_ylabel('condition number')
        ax.set_ylim(bottom=0)
        ax.legend()
        return _save(fig, path)
