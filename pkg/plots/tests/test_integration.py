"""Cross-checks against the solver package through its CSV contract only.

These tests run a real (small) study with the solver package, then feed
the resulting CSV to the plotting tool. They are skipped when the solver
package is not installed; the plotting package itself never imports it.
"""

import numpy as np
import pytest

perturbfem = pytest.importorskip("perturbfem")

from perturbfem_plots import FigureSpec, plot_error_vs_h, \
    plot_error_vs_upsilon, fitted_upsilon_slope  # noqa: E402


@pytest.fixture(scope="module")
def real_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("study") / "real.csv"
    config = perturbfem.StudyConfig(
        problem="laplace2d", degrees=[1],
        upsilons=[0.0, 0.0125, 0.025, 0.05, 0.1], levels=[2, 3, 4],
        output=str(out))
    perturbfem.run_study(config)
    return str(out)


def test_error_vs_h_from_real_study(real_csv, tmp_path):
    out = tmp_path / "real_h.png"
    result = plot_error_vs_h(
        FigureSpec(real_csv, "error_vs_h", "l2", str(out)))
    assert out.exists()
    assert len(result.series) == 5
    errs = [e for _h, e in result.series[(1, 0.0)]]
    assert errs == sorted(errs, reverse=True)


def test_upsilon_slope_matches_solver_fit(real_csv, tmp_path):
    out = tmp_path / "real_ups.png"
    result = plot_error_vs_upsilon(
        FigureSpec(real_csv, "error_vs_upsilon", "l2", str(out)))
    pairs = [(u, pts[0][1]) for (_deg, u), pts in result.series.items()]
    solver_fit = perturbfem.upsilon_scaling(pairs)
    assert abs(result.fitted_slope - solver_fit) <= 1e-12
    assert abs(fitted_upsilon_slope(pairs) - solver_fit) <= 1e-12
