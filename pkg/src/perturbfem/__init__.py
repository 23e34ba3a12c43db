"""Iso-parametric FEM convergence studies on perturbed ball domains."""

from .geometry import (PerturbedDomain, MapDiagnostics, boundary_radius,
                       boundary_points, hausdorff_distance,
                       hausdorff_between_point_sets, shifted_disk_errors,
                       shifted_disk_lens_area, ellipse_map_diagnostics)
from .meshgen import (Mesh, MeshQualityError, coarse_mesh, refine_uniform,
                      elevate_to_isoparametric, write_mesh_text, write_vtk)
from .fem import (ReferenceElement, QuadratureRule, FeSpace, LinearSystem,
                  InvertedCellError, gauss_legendre, fe_space,
                  assemble_laplace, assemble_stokes_lps, solve_stokes,
                  interpolate)
from .linalg import SparseMatrix, SolverError, cg_solve, direct_solve
from .analysis import (AnalyticProblem, ErrorReport, exact_laplace,
                       exact_stokes, analytic_problem, error_norms,
                       divergence_norm, convergence_table, upsilon_scaling)
from .cli import StudyConfig, StudyRecord, run_study, run_analytic_checks

__version__ = "0.1.0"
