"""Experiment orchestration: study grids, analytic checks, CSV emission.

A study sweeps (degree, upsilon, level) grids for one model problem,
running the full pipeline per grid point (mesh -> space -> assemble ->
solve -> truncated error norms) and writes one CSV row per point.  Grid
points are independent and can run in parallel processes.  Failures of a
single grid point are recorded in the CSV's ``error`` column and do not
abort the rest of the sweep.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

from .geometry import (PerturbedDomain, ellipse_map_diagnostics,
                       hausdorff_distance, shifted_disk_errors)
from .meshgen import coarse_mesh, refine_uniform, elevate_to_isoparametric, \
    write_mesh_text, write_vtk
from .fem import (fe_space, assemble_laplace, assemble_stokes_lps,
                  solve_stokes)
from .linalg import cg_solve
from .analysis import analytic_problem, error_norms

DEFAULT_UPSILONS = [0.0, 0.0125, 0.025, 0.05, 0.1]
CSV_HEADER = ("problem,dim,degree,upsilon,hausdorff_estimate,level,h_max,"
              "ndofs,l2_error,h1_error,h1_semi_error,solver_iterations,"
              "wall_time_s,error")

PROBLEM_DIMS = {"laplace2d": 2, "laplace3d": 3, "stokes2d": 2}


@dataclass
class StudyConfig:
    """One experiment sweep; serializable as a flat JSON object."""

    problem: str = "laplace2d"
    degrees: List[int] = field(default_factory=lambda: [1, 2])
    upsilons: List[float] = field(default_factory=lambda: list(DEFAULT_UPSILONS))
    levels: Optional[List[int]] = None
    truncation_radius: float = 0.88
    lps_alpha: float = 0.1
    quad_order: Optional[int] = None
    output: str = "study.csv"
    parallel_jobs: int = 1
    dump_fields: Optional[str] = None

    def __post_init__(self):
        if self.problem not in PROBLEM_DIMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.levels is None:
            # desk-scale defaults: hex meshes get expensive beyond L=4
            self.levels = list(range(2, 5 if self.problem == "laplace3d" else 7))
        if not all(isinstance(d, int) and d in (1, 2) for d in self.degrees) \
                or not self.degrees:
            raise ValueError("degrees must be a nonempty subset of {1, 2}")
        if sorted(self.levels) != list(self.levels) or \
                len(set(self.levels)) != len(self.levels) or not self.levels:
            raise ValueError("levels must be nonempty and strictly increasing")
        if any(lv < 0 for lv in self.levels):
            raise ValueError("levels must be nonnegative")
        if any(u < 0 for u in self.upsilons) or not self.upsilons:
            raise ValueError("upsilons must be nonempty and nonnegative")
        if not 0.0 < self.truncation_radius <= 1.0:
            raise ValueError("truncation_radius must lie in (0, 1]")
        if self.lps_alpha <= 0.0:
            raise ValueError("lps_alpha must be positive")
        if self.parallel_jobs < 1:
            raise ValueError("parallel_jobs must be at least 1")

    @classmethod
    def from_json(cls, path: str) -> "StudyConfig":
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class StudyRecord:
    """One CSV row of a convergence study."""

    problem: str
    dim: int
    degree: int
    upsilon: float
    hausdorff_estimate: float
    level: int
    h_max: float
    ndofs: int
    l2_error: float
    h1_error: float
    h1_semi_error: float
    solver_iterations: int
    wall_time_s: float
    error: str = ""


def _fmt(value) -> str:
    """Shortest round-tripping decimal form of a cell value."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        writer = csv.writer(fh)
        for rec in records:
            row = asdict(rec)
            writer.writerow([_fmt(row[name]) for name in CSV_HEADER.split(",")])


def read_csv(path) -> List[StudyRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(StudyRecord(
                problem=row["problem"], dim=int(row["dim"]),
                degree=int(row["degree"]), upsilon=float(row["upsilon"]),
                hausdorff_estimate=float(row["hausdorff_estimate"]),
                level=int(row["level"]), h_max=float(row["h_max"]),
                ndofs=int(row["ndofs"]), l2_error=float(row["l2_error"]),
                h1_error=float(row["h1_error"]),
                h1_semi_error=float(row["h1_semi_error"]),
                solver_iterations=int(row["solver_iterations"]),
                wall_time_s=float(row["wall_time_s"]),
                error=row["error"]))
    return records


def _mesh_at(domain: PerturbedDomain, level: int, degree: int):
    mesh = coarse_mesh(domain)
    for _ in range(level):
        mesh = refine_uniform(mesh, domain)
    return elevate_to_isoparametric(mesh, domain, degree)


def _run_grid_point(args):
    """Full pipeline for one (degree, upsilon, level) grid point."""
    config, degree, upsilon, level, hausdorff = args
    dim = PROBLEM_DIMS[config.problem]
    prob = analytic_problem(config.problem)
    quad = config.quad_order or 2 * degree + 2
    t0 = time.perf_counter()
    base = dict(problem=config.problem, dim=dim, degree=degree,
                upsilon=upsilon, hausdorff_estimate=hausdorff, level=level)
    try:
        domain = PerturbedDomain(dim, upsilon)
        mesh = _mesh_at(domain, level, degree)
        if config.problem == "stokes2d":
            space = fe_space(mesh, "velocity_pressure")
            system = assemble_stokes_lps(space, prob.rhs, config.lps_alpha, quad)
            coeffs = solve_stokes(system, space)
            iterations = 0
        else:
            space = fe_space(mesh)
            system = assemble_laplace(space, prob.rhs, quad)
            coeffs, iterations, _, _ = cg_solve(system.matrix, system.rhs)
        report = error_norms(space, coeffs, prob, config.truncation_radius,
                             quad, upsilon=upsilon)
        if config.dump_fields:
            _dump_fields(config, mesh, space, coeffs, degree, upsilon, level)
        return StudyRecord(**base, h_max=mesh.h_max, ndofs=space.ndofs,
                           l2_error=report.l2_error,
                           h1_error=report.h1_error,
                           h1_semi_error=report.h1_semi_error,
                           solver_iterations=iterations,
                           wall_time_s=time.perf_counter() - t0)
    except Exception as exc:  # per-point failure: report, keep sweeping
        return StudyRecord(**base, h_max=math.nan, ndofs=0,
                           l2_error=math.nan, h1_error=math.nan,
                           h1_semi_error=math.nan, solver_iterations=0,
                           wall_time_s=time.perf_counter() - t0,
                           error=f"{type(exc).__name__}: {exc}")


def _dump_fields(config, mesh, space, coeffs, degree, upsilon, level):
    import os
    os.makedirs(config.dump_fields, exist_ok=True)
    name = f"{config.problem}_q{degree}_ups{upsilon}_L{level}.vtk"
    n = mesh.nodes.shape[0]
    if space.field_type == "scalar":
        data = {"u": coeffs}
    else:
        data = {"u_x": coeffs[:n], "u_y": coeffs[n:2 * n],
                "p": coeffs[2 * n:]}
    write_vtk(mesh, os.path.join(config.dump_fields, name), point_data=data)


def run_study(config: StudyConfig) -> List[StudyRecord]:
    """Execute the sweep, write the CSV, and return the records sorted."""
    dim = PROBLEM_DIMS[config.problem]
    hausdorff = {}
    for ups in config.upsilons:
        if ups == 0.0:
            hausdorff[ups] = 0.0
        else:
            n = 2048 if dim == 2 else 192
            hausdorff[ups] = hausdorff_distance(
                PerturbedDomain(dim, 0.0), PerturbedDomain(dim, ups), n)
    tasks = [(config, d, u, lv, hausdorff[u])
             for d in sorted(config.degrees)
             for u in sorted(config.upsilons)
             for lv in config.levels]
    if config.parallel_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.parallel_jobs) as pool:
            records = list(pool.map(_run_grid_point, tasks))
    else:
        records = [_run_grid_point(t) for t in tasks]
    records.sort(key=lambda r: (r.problem, r.degree, r.upsilon, r.level))
    write_csv(records, config.output)
    return records


# ---------------------------------------------------------------------------
# analytic closed-form checks

def run_analytic_checks(stream=None) -> int:
    """Compare shifted-disk and ellipse-map results to their closed forms.

    Returns 0 when all shifted-disk ratios lie in [0.9, 1.1] and all
    ellipse defects match 2*ups + ups^2 to 1e-12; returns 2 otherwise.
    """
    out = stream or sys.stdout
    ok = True
    for ups in (1e-1, 1e-2, 1e-3):
        l2, h1 = shifted_disk_errors(ups, 64)
        l2_ratio = l2 / (math.sqrt(math.pi) * ups)
        h1_ratio = h1 / (math.sqrt(8.0 * ups))
        line_ok = 0.9 <= l2_ratio <= 1.1 and 0.9 <= h1_ratio <= 1.1
        ok &= line_ok
        print(f"disk ups={ups:g}: l2_ratio={l2_ratio:.6f} "
              f"h1_ratio={h1_ratio:.6f} "
              f"{'ok' if line_ok else 'OUT OF [0.9,1.1]'}", file=out)
    for ups in DEFAULT_UPSILONS:
        diag = ellipse_map_diagnostics(ups, np.zeros((1, 2)))
        expected = 2.0 * ups + ups * ups
        line_ok = abs(diag.sup_norm_defect - expected) <= 1e-12
        ok &= line_ok
        print(f"ellipse ups={ups:g}: defect={diag.sup_norm_defect:.12f} "
              f"expected={expected:.12f} {'ok' if line_ok else 'MISMATCH'}",
              file=out)
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# command line

def _add_study_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--problem", choices=sorted(PROBLEM_DIMS))
    p.add_argument("--degrees", help="comma list, e.g. 1,2")
    p.add_argument("--upsilons", help="comma list of perturbation amplitudes")
    p.add_argument("--levels", help="comma list of refinement levels")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--truncation-radius", type=float)
    p.add_argument("--lps-alpha", type=float)
    p.add_argument("--quad-order", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--dump-fields", metavar="DIR",
                   help="write VTK solution dumps into DIR")


def _config_from_args(args) -> StudyConfig:
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        unknown = set(data) - set(StudyConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    else:
        data = {}
    updates = dict(data)
    if args.problem:
        updates["problem"] = args.problem
        if not args.levels and "levels" not in data:
            updates["levels"] = None    # re-derive the per-problem default
    if args.degrees:
        updates["degrees"] = [int(v) for v in args.degrees.split(",")]
    if args.upsilons:
        updates["upsilons"] = [float(v) for v in args.upsilons.split(",")]
    if args.levels:
        updates["levels"] = [int(v) for v in args.levels.split(",")]
    if args.out:
        updates["output"] = args.out
    if args.truncation_radius is not None:
        updates["truncation_radius"] = args.truncation_radius
    if args.lps_alpha is not None:
        updates["lps_alpha"] = args.lps_alpha
    if args.quad_order is not None:
        updates["quad_order"] = args.quad_order
    if args.jobs is not None:
        updates["parallel_jobs"] = args.jobs
    if args.dump_fields:
        updates["dump_fields"] = args.dump_fields
    return StudyConfig(**updates)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perturbfem",
        description="FEM convergence studies on perturbed ball domains")
    sub = parser.add_subparsers(dest="command", required=True)

    p_study = sub.add_parser("study", help="run a convergence study -> CSV")
    _add_study_flags(p_study)

    sub.add_parser("analytic", help="closed-form geometry error checks")

    p_h = sub.add_parser("hausdorff", help="sampled boundary distances")
    p_h.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p_h.add_argument("--upsilons", default="0.0125,0.025,0.05,0.1")
    p_h.add_argument("--samples", type=int, default=2048)

    p_m = sub.add_parser("mesh", help="export a mesh")
    p_m.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p_m.add_argument("--upsilon", type=float, default=0.0)
    p_m.add_argument("--level", type=int, default=2)
    p_m.add_argument("--degree", type=int, default=1, choices=(1, 2))
    p_m.add_argument("--out", required=True,
                     help="output path (.vtk for VTK, else plain text)")

    args = parser.parse_args(argv)
    try:
        if args.command == "study":
            config = _config_from_args(args)
            records = run_study(config)
            failures = [r for r in records if r.error]
            print(f"wrote {len(records)} records to {config.output}"
                  + (f" ({len(failures)} failed)" if failures else ""))
            return 0
        if args.command == "analytic":
            return run_analytic_checks()
        if args.command == "hausdorff":
            base = PerturbedDomain(args.dim, 0.0)
            for ups in (float(v) for v in args.upsilons.split(",")):
                dist = hausdorff_distance(base,
                                          PerturbedDomain(args.dim, ups),
                                          args.samples)
                print(f"ups={ups:g}: hausdorff={dist!r}")
            return 0
        if args.command == "mesh":
            domain = PerturbedDomain(args.dim, args.upsilon)
            mesh = _mesh_at(domain, args.level, args.degree)
            if args.out.endswith(".vtk"):
                write_vtk(mesh, args.out)
            else:
                write_mesh_text(mesh, args.out)
            print(f"wrote mesh ({mesh.nodes.shape[0]} nodes, "
                  f"{mesh.cells.shape[0]} cells) to {args.out}")
            return 0
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
