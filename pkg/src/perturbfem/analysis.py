"""Analytic reference solutions, truncated error norms, and rate extraction.

The manufactured solutions vanish on the unit circle/sphere, so they solve
homogeneous Dirichlet problems on the unit ball.  The Laplace solution is
radially symmetric, u = cos(pi*r/2); its sign is fixed so that -Laplace(u)
equals the stated right-hand sides (pi/(2r) sin(pi r/2) + pi^2/4 cos(pi r/2)
in 2D, with 2/(2r) replaced by 1/r in 3D).  Error norms are evaluated on a
truncated domain: quadrature points are kept only where the physical radius
stays below a truncation radius, which avoids the unmeshed slivers between
a perturbed domain and the unit ball.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fem import FeSpace, ReferenceElement, gauss_legendre, geometry_batch


# ---------------------------------------------------------------------------
# analytic problems

@dataclass(frozen=True)
class AnalyticProblem:
    """Exact solution / gradient / right-hand side of a model problem.

    All evaluators take an (n, dim) array of points.  ``solution`` returns
    (n,) for scalar problems and (n, 2) for Stokes velocity; ``gradient``
    returns (n, dim) or (n, 2, 2); ``pressure`` is present for Stokes only.
    """

    name: str
    dim: int
    field_type: str                      # "scalar" | "velocity_pressure"
    solution: Callable
    gradient: Callable
    rhs: Callable
    pressure: Optional[Callable] = None


def exact_laplace(dim: int, x):
    """Exact solution, gradient and forcing of the radial Laplace problem.

    Returns (u, grad, f) at the given point(s); x may be a single point or
    an (n, dim) array.  u = cos(pi*r/2) vanishes at r=1; the forcing is
    written via sinc so the removable singularity at the origin is exact:
    f = (dim/2) * (pi^2/4) * sinc(r/2)... expanded below.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    r = np.linalg.norm(pts, axis=-1)
    u = np.cos(0.5 * np.pi * r)
    # (pi/(2r)) sin(pi r/2) == (pi^2/4) sinc(r/2); grad u = -(pi^2/4) sinc(r/2) x
    sinc_half = np.sinc(0.5 * r)
    grad = -(np.pi ** 2 / 4.0) * sinc_half[..., None] * pts
    if dim == 2:
        f = (np.pi ** 2 / 4.0) * (sinc_half + u)
    else:
        f = (np.pi ** 2 / 4.0) * (2.0 * sinc_half + u)
    if single:
        return float(u[0]), grad[0], float(f[0])
    return u, grad, f


def exact_stokes(x):
    """Exact velocity, velocity gradient, pressure and forcing (2D Stokes).

    u = cos(g) (y, -x) with g = (pi/2) r^2 is divergence free and vanishes
    at r=1.  The forcing is the tan-free expansion
    f = pi*(y r^2 pi cos g + 4(y-x) sin g, -x r^2 pi cos g - 4(x+y) sin g),
    and p = 4 cos g - 8/pi has zero mean over the unit disk.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 2:
        raise ValueError("points must be 2D")
    xx, yy = pts[..., 0], pts[..., 1]
    r2 = xx * xx + yy * yy
    g = 0.5 * np.pi * r2
    cg, sg = np.cos(g), np.sin(g)
    u = np.stack([yy * cg, -xx * cg], axis=-1)
    grad = np.empty(pts.shape[:-1] + (2, 2))
    grad[..., 0, 0] = -np.pi * xx * yy * sg
    grad[..., 0, 1] = cg - np.pi * yy * yy * sg
    grad[..., 1, 0] = -cg + np.pi * xx * xx * sg
    grad[..., 1, 1] = np.pi * xx * yy * sg
    p = 4.0 * cg - 8.0 / np.pi
    f = np.pi * np.stack([
        yy * r2 * np.pi * cg + 4.0 * (yy - xx) * sg,
        -xx * r2 * np.pi * cg - 4.0 * (xx + yy) * sg,
    ], axis=-1)
    if single:
        return u[0], grad[0], float(p[0]), f[0]
    return u, grad, p, f


def analytic_problem(name: str) -> AnalyticProblem:
    """Look up one of the named model problems."""
    if name == "laplace2d" or name == "laplace3d":
        dim = 2 if name == "laplace2d" else 3
        return AnalyticProblem(
            name=name, dim=dim, field_type="scalar",
            solution=lambda x: exact_laplace(dim, np.atleast_2d(x))[0],
            gradient=lambda x: exact_laplace(dim, np.atleast_2d(x))[1],
            rhs=lambda x: exact_laplace(dim, np.atleast_2d(x))[2])
    if name == "stokes2d":
        return AnalyticProblem(
            name=name, dim=2, field_type="velocity_pressure",
            solution=lambda x: exact_stokes(np.atleast_2d(x))[0],
            gradient=lambda x: exact_stokes(np.atleast_2d(x))[1],
            rhs=lambda x: exact_stokes(np.atleast_2d(x))[3],
            pressure=lambda x: exact_stokes(np.atleast_2d(x))[2])
    raise ValueError(f"unknown problem {name!r}")


# ---------------------------------------------------------------------------
# error norms on truncated domains

@dataclass
class ErrorReport:
    """Error norms of a discrete solution against the analytic one."""

    l2_error: float
    h1_error: float
    h1_semi_error: float
    truncation_radius: float
    ndofs: int
    h_max: float
    level: int
    upsilon: float
    degree: int
    problem: str
    pressure_l2: Optional[float] = None


def _cell_quantities(space: FeSpace, quad_order: int):
    mesh = space.mesh
    elem = ReferenceElement(mesh.dim, space.degree)
    quad = gauss_legendre(mesh.dim, quad_order)
    vals, grads = elem.tabulate(quad.points)
    _, jinv, detj = geometry_batch(mesh, grads)
    wdet = quad.weights[None, :] * detj                       # (nc, nq)
    phys = np.einsum("qb,cbd->cqd", vals, mesh.nodes[mesh.cells])
    # physical gradients of the basis functions, (nc, nq, nb, dim)
    phys_grads = np.einsum("qbe,cqed->cqbd", grads, jinv)
    return vals, phys, phys_grads, wdet


def _scalar_field(space, coeffs, dofs, vals, phys_grads):
    local = coeffs[dofs]                                      # (nc, nb)
    uh = np.einsum("qb,cb->cq", vals, local)
    guh = np.einsum("cqbd,cb->cqd", phys_grads, local)
    return uh, guh


def error_norms(space: FeSpace, coeffs, problem: AnalyticProblem,
                truncation_radius: float, quad_order: int,
                upsilon: float = 0.0,
                include_pressure: bool = False) -> ErrorReport:
    """L2/H1 errors over the part of the mesh with radius < truncation_radius.

    The truncation is applied per quadrature point, so the evaluation
    domain converges to the ball of the given radius without staircase
    effects along cell boundaries.  For Stokes, velocity norms are
    reported; the pressure L2 error is filled in on request.
    """
    if not 0.0 < truncation_radius <= 1.0:
        raise ValueError("truncation_radius must lie in (0, 1]")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != space.ndofs:
        raise ValueError("coefficient vector does not match the space")
    mesh = space.mesh
    vals, phys, phys_grads, wdet = _cell_quantities(space, quad_order)
    flat = phys.reshape(-1, mesh.dim)
    inside = (np.linalg.norm(flat, axis=1)
              < truncation_radius).reshape(wdet.shape)
    w = np.where(inside, wdet, 0.0)

    l2_sq = 0.0
    h1_semi_sq = 0.0
    pressure_l2 = None
    if problem.field_type == "scalar":
        uh, guh = _scalar_field(space, coeffs, space.component_dofs(0), vals,
                                phys_grads)
        u = problem.solution(flat).reshape(wdet.shape)
        gu = problem.gradient(flat).reshape(wdet.shape + (mesh.dim,))
        l2_sq = float(np.sum(w * (uh - u) ** 2))
        h1_semi_sq = float(np.sum(w * np.sum((guh - gu) ** 2, axis=-1)))
    else:
        u = problem.solution(flat).reshape(wdet.shape + (2,))
        gu = problem.gradient(flat).reshape(wdet.shape + (2, 2))
        for comp in range(2):
            dofs = space.component_dofs(comp)
            uh, guh = _scalar_field(space, coeffs, dofs, vals, phys_grads)
            l2_sq += float(np.sum(w * (uh - u[..., comp]) ** 2))
            h1_semi_sq += float(np.sum(
                w * np.sum((guh - gu[:, :, comp, :]) ** 2, axis=-1)))
        if include_pressure:
            dofs = space.component_dofs(2)
            ph, _ = _scalar_field(space, coeffs, dofs, vals, phys_grads)
            p = problem.pressure(flat).reshape(wdet.shape)
            # compare up to the mean: the discrete gauge differs from the
            # zero-mean-on-the-unit-disk normalization of the exact p
            area = float(np.sum(w))
            shift = float(np.sum(w * (ph - p))) / area
            pressure_l2 = float(np.sqrt(np.sum(w * (ph - p - shift) ** 2)))

    l2 = float(np.sqrt(l2_sq))
    h1_semi = float(np.sqrt(h1_semi_sq))
    return ErrorReport(
        l2_error=l2,
        h1_error=float(np.sqrt(l2_sq + h1_semi_sq)),
        h1_semi_error=h1_semi,
        truncation_radius=truncation_radius,
        ndofs=space.ndofs,
        h_max=mesh.h_max,
        level=mesh.level,
        upsilon=upsilon,
        degree=space.degree,
        problem=problem.name,
        pressure_l2=pressure_l2)


def divergence_norm(space: FeSpace, coeffs, truncation_radius: float,
                    quad_order: int) -> float:
    """L2 norm of the discrete velocity divergence on the truncated domain."""
    if space.field_type != "velocity_pressure":
        raise ValueError("divergence_norm expects a velocity/pressure space")
    coeffs = np.asarray(coeffs, dtype=float)
    mesh = space.mesh
    vals, phys, phys_grads, wdet = _cell_quantities(space, quad_order)
    flat = phys.reshape(-1, mesh.dim)
    inside = (np.linalg.norm(flat, axis=1)
              < truncation_radius).reshape(wdet.shape)
    w = np.where(inside, wdet, 0.0)
    div = 0.0
    for comp in range(2):
        local = coeffs[space.component_dofs(comp)]
        div = div + np.einsum("cqb,cb->cq", phys_grads[..., comp], local)
    return float(np.sqrt(np.sum(w * div ** 2)))


# ---------------------------------------------------------------------------
# rates

PLATEAU_RATE = 0.25


def convergence_table(records):
    """Per-level rates for one (problem, degree, upsilon) record group.

    Returns a list of dicts mirroring the reports plus rate_l2 / rate_h1
    (None on the coarsest level) and per-norm plateau flags that fire when
    a rate drops below 0.25.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    key = (records[0].problem, records[0].degree, records[0].upsilon)
    rows = []
    prev = None
    for rec in records:
        if (rec.problem, rec.degree, rec.upsilon) != key:
            raise ValueError("records mix problem/degree/upsilon groups")
        if prev is not None and rec.level <= prev.level:
            raise ValueError("levels must be strictly increasing")
        row = {
            "problem": rec.problem, "degree": rec.degree,
            "upsilon": rec.upsilon, "level": rec.level,
            "h_max": rec.h_max, "ndofs": rec.ndofs,
            "l2_error": rec.l2_error, "h1_error": rec.h1_error,
            "h1_semi_error": rec.h1_semi_error,
            "rate_l2": None, "rate_h1": None,
            "plateau_l2": False, "plateau_h1": False,
        }
        if prev is not None:
            row["rate_l2"] = float(np.log2(prev.l2_error / rec.l2_error))
            row["rate_h1"] = float(np.log2(prev.h1_error / rec.h1_error))
            row["plateau_l2"] = row["rate_l2"] < PLATEAU_RATE
            row["plateau_h1"] = row["rate_h1"] < PLATEAU_RATE
        rows.append(row)
        prev = rec
    return rows


def upsilon_scaling(plateau_errors) -> float:
    """Least-squares log-log slope of plateaued errors against upsilon."""
    pairs = [(float(u), float(e)) for u, e in plateau_errors]
    if len(pairs) < 3:
        raise ValueError("need at least 3 (upsilon, error) points")
    ups = np.array([p[0] for p in pairs])
    err = np.array([p[1] for p in pairs])
    if np.any(ups <= 0.0) or np.any(err <= 0.0):
        raise ValueError("upsilon and error values must be positive")
    slope, _ = np.polyfit(np.log(ups), np.log(err), 1)
    return float(slope)
