"""Radially perturbed ball domains and closed-form geometry-error examples.

The domain family is a unit ball whose boundary radius is modulated by a
sinusoidal perturbation of amplitude ``upsilon``:

* 2D: rho(phi)        = 1 - upsilon/5 + upsilon*sin(8*phi)
* 3D: rho(theta, phi) = 1 - upsilon/5 + upsilon*sin(3*phi)*sin(3*theta)

Besides the domain description this module provides a sampled Hausdorff
distance estimator between two such boundaries and the two analytic
benchmark computations used by the experiment harness: the L2/H1 errors
between the exact Poisson solutions on two shifted unit disks, and the
metric defect of the disk-to-ellipse map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class PerturbedDomain:
    """Analytic description of the (possibly perturbed) ball domain."""

    dim: int
    upsilon: float = 0.0
    kind: str = "radial_perturbation"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.upsilon < 0.0:
            raise ValueError("upsilon must be nonnegative")
        if self.kind not in ("unit_ball", "radial_perturbation"):
            raise ValueError(f"unknown domain kind {self.kind!r}")


@dataclass(frozen=True)
class MapDiagnostics:
    """Metric/volume defect of a domain map, sampled over given points."""

    sup_norm_defect: float
    jacobian_min: float
    jacobian_max: float


def boundary_radius(domain: PerturbedDomain, angles):
    """Boundary radius at the given angles: (phi,) in 2D, (theta, phi) in 3D.

    Angle entries may be scalars or broadcastable numpy arrays.
    """
    if domain.dim == 2:
        if len(angles) != 1:
            raise ValueError("2D domain expects a single angle (phi,)")
        (phi,) = angles
        if domain.kind == "unit_ball":
            return np.ones_like(np.asarray(phi, dtype=float))
        ups = domain.upsilon
        return 1.0 - ups / 5.0 + ups * np.sin(8.0 * np.asarray(phi, dtype=float))
    if len(angles) != 2:
        raise ValueError("3D domain expects two angles (theta, phi)")
    theta, phi = angles
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if domain.kind == "unit_ball":
        return np.ones_like(theta * phi)
    ups = domain.upsilon
    return 1.0 - ups / 5.0 + ups * np.sin(3.0 * phi) * np.sin(3.0 * theta)


def boundary_points(domain: PerturbedDomain, n_samples: int) -> np.ndarray:
    """Sample the boundary with n_samples points per angular direction."""
    if domain.dim == 2:
        phi = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
        rho = boundary_radius(domain, (phi,)) * np.ones_like(phi)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])
    theta = np.linspace(0.0, np.pi, n_samples, endpoint=False)
    phi = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    rho = boundary_radius(domain, (tt, pp)) * np.ones_like(tt)
    pts = np.column_stack([
        (rho * np.sin(tt) * np.cos(pp)).ravel(),
        (rho * np.sin(tt) * np.sin(pp)).ravel(),
        (rho * np.cos(tt)).ravel(),
    ])
    return pts


def hausdorff_between_point_sets(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    d_ab = np.max(cKDTree(b).query(a)[0])
    d_ba = np.max(cKDTree(a).query(b)[0])
    return float(max(d_ab, d_ba))


def hausdorff_distance(a: PerturbedDomain, b: PerturbedDomain,
                       n_samples: int) -> float:
    """Sampled Hausdorff distance between the boundaries of two domains."""
    if a.dim != b.dim:
        raise ValueError("domains must share the dimension")
    if n_samples < 64:
        raise ValueError("need at least 64 samples per angular direction")
    return hausdorff_between_point_sets(boundary_points(a, n_samples),
                                        boundary_points(b, n_samples))


def _gauss_1d(a, b, n):
    """Gauss-Legendre nodes/weights on [a, b]; limits may be arrays."""
    t, w = np.polynomial.legendre.leggauss(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[..., None] + half[..., None] * t
    return x, half[..., None] * w


def shifted_disk_errors(upsilon: float, quadrature_order: int):
    """L2 and H1-seminorm error between the Poisson solutions on shifted disks.

    u = 1 - x^2 - y^2 on the unit disk, u_r = 1 - (x-ups)^2 - y^2 on the disk
    shifted by ups along x; u_r is extended by zero.  Both norms are taken
    over the unshifted disk, split into the lens (intersection) and the
    crescent (remainder), each integrated in polar coordinates about the
    origin with tensorized Gauss rules of ``quadrature_order`` points.
    """
    if not 0.0 < upsilon < 0.5:
        raise ValueError("upsilon must lie in (0, 0.5)")
    if quadrature_order < 2:
        raise ValueError("quadrature_order must be at least 2")
    l2_sq, h1_sq, _ = _shifted_disk_integrals(upsilon, quadrature_order)
    return float(np.sqrt(l2_sq)), float(np.sqrt(h1_sq))


def shifted_disk_lens_area(upsilon: float, quadrature_order: int) -> float:
    """Area of the intersection of the two shifted unit disks."""
    if not 0.0 < upsilon < 0.5:
        raise ValueError("upsilon must lie in (0, 0.5)")
    return _shifted_disk_integrals(upsilon, quadrature_order)[2]


def _shifted_disk_integrals(ups, n):
    # Intersection corners of |x|=1 and |x - ups*e1|=1 sit at angle
    # +-phi_star; the shifted circle in origin polar coordinates is
    # r_in(phi) = ups*cos(phi) + sqrt(1 - ups^2 sin^2(phi)).
    phi_star = np.arccos(0.5 * ups)

    def r_in(phi):
        return ups * np.cos(phi) + np.sqrt(1.0 - (ups * np.sin(phi)) ** 2)

    def integrate(phi_a, phi_b, r_lo_fn, r_hi_fn, fn):
        phi, wphi = _gauss_1d(phi_a, phi_b, n)
        r_lo = r_lo_fn(phi)
        r_hi = r_hi_fn(phi)
        r, wr = _gauss_1d(r_lo, r_hi, n)          # shape (nphi, nr)
        vals = fn(r, phi[..., None]) * r
        return float(np.sum(wphi[..., None] * wr * vals))

    def e_lens_sq(r, phi):
        x = r * np.cos(phi)
        return (ups * ups - 2.0 * ups * x) ** 2

    def e_cres_sq(r, phi):
        return (1.0 - r * r) ** 2

    zero = lambda phi: np.zeros_like(phi)
    one = lambda phi: np.ones_like(phi)

    # Lens: the full wedge |phi| < phi_star up to r=1, plus the back wedge
    # bounded by the shifted circle.
    lens_l2 = (integrate(-phi_star, phi_star, zero, one, e_lens_sq)
               + integrate(phi_star, 2.0 * np.pi - phi_star, zero, r_in, e_lens_sq))
    lens_area = (integrate(-phi_star, phi_star, zero, one, lambda r, p: np.ones_like(r))
                 + integrate(phi_star, 2.0 * np.pi - phi_star, zero, r_in,
                             lambda r, p: np.ones_like(r)))
    # Crescent: between the shifted circle and the unit circle.
    cres_l2 = integrate(phi_star, 2.0 * np.pi - phi_star, r_in, one, e_cres_sq)
    cres_h1 = integrate(phi_star, 2.0 * np.pi - phi_star, r_in, one,
                        lambda r, p: 4.0 * r * r)

    l2_sq = lens_l2 + cres_l2
    h1_sq = 4.0 * ups * ups * lens_area + cres_h1
    return l2_sq, h1_sq, lens_area


def ellipse_map_diagnostics(upsilon: float, sample_points) -> MapDiagnostics:
    """Defect of the disk-to-ellipse map x -> (x1/(1+ups), (1+ups)*x2).

    The defect matrix I - J F^-1 F^-T is constant for this map; its sup
    norm equals 2*ups + ups^2 and the Jacobian determinant is exactly 1.
    """
    if upsilon < 0.0:
        raise ValueError("upsilon must be nonnegative")
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.size and np.any(np.sum(pts * pts, axis=1) > 1.0 + 1e-12):
        raise ValueError("sample points must lie in the closed unit disk")
    s = 1.0 + upsilon
    # I - J F^-1 F^-T = diag(1 - s^2, 1 - s^-2)
    defect = np.abs(np.array([1.0 - s * s, 1.0 - 1.0 / (s * s)]))
    return MapDiagnostics(sup_norm_defect=float(np.max(defect)),
                          jacobian_min=1.0, jacobian_max=1.0)
