"""Curved quadrilateral/hexahedral ball meshes with radial boundary fitting.

The coarse layout is an inner Cartesian core (square of half-width 0.4 in
2D, cube of half-width 0.35 in 3D) surrounded by annular/shell patches.
Each patch carries a transfinite map from the unit parameter cube: the
inner face interpolates the core, the outer face is the radially projected
domain boundary, and interior points blend linearly between the two.  All
node placement goes through these maps, so uniform refinement keeps
boundary nodes exactly on the perturbed boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .fem import (ReferenceElement, cell_corner_diameters, gauss_legendre,
                  geometry_batch, InvertedCellError, _tensor_index)
from .geometry import PerturbedDomain, boundary_radius

INNER_HALF_WIDTH_2D = 0.4
INNER_HALF_WIDTH_3D = 0.35

# Boundary nodes are spaced by blending equal-angle increments (0.0) with
# the angles obtained by radially projecting the straight core edge (1.0).
# The blend keeps cell sizes nearly uniform under refinement while avoiding
# the perfectly symmetric equal-angle spacing, whose quadratic mid-edge
# nodes approximate a circle to higher than generic order.
BOUNDARY_GRADING = 0.5


class MeshQualityError(RuntimeError):
    """Raised when a generated mesh contains inverted cells."""


@dataclass
class Mesh:
    """Curved quad/hex mesh with iso-parametric cell maps of degree r.

    ``cells`` lists (degree+1)^dim node indices per cell in tensor order
    (first reference coordinate fastest).  ``boundary_faces`` holds
    (cell, local_face, marker) triples; ``cell_patch``/``cell_origin``
    record the generating patch chart of each cell (None for meshes not
    produced by this module).
    """

    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    boundary_faces: list
    level: int
    degree: int
    h_max: float
    cell_patch: np.ndarray = None
    cell_origin: np.ndarray = None
    cell_size: float = None


# ---------------------------------------------------------------------------
# patch atlas

class _InnerPatch2D:
    is_boundary = False

    def __init__(self, half_width):
        self.a = half_width

    def map(self, params):
        xi, eta = params[..., 0], params[..., 1]
        a = self.a
        return np.stack([-a + 2 * a * xi, -a + 2 * a * eta], axis=-1)


class _AnnularPatch2D:
    """Quarter annulus between one core-square edge and the curved boundary.

    The outer boundary angle interpolates between the corner angles with
    the grading described at BOUNDARY_GRADING; the radius comes from the
    domain's boundary function.  The inner edge stays the straight chord
    of the core square so it matches the inner patch exactly.
    """

    is_boundary = True

    def __init__(self, domain, corner_a, corner_b):
        self.domain = domain
        self.ca = np.asarray(corner_a, dtype=float)
        self.cb = np.asarray(corner_b, dtype=float)
        mid = self.ca + self.cb
        self.phi_mid = np.arctan2(mid[1], mid[0])

    def map(self, params):
        xi, eta = params[..., 0], params[..., 1]
        p_in = (1.0 - xi)[..., None] * self.ca + xi[..., None] * self.cb
        # xi runs clockwise over a quarter turn: offset +pi/4 -> -pi/4.
        beta = BOUNDARY_GRADING
        s = 1.0 - 2.0 * xi
        offset = (1.0 - beta) * (np.pi / 4.0) * s + beta * np.arctan(s)
        phi = self.phi_mid + offset
        d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        rho = boundary_radius(self.domain, (phi,))
        p_out = rho[..., None] * d
        return (1.0 - eta)[..., None] * p_in + eta[..., None] * p_out


class _InnerPatch3D:
    is_boundary = False

    def __init__(self, half_width):
        self.a = half_width

    def map(self, params):
        return -self.a + 2 * self.a * params


class _ShellPatch3D:
    is_boundary = True

    def __init__(self, domain, half_width, axis, side):
        self.domain = domain
        self.a = half_width
        self.axis = axis
        self.side = side
        self.taxes = [a for a in range(3) if a != axis]
        # order tangent axes so (t1, t2, outward normal) is right-handed
        natural = 1.0 if axis in (0, 2) else -1.0
        if natural != side:
            self.taxes.reverse()

    def _cube_point(self, xi1, xi2, warp=False):
        s1 = 2.0 * xi1 - 1.0
        s2 = 2.0 * xi2 - 1.0
        if warp:
            # Same grading as in 2D, applied per tangential coordinate;
            # fixed points at s = -1, 0, 1 keep patch interfaces matching.
            beta = BOUNDARY_GRADING
            s1 = (1.0 - beta) * np.tan(np.pi / 4.0 * s1) + beta * s1
            s2 = (1.0 - beta) * np.tan(np.pi / 4.0 * s2) + beta * s2
        q = np.empty(np.shape(s1) + (3,))
        q[..., self.axis] = self.side
        q[..., self.taxes[0]] = s1
        q[..., self.taxes[1]] = s2
        return q

    def map(self, params):
        xi1, xi2, eta = params[..., 0], params[..., 1], params[..., 2]
        p_in = self.a * self._cube_point(xi1, xi2)
        q = self._cube_point(xi1, xi2, warp=True)
        d = q / np.linalg.norm(q, axis=-1, keepdims=True)
        theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
        rho = boundary_radius(self.domain, (theta, phi))
        p_out = rho[..., None] * d
        return (1.0 - eta)[..., None] * p_in + eta[..., None] * p_out


def _patches(domain: PerturbedDomain):
    if domain.dim == 2:
        a = INNER_HALF_WIDTH_2D
        corners = [(a, a), (-a, a), (-a, -a), (a, -a), (a, a)]
        patches = [_InnerPatch2D(a)]
        # xi runs clockwise so that (xi, eta=outward) is positively oriented
        for k in range(4):
            patches.append(_AnnularPatch2D(domain, corners[k + 1], corners[k]))
        return patches
    a = INNER_HALF_WIDTH_3D
    patches = [_InnerPatch3D(a)]
    for axis in range(3):
        for side in (-1.0, 1.0):
            patches.append(_ShellPatch3D(domain, a, axis, side))
    return patches


# ---------------------------------------------------------------------------
# node deduplication

class _NodeTable:
    """Coordinate-keyed node registry; merges points closer than ``tol``."""

    def __init__(self, tol=1e-8):
        self.tol = tol
        self.scale = 1.0 / tol
        self.table = {}
        self.coords = []
        self._offsets = list(product((-1, 0, 1), repeat=3))

    def insert(self, xyz) -> int:
        base = tuple(int(math.floor(v * self.scale)) for v in xyz)
        dim = len(base)
        for off in self._offsets:
            key = tuple(b + o for b, o in zip(base, off[:dim]))
            j = self.table.get(key)
            if j is not None and all(abs(c - v) < self.tol
                                     for c, v in zip(self.coords[j], xyz)):
                return j
        idx = len(self.coords)
        self.coords.append(tuple(float(v) for v in xyz))
        self.table[base] = idx
        return idx

    def as_array(self) -> np.ndarray:
        return np.array(self.coords)


# ---------------------------------------------------------------------------
# mesh construction

def _check_mesh_jacobians(mesh: Mesh):
    elem = ReferenceElement(mesh.dim, mesh.degree)
    quad = gauss_legendre(mesh.dim, 2 * mesh.degree + 1)
    _, grads = elem.tabulate(quad.points)
    _, _, detJ = geometry_batch(mesh, grads)
    bad = np.nonzero(np.any(detJ <= 0.0, axis=1))[0]
    if bad.size:
        raise MeshQualityError(
            f"nonpositive Jacobian determinant in cells {bad.tolist()[:20]}")


def _build(domain: PerturbedDomain, level: int) -> Mesh:
    dim = domain.dim
    n = 2 ** level
    patches = _patches(domain)
    table = _NodeTable()
    cells = []
    cell_patch = []
    cell_origin = []
    boundary_faces = []
    grid1 = np.linspace(0.0, 1.0, n + 1)

    for pid, patch in enumerate(patches):
        axes = np.meshgrid(*([grid1] * dim), indexing="ij")
        params = np.stack(axes, axis=-1)
        coords = patch.map(params)
        gids = np.empty((n + 1,) * dim, dtype=np.int64)
        for multi in product(*[range(n + 1)] * dim):
            gids[multi] = table.insert(coords[multi])
        for cmulti in product(*[range(n)] * dim):
            corner_ids = []
            for delta in product([0, 1], repeat=dim):
                delta = delta[::-1]  # first coordinate fastest
                corner_ids.append(gids[tuple(c + d for c, d in
                                             zip(cmulti, delta))])
            cell_id = len(cells)
            cells.append(corner_ids)
            cell_patch.append(pid)
            cell_origin.append([c / n for c in cmulti])
            if patch.is_boundary and cmulti[-1] == n - 1:
                boundary_faces.append((cell_id, 2 * dim - 1, 1))

    mesh = Mesh(dim=dim,
                nodes=table.as_array(),
                cells=np.array(cells, dtype=np.int64),
                boundary_faces=boundary_faces,
                level=level,
                degree=1,
                h_max=0.0,
                cell_patch=np.array(cell_patch, dtype=np.int64),
                cell_origin=np.array(cell_origin),
                cell_size=1.0 / n)
    mesh.h_max = float(np.max(cell_corner_diameters(mesh)))
    _check_mesh_jacobians(mesh)
    return mesh


def coarse_mesh(domain: PerturbedDomain) -> Mesh:
    """Coarse ball mesh: 5 quads (2D) or 7 hexes (3D), level 0, degree 1."""
    return _build(domain, 0)


def refine_uniform(mesh: Mesh, domain: PerturbedDomain) -> Mesh:
    """One uniform refinement; boundary nodes are re-projected radially and
    interior nodes placed by the transfinite patch blending."""
    if mesh.degree != 1:
        raise ValueError("refine_uniform expects a degree-1 mesh")
    if mesh.dim != domain.dim:
        raise ValueError("mesh/domain dimension mismatch")
    if mesh.cell_patch is None:
        raise ValueError("mesh does not carry patch charts")
    return _build(domain, mesh.level + 1)


def elevate_to_isoparametric(mesh: Mesh, domain: PerturbedDomain,
                             r: int) -> Mesh:
    """Raise the geometry degree to r by adding mid-nodes.

    Mid-nodes of boundary edges/faces are placed on the perturbed boundary
    through the patch chart at the averaged parameter; all other new nodes
    are arithmetic means of their parent corners.
    """
    if r not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if mesh.degree != 1:
        raise ValueError("elevate expects a degree-1 mesh")
    if r == 1:
        return mesh
    if mesh.cell_patch is None:
        raise ValueError("mesh does not carry patch charts")
    dim = mesh.dim
    patches = _patches(domain)
    table = _NodeTable()
    for xyz in mesh.nodes:
        table.insert(xyz)

    n_cells = mesh.cells.shape[0]
    new_cells = np.empty((n_cells, 3 ** dim), dtype=np.int64)
    size = mesh.cell_size
    for c in range(n_cells):
        patch = patches[mesh.cell_patch[c]]
        origin = mesh.cell_origin[c]
        on_top = patch.is_boundary and abs(origin[-1] + size - 1.0) < 1e-12
        corners = mesh.nodes[mesh.cells[c]]
        for multi in product(*[range(3)] * dim):
            multi = multi[::-1]  # first coordinate fastest
            pos = _tensor_index(multi, 3)
            if all(m % 2 == 0 for m in multi):
                q1pos = _tensor_index([m // 2 for m in multi], 2)
                xyz = corners[q1pos]
            elif on_top and multi[-1] == 2:
                param = np.array([o + m / 2.0 * size
                                  for o, m in zip(origin, multi)])
                param[-1] = 1.0
                xyz = patch.map(param[None, :])[0]
            else:
                parents = []
                choices = [[m] if m % 2 == 0 else [m - 1, m + 1]
                           for m in multi]
                for pm in product(*choices):
                    parents.append(corners[_tensor_index(
                        [p // 2 for p in pm], 2)])
                xyz = np.mean(parents, axis=0)
            new_cells[c, pos] = table.insert(xyz)

    out = Mesh(dim=dim,
               nodes=table.as_array(),
               cells=new_cells,
               boundary_faces=list(mesh.boundary_faces),
               level=mesh.level,
               degree=2,
               h_max=mesh.h_max,
               cell_patch=mesh.cell_patch,
               cell_origin=mesh.cell_origin,
               cell_size=mesh.cell_size)
    _check_mesh_jacobians(out)
    return out


# ---------------------------------------------------------------------------
# export

def write_mesh_text(mesh: Mesh, path):
    """Plain-text dump: header, node coordinates, cells, boundary faces."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.degree} {mesh.nodes.shape[0]} "
                 f"{mesh.cells.shape[0]}\n")
        for xyz in mesh.nodes:
            fh.write(" ".join(repr(float(v)) for v in xyz) + "\n")
        for cell in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in cell) + "\n")
        for cell, lface, marker in mesh.boundary_faces:
            fh.write(f"{cell} {lface} {marker}\n")


_VTK_CORNER_ORDER = {2: [0, 1, 3, 2], 3: [0, 1, 3, 2, 4, 5, 7, 6]}


def write_vtk(mesh: Mesh, path, point_data=None):
    """Legacy-VTK unstructured grid export (corner geometry only)."""
    from .fem import corner_indices
    order = _VTK_CORNER_ORDER[mesh.dim]
    corners = mesh.cells[:, corner_indices(mesh.dim, mesh.degree)][:, order]
    n_corner = corners.shape[1]
    cell_type = 9 if mesh.dim == 2 else 12
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nperturbfem mesh\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.nodes.shape[0]} double\n")
        for xyz in mesh.nodes:
            coords = list(xyz) + [0.0] * (3 - mesh.dim)
            fh.write(" ".join(repr(float(v)) for v in coords) + "\n")
        n_cells = corners.shape[0]
        fh.write(f"CELLS {n_cells} {n_cells * (n_corner + 1)}\n")
        for cell in corners:
            fh.write(str(n_corner) + " " +
                     " ".join(str(int(v)) for v in cell) + "\n")
        fh.write(f"CELL_TYPES {n_cells}\n")
        for _ in range(n_cells):
            fh.write(f"{cell_type}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.nodes.shape[0]}\n")
            for name, values in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values):
                    fh.write(repr(float(v)) + "\n")
