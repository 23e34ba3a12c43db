"""Reference elements, quadrature, iso-parametric transforms and assembly.

Cells use tensorized Lagrange bases on the unit reference cube with
lexicographic node ordering (first reference coordinate fastest), the
same ordering the mesh module uses for cell connectivity, so geometry
and solution share one basis (iso-parametric).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix, direct_solve


class InvertedCellError(RuntimeError):
    """A cell map has a nonpositive Jacobian determinant."""


# ---------------------------------------------------------------------------
# reference elements and quadrature

def _lagrange_1d(nodes: np.ndarray, x: np.ndarray):
    """Values and derivatives of the 1D Lagrange basis at points x."""
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    vals = np.ones(x.shape + (n,))
    ders = np.zeros(x.shape + (n,))
    for m in range(n):
        for j in range(n):
            if j == m:
                continue
            vals[..., m] *= (x - nodes[j]) / (nodes[m] - nodes[j])
        for k in range(n):
            if k == m:
                continue
            term = np.ones_like(x) / (nodes[m] - nodes[k])
            for j in range(n):
                if j in (m, k):
                    continue
                term *= (x - nodes[j]) / (nodes[m] - nodes[j])
            ders[..., m] += term
    return vals, ders


@dataclass(frozen=True)
class ReferenceElement:
    """Tensor-product Lagrange element of given degree on [0,1]^dim."""

    dim: int
    degree: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.degree < 1:
            raise ValueError("degree must be positive")

    @property
    def n_basis(self) -> int:
        return (self.degree + 1) ** self.dim

    @property
    def nodes_1d(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.degree + 1)

    def tabulate(self, points: np.ndarray):
        """Basis values (nq, nb) and reference gradients (nq, nb, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nq = pts.shape[0]
        v1 = []
        d1 = []
        for a in range(self.dim):
            v, d = _lagrange_1d(self.nodes_1d, pts[:, a])
            v1.append(v)
            d1.append(d)
        nb = self.n_basis
        vals = np.ones((nq, nb))
        grads = np.zeros((nq, nb, self.dim))
        for b, idx in enumerate(product(range(self.degree + 1),
                                        repeat=self.dim)):
            # product() iterates the last axis fastest; reverse so the
            # first reference coordinate is the fastest-running index.
            idx = idx[::-1]
            for a in range(self.dim):
                vals[:, b] *= v1[a][:, idx[a]]
            for a in range(self.dim):
                g = d1[a][:, idx[a]].copy()
                for c in range(self.dim):
                    if c != a:
                        g *= v1[c][:, idx[c]]
                grads[:, b, a] = g
        return vals, grads


def shape_eval(elem: ReferenceElement, point):
    """Basis values and reference gradients of all shape functions at one point."""
    pt = np.asarray(point, dtype=float)
    if np.any(pt < -1e-12) or np.any(pt > 1.0 + 1e-12):
        raise ValueError("point must lie in the unit reference cell")
    vals, grads = elem.tabulate(pt[None, :])
    return vals[0], grads[0]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, dim), inside [0,1]^dim
    weights: np.ndarray  # (nq,), positive, summing to 1


def gauss_legendre(dim: int, order: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule exact for degree ``order`` per coordinate."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    n1 = order // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n1)
    x1 = 0.5 * (t + 1.0)
    w1 = 0.5 * w
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    # first coordinate fastest, consistent with the basis ordering
    pts = np.column_stack([g.ravel(order="F") for g in grids])
    wts = np.ones(pts.shape[0])
    for g in wgrids:
        wts = wts * g.ravel(order="F")
    return QuadratureRule(pts, wts)


def _tensor_index(multi, p: int) -> int:
    """Flat node index of a tensor multi-index (first coordinate fastest)."""
    n = 0
    for a in reversed(range(len(multi))):
        n = n * p + multi[a]
    return n


def corner_indices(dim: int, degree: int) -> np.ndarray:
    """Indices of the corner nodes within the tensor node ordering."""
    p = degree + 1
    idx = [_tensor_index(multi, p)
           for multi in product([0, degree], repeat=dim)]
    return np.array(sorted(idx))


def face_node_indices(dim: int, degree: int, local_face: int) -> np.ndarray:
    """Node indices of a local face; faces are (axis, side) pairs in order
    (x-,x+,y-,y+,z-,z+)."""
    axis, side = local_face // 2, local_face % 2
    p = degree + 1
    target = degree if side == 1 else 0
    out = [_tensor_index(multi, p)
           for multi in product(*[range(p)] * dim)
           if multi[axis] == target]
    return np.array(sorted(out))


# ---------------------------------------------------------------------------
# geometry evaluation

def _inv_det(J: np.ndarray):
    """Inverse and determinant for stacked 2x2 or 3x3 matrices."""
    d = J.shape[-1]
    if d == 2:
        a, b = J[..., 0, 0], J[..., 0, 1]
        c, e = J[..., 1, 0], J[..., 1, 1]
        det = a * e - b * c
        inv = np.empty_like(J)
        inv[..., 0, 0] = e
        inv[..., 0, 1] = -b
        inv[..., 1, 0] = -c
        inv[..., 1, 1] = a
        inv /= det[..., None, None]
        return inv, det
    m = J
    det = (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
           - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
           + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1]
    inv[..., 0, 1] = m[..., 0, 2] * m[..., 2, 1] - m[..., 0, 1] * m[..., 2, 2]
    inv[..., 0, 2] = m[..., 0, 1] * m[..., 1, 2] - m[..., 0, 2] * m[..., 1, 1]
    inv[..., 1, 0] = m[..., 1, 2] * m[..., 2, 0] - m[..., 1, 0] * m[..., 2, 2]
    inv[..., 1, 1] = m[..., 0, 0] * m[..., 2, 2] - m[..., 0, 2] * m[..., 2, 0]
    inv[..., 1, 2] = m[..., 0, 2] * m[..., 1, 0] - m[..., 0, 0] * m[..., 1, 2]
    inv[..., 2, 0] = m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]
    inv[..., 2, 1] = m[..., 0, 1] * m[..., 2, 0] - m[..., 0, 0] * m[..., 2, 1]
    inv[..., 2, 2] = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    inv /= det[..., None, None]
    return inv, det


def geometry_batch(mesh, grads: np.ndarray):
    """Jacobians of all cell maps at tabulated reference gradients.

    grads has shape (nq, nb, dim); returns (J, Jinv, detJ) with leading
    shape (n_cells, nq).
    """
    coords = mesh.nodes[mesh.cells]            # (C, nb, dim)
    J = np.einsum("cbd,qbe->cqde", coords, grads)
    Jinv, detJ = _inv_det(J)
    return J, Jinv, detJ


def cell_geometry(mesh, cell: int, point):
    """Physical point, Jacobian and its determinant of one cell map."""
    elem = ReferenceElement(mesh.dim, mesh.degree)
    vals, grads = shape_eval(elem, point)
    coords = mesh.nodes[mesh.cells[cell]]
    x = vals @ coords
    J = coords.T @ grads
    _, det = _inv_det(J[None, ...])
    detJ = float(det[0])
    if detJ <= 0.0:
        raise InvertedCellError(f"cell {cell}: det J = {detJ:g} <= 0")
    return x, J, detJ


def cell_corner_diameters(mesh) -> np.ndarray:
    """Largest corner-to-corner distance per cell."""
    corners = mesh.nodes[mesh.cells[:, corner_indices(mesh.dim, mesh.degree)]]
    diff = corners[:, :, None, :] - corners[:, None, :, :]
    return np.sqrt(np.max(np.sum(diff * diff, axis=-1), axis=(1, 2)))


# ---------------------------------------------------------------------------
# finite element spaces

@dataclass
class FeSpace:
    """Nodal scalar or velocity+pressure space on an iso-parametric mesh."""

    mesh: object
    field_type: str                # 'scalar' or 'velocity_pressure'
    degree: int
    ndofs: int
    dirichlet_mask: np.ndarray     # (ndofs,) bool

    @property
    def n_nodes(self) -> int:
        return self.mesh.nodes.shape[0]

    def component_dofs(self, component: int) -> np.ndarray:
        """Global DOF indices per cell for one field component."""
        return self.mesh.cells + component * self.n_nodes


def boundary_node_set(mesh) -> np.ndarray:
    """Indices of all nodes lying on boundary faces."""
    flags = np.zeros(mesh.nodes.shape[0], dtype=bool)
    for cell, lface, _marker in mesh.boundary_faces:
        flags[mesh.cells[cell][face_node_indices(mesh.dim, mesh.degree, lface)]] = True
    return np.nonzero(flags)[0]


def fe_space(mesh, field_type: str = "scalar") -> FeSpace:
    n_nodes = mesh.nodes.shape[0]
    bnodes = boundary_node_set(mesh)
    if field_type == "scalar":
        mask = np.zeros(n_nodes, dtype=bool)
        mask[bnodes] = True
        return FeSpace(mesh, field_type, mesh.degree, n_nodes, mask)
    if field_type == "velocity_pressure":
        if mesh.dim != 2:
            raise ValueError("velocity+pressure spaces are 2D only")
        mask = np.zeros(3 * n_nodes, dtype=bool)
        mask[bnodes] = True                # u_x
        mask[bnodes + n_nodes] = True      # u_y
        return FeSpace(mesh, field_type, mesh.degree, 3 * n_nodes, mask)
    raise ValueError(f"unknown field type {field_type!r}")


# ---------------------------------------------------------------------------
# assembly

@dataclass
class LinearSystem:
    matrix: SparseMatrix
    rhs: np.ndarray
    ndofs: int


def _evaluate(fn, x: np.ndarray) -> np.ndarray:
    """Evaluate a pointwise callable on an (..., dim) array of points."""
    try:
        out = np.asarray(fn(x), dtype=float)
        if out.shape[:x.ndim - 1] == x.shape[:-1]:
            return out
    except Exception:
        pass
    flat = x.reshape(-1, x.shape[-1])
    vals = np.asarray([fn(p) for p in flat], dtype=float)
    return vals.reshape(x.shape[:-1] + vals.shape[1:])


def _eliminate_dirichlet(rows, cols, vals, rhs, mask):
    """Symmetric elimination with zero boundary values: drop coupled
    entries, put 1 on constrained diagonals, zero the constrained rhs."""
    keep = ~(mask[rows] | mask[cols])
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    fixed = np.nonzero(mask)[0]
    rows = np.concatenate([rows, fixed])
    cols = np.concatenate([cols, fixed])
    vals = np.concatenate([vals, np.ones(fixed.size)])
    rhs = rhs.copy()
    rhs[fixed] = 0.0
    return rows, cols, vals, rhs


def _check_positive_jacobians(detJ: np.ndarray):
    bad = np.nonzero(np.any(detJ <= 0.0, axis=1))[0]
    if bad.size:
        raise InvertedCellError(
            f"nonpositive Jacobian determinant in cells {bad.tolist()[:20]}")


def assemble_laplace(space: FeSpace, f, quad_order: int,
                     apply_dirichlet: bool = True) -> LinearSystem:
    """Stiffness matrix and load vector of the Dirichlet Laplace problem."""
    if space.field_type != "scalar":
        raise ValueError("assemble_laplace expects a scalar space")
    if quad_order < 2 * space.degree + 1:
        raise ValueError("quad_order must be at least 2r+1")
    mesh = space.mesh
    elem = ReferenceElement(mesh.dim, mesh.degree)
    quad = gauss_legendre(mesh.dim, quad_order)
    vals, grads = elem.tabulate(quad.points)
    J, Jinv, detJ = geometry_batch(mesh, grads)
    _check_positive_jacobians(detJ)

    # physical gradients: (grad phi)_d = sum_e Jinv[e,d] ref_grad_e
    G = np.einsum("qbe,cqed->cqbd", grads, Jinv)
    wdet = quad.weights[None, :] * detJ                       # (C, nq)
    local = np.einsum("cq,cqad,cqbd->cab", wdet, G, G)

    coords = mesh.nodes[mesh.cells]
    xq = np.einsum("qb,cbd->cqd", vals, coords)               # (C, nq, dim)
    fq = _evaluate(f, xq)
    local_rhs = np.einsum("cq,cq,qb->cb", wdet, fq, vals)

    cells = mesh.cells
    rows = np.repeat(cells, cells.shape[1], axis=1).ravel()
    cols = np.tile(cells, (1, cells.shape[1])).ravel()
    rhs = np.zeros(space.ndofs)
    np.add.at(rhs, cells.ravel(), local_rhs.ravel())
    entries = local.ravel()
    if apply_dirichlet:
        rows, cols, entries, rhs = _eliminate_dirichlet(
            rows, cols, entries, rhs, space.dirichlet_mask)
    mat = sp.coo_matrix((entries, (rows, cols)),
                        shape=(space.ndofs, space.ndofs)).tocsr()
    return LinearSystem(SparseMatrix.from_scipy(mat), rhs, space.ndofs)


def assemble_stokes_lps(space: FeSpace, f, alpha: float,
                        quad_order: int) -> LinearSystem:
    """Equal-order Stokes system with local-projection pressure stabilization.

    Block layout [A G; G^T -S]: A the vector Laplacian, G the (negative)
    pressure-divergence coupling, S the LPS term penalizing pressure
    gradient fluctuations about their cell means, scaled by alpha*h_T^2.
    Velocity Dirichlet DOFs are eliminated; the pressure gauge is left to
    the solver (mean subtraction after solving).
    """
    if space.field_type != "velocity_pressure":
        raise ValueError("assemble_stokes_lps expects a velocity+pressure space")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    mesh = space.mesh
    elem = ReferenceElement(mesh.dim, mesh.degree)
    quad = gauss_legendre(mesh.dim, quad_order)
    vals, grads = elem.tabulate(quad.points)
    J, Jinv, detJ = geometry_batch(mesh, grads)
    _check_positive_jacobians(detJ)
    G = np.einsum("qbe,cqed->cqbd", grads, Jinv)
    wdet = quad.weights[None, :] * detJ
    nb = elem.n_basis
    n_nodes = space.n_nodes

    stiff = np.einsum("cq,cqad,cqbd->cab", wdet, G, G)
    # div coupling: D[c,a,b,d] = int psi_a * d(phi_b)/dx_d
    Dloc = np.einsum("cq,qa,cqbd->cabd", wdet, vals, G)

    # LPS: fluctuation of pressure-gradient about its cell-mean (constant)
    measure = np.sum(wdet, axis=1)                            # (C,)
    mean_grad = np.einsum("cq,cqbd->cbd", wdet, G) / measure[:, None, None]
    fluct = G - mean_grad[:, None, :, :]
    h_T = cell_corner_diameters(mesh)
    delta = alpha * h_T * h_T
    Sloc = delta[:, None, None] * np.einsum("cq,cqad,cqbd->cab",
                                            wdet, fluct, fluct)

    coords = mesh.nodes[mesh.cells]
    xq = np.einsum("qb,cbd->cqd", vals, coords)
    fq = _evaluate(f, xq)                                     # (C, nq, 2)
    rhs_loc = np.einsum("cq,cqd,qb->cbd", wdet, fq, vals)

    dof_u = [space.component_dofs(0), space.component_dofs(1)]
    dof_p = space.component_dofs(2)

    rows_list, cols_list, vals_list = [], [], []

    def add_block(rdofs, cdofs, loc):
        rows_list.append(np.repeat(rdofs, nb, axis=1).ravel())
        cols_list.append(np.tile(cdofs, (1, nb)).ravel())
        vals_list.append(loc.reshape(-1))

    rhs = np.zeros(space.ndofs)
    for d in range(2):
        add_block(dof_u[d], dof_u[d], stiff)
        # momentum-pressure coupling -(p, div v) and its transpose
        add_block(dof_u[d], dof_p, -np.swapaxes(Dloc[:, :, :, d], 1, 2))
        add_block(dof_p, dof_u[d], -Dloc[:, :, :, d])
        np.add.at(rhs, dof_u[d].ravel(), rhs_loc[:, :, d].ravel())
    add_block(dof_p, dof_p, -Sloc)

    rows = np.concatenate(rows_list)
    cols = np.concatenate(cols_list)
    entries = np.concatenate(vals_list)
    rows, cols, entries, rhs = _eliminate_dirichlet(
        rows, cols, entries, rhs, space.dirichlet_mask)
    mat = sp.coo_matrix((entries, (rows, cols)),
                        shape=(space.ndofs, space.ndofs)).tocsr()
    return LinearSystem(SparseMatrix.from_scipy(mat), rhs, space.ndofs)


def solve_stokes(system: LinearSystem, space: FeSpace) -> np.ndarray:
    """Direct solve of the stabilized Stokes system with pressure gauge.

    The assembled system is singular up to the constant-pressure mode; one
    pressure DOF is pinned for the factorization (which only shifts the
    constant) and the discrete pressure mean is subtracted afterwards.
    """
    n = space.n_nodes
    pin = 2 * n
    mat = system.matrix.to_scipy().tolil(copy=True)
    mat[pin, :] = 0.0
    mat[:, pin] = 0.0
    mat[pin, pin] = 1.0
    rhs = system.rhs.copy()
    rhs[pin] = 0.0
    x = direct_solve(SparseMatrix.from_scipy(mat.tocsr()), rhs)
    x[2 * n:] -= np.mean(x[2 * n:])
    return x


def interpolate(space: FeSpace, g, pressure=None) -> np.ndarray:
    """Nodal interpolant of g (and optionally a pressure field)."""
    coords = space.mesh.nodes
    if space.field_type == "scalar":
        return _evaluate(g, coords)
    vel = _evaluate(g, coords)
    out = np.zeros(space.ndofs)
    out[:space.n_nodes] = vel[:, 0]
    out[space.n_nodes:2 * space.n_nodes] = vel[:, 1]
    if pressure is not None:
        out[2 * space.n_nodes:] = _evaluate(pressure, coords)
    return out
