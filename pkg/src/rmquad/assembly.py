"""Assembly of the coupled displacement/rotation system.

The bilinear form is the element bending energy plus symmetric interior
penalty (Nitsche) terms on every edge for the discontinuous rotations, plus
the shear coupling (kappa / t^2)(grad u - theta, grad v - vartheta).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mapping import RotationVariant
from .mesh import Edge, QuadMesh
from .reference import (
    N_ROTATION,
    gauss_segment,
    gauss_square,
    gradient_to_rotation_coefficients,
)
from .spaces import DofMap, Tabulation, build_dof_map, tabulate

VOLUME_ORDER = 4
EDGE_ORDER = 4


class TopologyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    E: float = 180e9
    nu: float = 0.3
    t: float = 1e-2
    k_shear: float = 5.0 / 6.0
    gamma: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")
        if self.E <= 0 or self.t <= 0 or self.k_shear <= 0 or self.gamma <= 0:
            raise ValueError("E, t, k_shear and gamma must be positive")

    @property
    def mu(self) -> float:
        return self.E / (24.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.nu * self.E / (12.0 * (1.0 - self.nu**2))

    @property
    def kappa(self) -> float:
        return self.E * self.k_shear / (2.0 * (1.0 + self.nu))

    @property
    def shear_weight(self) -> float:
        return self.kappa / self.t**2


def curvature_and_moment(grad: np.ndarray, mu: float, lam: float):
    """Curvature eps = sym(grad theta) and moment sigma = 2 mu eps + lam tr(eps) I."""
    grad = np.asarray(grad, dtype=float)
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    sigma = 2.0 * mu * eps + lam * tr[..., None, None] * np.eye(2)
    return eps, sigma


def element_bending(tab: Tabulation, params: MaterialParams) -> np.ndarray:
    """(ne, 12, 12) matrices of (sigma(theta_b), eps(theta_a))_K."""
    eps, sigma = curvature_and_moment(tab.grad_theta, params.mu, params.lam)
    return np.einsum("ep,epaij,epbij->eab", tab.weights, eps, sigma)


def element_shear(tab: Tabulation, params: MaterialParams) -> np.ndarray:
    """(ne, 21, 21) shear matrices over (9 displacement, 12 rotation) DOFs."""
    B = np.concatenate([tab.grad_phi, -tab.theta], axis=2)
    return params.shear_weight * np.einsum("ep,epai,epbi->eab", tab.weights, B, B)


def element_load(tab: Tabulation, g) -> np.ndarray:
    gv = np.broadcast_to(g(tab.x[..., 0], tab.x[..., 1]), tab.weights.shape)
    return np.einsum("ep,ep,pa->ea", tab.weights, gv, tab.phi)


def edge_reference_points(local_edge: int, s: np.ndarray) -> np.ndarray:
    """Points on local edge ``local_edge`` of the reference square, traversed counterclockwise."""
    s = np.asarray(s, dtype=float)
    z, o = np.zeros_like(s), np.ones_like(s)
    return np.column_stack(
        [(s, z), (o, s), (1 - s, o), (z, 1 - s)][local_edge]
    )


def _side_tabulation(mesh: QuadMesh, variant, elements, local_edges, s) -> Tabulation:
    """Tabulate bases of the given elements on their local edges at parameters s."""
    corners = mesh.corners
    nE = len(elements)
    P = len(s)
    x = np.empty((nE, P, 2))
    theta = np.empty((nE, P, N_ROTATION, 2))
    grad = np.empty((nE, P, N_ROTATION, 2, 2))
    for loc in range(4):
        sel = np.flatnonzero(local_edges == loc)
        if sel.size == 0:
            continue
        tab = tabulate(corners[elements[sel]], variant, edge_reference_points(loc, s))
        x[sel], theta[sel], grad[sel] = tab.x, tab.theta, tab.grad_theta
    return Tabulation(x=x, weights=None, phi=None, grad_phi=None, theta=theta, grad_theta=grad, J=None)


@dataclass
class EdgeData:
    """Rotation traces on a group of edges, evaluated at edge quadrature points."""

    edges: list[Edge]
    normals: np.ndarray  # (nE, 2)
    h_E: np.ndarray  # (nE,)
    weights: np.ndarray  # (nE, P) quadrature weight * |E|
    x: np.ndarray  # (nE, P, 2)
    plus: Tabulation
    minus: Tabulation | None = None


def edge_data(mesh: QuadMesh, variant, edges: list[Edge], order: int = EDGE_ORDER) -> EdgeData:
    rule = gauss_segment(order)
    s = rule.points[:, 0]
    plus = np.array([e.plus for e in edges], dtype=np.int64)
    lp = np.array([e.local_plus for e in edges], dtype=np.int64)
    tp = _side_tabulation(mesh, variant, plus, lp, s)
    tm = None
    if edges and not edges[0].is_boundary:
        minus = np.array([e.minus for e in edges], dtype=np.int64)
        lm = np.array([e.local_minus for e in edges], dtype=np.int64)
        # T- traverses the shared edge in the opposite direction
        tm = _side_tabulation(mesh, variant, minus, lm, 1.0 - s)
        gap = np.abs(tp.x - tm.x).max() if len(edges) else 0.0
        if gap > 1e-10:
            raise TopologyError(f"edge traces do not match (gap {gap:.3e})")
    lengths = np.array([e.length for e in edges])
    return EdgeData(
        edges=edges,
        normals=np.array([e.normal for e in edges]).reshape(-1, 2),
        h_E=np.array([e.h_E for e in edges]),
        weights=lengths[:, None] * rule.weights[None, :],
        x=tp.x,
        plus=tp,
        minus=tm,
    )


def normal_moment(grad: np.ndarray, normals: np.ndarray, params: MaterialParams) -> np.ndarray:
    """n . sigma for gradients (nE, P, B, 2, 2) and normals (nE, 2)."""
    _, sigma = curvature_and_moment(grad, params.mu, params.lam)
    return np.einsum("ei,epbij->epbj", normals, sigma)


def edge_jump_average(data: EdgeData, params: MaterialParams):
    """Jump and average of the rotation basis over the edge DOFs.

    Interior edges carry 24 DOFs (T+ then T-); boundary edges carry the 12 of T+.
    """
    nsp = normal_moment(data.plus.grad_theta, data.normals, params)
    if data.minus is None:
        return data.plus.theta, nsp
    nsm = normal_moment(data.minus.grad_theta, data.normals, params)
    jump = np.concatenate([data.plus.theta, -data.minus.theta], axis=2)
    avg = 0.5 * np.concatenate([nsp, nsm], axis=2)
    return jump, avg


def edge_terms(data: EdgeData, params: MaterialParams) -> np.ndarray:
    """Local Nitsche matrices (consistency, its transpose, and penalty)."""
    jump, avg = edge_jump_average(data, params)
    cons = np.einsum("ep,epbi,epai->eab", data.weights, avg, jump)
    pen = (params.mu + params.lam) * params.gamma
    penalty = np.einsum("ep,e,epai,epbi->eab", data.weights, pen / data.h_E, jump, jump)
    return penalty - cons - np.swapaxes(cons, 1, 2)


def edge_dofs(dofmap: DofMap, edges: list[Edge]) -> np.ndarray:
    plus = dofmap.element_theta[[e.plus for e in edges]]
    if edges and not edges[0].is_boundary:
        return np.hstack([plus, dofmap.element_theta[[e.minus for e in edges]]])
    return plus


class _Scatter:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs: np.ndarray, local: np.ndarray):
        n = dofs.shape[1]
        self.rows.append(np.repeat(dofs, n, axis=1).ravel())
        self.cols.append(np.tile(dofs, (1, n)).ravel())
        self.vals.append(local.ravel())

    def matrix(self, size: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((size, size))
        A = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(size, size),
        ).tocsr()
        A.sum_duplicates()
        return A


def shear_basis_transform() -> np.ndarray:
    """Local map T (12, 21) with theta = T @ [u (9), s (12)], i.e. theta = grad u - s."""
    return np.hstack([gradient_to_rotation_coefficients(), -np.eye(N_ROTATION)])


def _pair_transform(T: np.ndarray) -> np.ndarray:
    r, c = T.shape
    out = np.zeros((2 * r, 2 * c))
    out[:r, :c] = T
    out[r:, c:] = T
    return out


def assemble_matrix(
    mesh: QuadMesh,
    params: MaterialParams,
    variant: RotationVariant = RotationVariant.COVARIANT,
    dofmap: DofMap | None = None,
    boundary_edges: bool = True,
    shear: bool = True,
    order: int = VOLUME_ORDER,
    shear_basis: bool = False,
) -> sp.csr_matrix:
    """Full (unreduced) matrix over all n_u + n_theta DOFs.

    With ``shear_basis`` (covariant variant only) the rotation slots hold the
    coefficients of s = grad u^h - theta^h instead of theta^h.  This spans the
    same discrete space because grad V_D is contained in V_R elementwise, and
    the shear block becomes (kappa/t^2)(s, s) with no cancellation as t -> 0.
    """
    variant = RotationVariant(variant)
    if shear_basis and variant is not RotationVariant.COVARIANT:
        raise ValueError("the shear basis requires the covariant rotation map")
    dofmap = dofmap or build_dof_map(mesh)
    rule = gauss_square(order)
    tab = tabulate(mesh.corners, variant, rule.points, rule.weights)
    scatter = _Scatter()
    bending = element_bending(tab, params)
    groups = [mesh.interior_edges] + ([mesh.boundary_edges] if boundary_edges else [])
    if shear_basis:
        T = shear_basis_transform()
        elem = dofmap.element_dofs()
        scatter.add(elem, T.T @ bending @ T)
        if shear:
            mass = np.einsum("ep,epai,epbi->eab", tab.weights, tab.theta, tab.theta)
            scatter.add(dofmap.element_theta, params.shear_weight * mass)
        for edges in groups:
            if not edges:
                continue
            local = edge_terms(edge_data(mesh, variant, edges), params)
            if edges[0].is_boundary:
                dofs, Tl = elem[[e.plus for e in edges]], T
            else:
                dofs = np.hstack([elem[[e.plus for e in edges]], elem[[e.minus for e in edges]]])
                Tl = _pair_transform(T)
            scatter.add(dofs, Tl.T @ local @ Tl)
        return scatter.matrix(dofmap.n_dofs)

    scatter.add(dofmap.element_theta, bending)
    if shear:
        scatter.add(dofmap.element_dofs(), element_shear(tab, params))
    for edges in groups:
        if edges:
            data = edge_data(mesh, variant, edges)
            scatter.add(edge_dofs(dofmap, edges), edge_terms(data, params))
    return scatter.matrix(dofmap.n_dofs)


def assemble_load(mesh: QuadMesh, dofmap: DofMap, g, order: int = VOLUME_ORDER) -> np.ndarray:
    rule = gauss_square(order)
    tab = tabulate(mesh.corners, RotationVariant.PARAMETRIC, rule.points, rule.weights)
    local = element_load(tab, g)
    return np.bincount(dofmap.element_u.ravel(), weights=local.ravel(), minlength=dofmap.n_dofs)


@dataclass
class SparseSystem:
    """Reduced system over the free DOFs; constrained displacement DOFs are zero."""

    A: sp.csr_matrix
    b: np.ndarray
    free: np.ndarray
    dofmap: DofMap
    variant: RotationVariant
    params: MaterialParams
    shear_basis: bool = False
    full_matrix: sp.csr_matrix = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return len(self.b)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Full coefficient vector [U, Theta] from a reduced solution vector.

        In the shear basis the second block is converted back to theta^h.
        """
        full = np.zeros(self.dofmap.n_dofs)
        full[self.free] = x
        if self.shear_basis:
            n_u = self.dofmap.n_u
            grad = (full[self.dofmap.element_u] @ gradient_to_rotation_coefficients().T).ravel()
            full[n_u:] = grad - full[n_u:]
        return full

    def shear_coefficients(self, x: np.ndarray) -> np.ndarray:
        """Coefficients of grad u^h - theta^h in the rotation space (shear basis only)."""
        if not self.shear_basis:
            raise ValueError("system was not assembled in the shear basis")
        full = np.zeros(self.dofmap.n_dofs)
        full[self.free] = x
        return full[self.dofmap.n_u :]


def assemble(
    mesh: QuadMesh,
    params: MaterialParams,
    variant: RotationVariant = RotationVariant.COVARIANT,
    g=None,
    dofmap: DofMap | None = None,
    shear_basis: bool | None = None,
) -> SparseSystem:
    """Reduced system for the clamped plate with load ``g(x, y)``.

    ``shear_basis`` defaults to True for the covariant map, see
    :func:`assemble_matrix`.
    """
    variant = RotationVariant(variant)
    if shear_basis is None:
        shear_basis = variant is RotationVariant.COVARIANT
    dofmap = dofmap or build_dof_map(mesh)
    A = assemble_matrix(mesh, params, variant, dofmap, shear_basis=shear_basis)
    b = assemble_load(mesh, dofmap, g) if g is not None else np.zeros(dofmap.n_dofs)
    free = dofmap.free
    return SparseSystem(
        A=A[free][:, free].tocsr(),
        b=b[free],
        free=free,
        dofmap=dofmap,
        variant=variant,
        params=params,
        shear_basis=shear_basis,
        full_matrix=A,
    )
