"""Degree-of-freedom numbering, interpolation and evaluation of discrete fields.

Displacements live in the continuous Q2 parametric space; rotations in the
element-wise discontinuous space mapped from Q_{1,2} x Q_{2,1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mapping
from .mapping import RotationVariant
from .mesh import QuadMesh
from .reference import (
    DISPLACEMENT_NODES,
    N_ROTATION,
    eval_displacement_basis,
    eval_rotation_basis,
    gauss_square,
    gradient_to_rotation_coefficients,
)


class InterpolationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DofMap:
    """Global numbering: displacement DOFs ``0..n_u-1`` then rotation DOFs.

    Displacement nodes are the mesh vertices, then one midpoint per edge (in
    edge order), then one center per element.  Rotation DOF ``a`` of element
    ``k`` is ``n_u + 12*k + a``.
    """

    element_u: np.ndarray  # (ne, 9) global displacement DOFs
    element_theta: np.ndarray  # (ne, 12) global rotation DOFs
    node_coords: np.ndarray  # (n_u, 2)
    constrained: np.ndarray  # sorted displacement DOFs on the boundary
    n_u: int
    n_theta: int

    @property
    def n_dofs(self) -> int:
        return self.n_u + self.n_theta

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)

    def element_dofs(self) -> np.ndarray:
        """(ne, 21): 9 displacement then 12 rotation DOFs per element."""
        return np.hstack([self.element_u, self.element_theta])


def build_dof_map(mesh: QuadMesh) -> DofMap:
    if not mesh.edges:
        raise ValueError("mesh has no edge topology; call build_edge_topology first")
    nv, ne = mesh.n_vertices, mesh.n_elements
    n_edges = len(mesh.edges)
    local_edge = np.empty((ne, 4), dtype=np.int64)
    boundary_nodes = set()
    for idx, edge in enumerate(mesh.edges):
        local_edge[edge.plus, edge.local_plus] = idx
        if edge.is_boundary:
            boundary_nodes.update(edge.vertices)
            boundary_nodes.add(nv + idx)
        else:
            local_edge[edge.minus, edge.local_minus] = idx
    element_u = np.hstack(
        [mesh.quads, nv + local_edge, (nv + n_edges + np.arange(ne))[:, None]]
    ).astype(np.int64)
    n_u = nv + n_edges + ne
    element_theta = n_u + np.arange(ne * N_ROTATION, dtype=np.int64).reshape(ne, N_ROTATION)

    coords = np.empty((n_u, 2))
    coords[:nv] = mesh.vertices
    ev = np.array([e.vertices for e in mesh.edges], dtype=np.int64)
    coords[nv : nv + n_edges] = 0.5 * (mesh.vertices[ev[:, 0]] + mesh.vertices[ev[:, 1]])
    coords[nv + n_edges :] = mesh.corners.mean(axis=1)
    return DofMap(
        element_u=element_u,
        element_theta=element_theta,
        node_coords=coords,
        constrained=np.array(sorted(boundary_nodes), dtype=np.int64),
        n_u=n_u,
        n_theta=ne * N_ROTATION,
    )


@dataclass(frozen=True)
class Tabulation:
    """Mapped bases of every element at a fixed set of reference points."""

    x: np.ndarray  # (ne, P, 2) physical points
    weights: np.ndarray  # (ne, P) quadrature weight * det J
    phi: np.ndarray  # (P, 9)
    grad_phi: np.ndarray  # (ne, P, 9, 2)
    theta: np.ndarray  # (ne, P, 12, 2)
    grad_theta: np.ndarray  # (ne, P, 12, 2, 2)
    J: np.ndarray  # (ne, P, 2, 2)


def tabulate(corners, variant: RotationVariant, points, weights=None) -> Tabulation:
    points = np.atleast_2d(points)
    J, det = mapping.jacobian(corners, points)
    dJ = mapping.jacobian_derivative(corners)
    phi, dphi = eval_displacement_basis(points)
    th, dth = eval_rotation_basis(points)
    ne = J.shape[0]
    th_e = np.broadcast_to(th, (ne,) + th.shape)
    dth_e = np.broadcast_to(dth, (ne,) + dth.shape)
    w = det * (1.0 if weights is None else np.asarray(weights))
    return Tabulation(
        x=mapping.map_point(corners, points),
        weights=w,
        phi=phi,
        grad_phi=mapping.physical_gradient_scalar(J, np.broadcast_to(dphi, (ne,) + dphi.shape)),
        theta=mapping.push_rotation(J, th_e, variant),
        grad_theta=mapping.physical_derivatives_rotation(J, dJ, th_e, dth_e, variant),
        J=J,
    )


def _vector_field(g, x: np.ndarray) -> np.ndarray:
    val = g(x[..., 0], x[..., 1])
    if isinstance(val, (tuple, list)):
        val = np.stack([np.broadcast_to(v, x.shape[:-1]) for v in val], axis=-1)
    return np.asarray(val, dtype=float)


def interpolate_displacement(mesh: QuadMesh, dofmap: DofMap, f) -> np.ndarray:
    """Parametric Lagrange interpolant: nodal values at the mapped Q2 nodes."""
    x = dofmap.node_coords
    return np.asarray(np.broadcast_to(f(x[:, 0], x[:, 1]), (dofmap.n_u,)), dtype=float).copy()


# Reference interpolation for rotations: discrete least squares on a 4x4 Gauss grid.
_SAMPLE = gauss_square(4).points


def _rotation_fit_operator() -> np.ndarray:
    val, _ = eval_rotation_basis(_SAMPLE)
    V = val.transpose(0, 2, 1).reshape(-1, N_ROTATION)  # rows ordered (point, component)
    cond = np.linalg.cond(V)
    if cond > 1e8:
        raise InterpolationError(f"rotation fit is ill-conditioned (cond={cond:.3e})")
    return np.linalg.pinv(V)


_FIT = _rotation_fit_operator()


def interpolate_rotation(mesh: QuadMesh, dofmap: DofMap, variant: RotationVariant, g) -> np.ndarray:
    """Pull ``g`` back to each reference element and project onto Q_{1,2} x Q_{2,1}.

    ``g(x, y)`` returns an array with a trailing axis of length 2 (or a pair).
    """
    corners = mesh.corners
    J, _ = mapping.jacobian(corners, _SAMPLE)
    gv = _vector_field(g, mapping.map_point(corners, _SAMPLE))
    theta_hat = mapping.pull_rotation(J, gv, variant)
    coef = theta_hat.reshape(mesh.n_elements, -1) @ _FIT.T
    return coef.ravel()


def displacement_values(tab: Tabulation, dofmap: DofMap, U: np.ndarray):
    """Values (ne, P) and physical gradients (ne, P, 2) of u^h."""
    Ue = U[dofmap.element_u]
    val = np.einsum("pa,ea->ep", tab.phi, Ue)
    grad = np.einsum("epai,ea->epi", tab.grad_phi, Ue)
    return val, grad


def rotation_values(tab: Tabulation, Theta: np.ndarray):
    """Values (ne, P, 2) and physical gradients (ne, P, 2, 2) of theta^h."""
    Te = Theta.reshape(-1, N_ROTATION)
    val = np.einsum("epai,ea->epi", tab.theta, Te)
    grad = np.einsum("epaij,ea->epij", tab.grad_theta, Te)
    return val, grad


def gradient_rotation_coefficients(dofmap: DofMap, U: np.ndarray) -> np.ndarray:
    """Rotation coefficients reproducing grad u^h exactly under the covariant map."""
    G = gradient_to_rotation_coefficients()
    return (U[dofmap.element_u] @ G.T).ravel()


def represent_gradient(
    mesh: QuadMesh, dofmap: DofMap, variant: RotationVariant, U: np.ndarray, order: int = 4
) -> tuple[np.ndarray, float]:
    """Best rotation field for grad u^h in the discrete L2 sense at quadrature points.

    Returns the coefficients and the relative residual
    ||grad u^h - theta^h|| / ||grad u^h|| over all quadrature points.
    """
    rule = gauss_square(order)
    tab = tabulate(mesh.corners, variant, rule.points, rule.weights)
    _, grad_u = displacement_values(tab, dofmap, U)
    sw = np.sqrt(tab.weights)[..., None]
    A = (tab.theta * sw[..., None]).transpose(0, 1, 3, 2).reshape(mesh.n_elements, -1, N_ROTATION)
    b = (grad_u * sw).reshape(mesh.n_elements, -1)
    coef = np.stack([np.linalg.lstsq(A[k], b[k], rcond=None)[0] for k in range(mesh.n_elements)])
    resid = b - np.einsum("erc,ec->er", A, coef)
    scale = np.linalg.norm(b)
    rel = float(np.linalg.norm(resid) / scale) if scale > 0 else 0.0
    return coef.ravel(), rel
