"""Manufactured clamped-plate solution, discrete error measures and rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .assembly import (
    EDGE_ORDER,
    VOLUME_ORDER,
    MaterialParams,
    curvature_and_moment,
    edge_data,
    edge_dofs,
    normal_moment,
)
from .mapping import RotationVariant
from .mesh import QuadMesh
from .reference import N_ROTATION, gauss_square
from .spaces import DofMap, displacement_values, rotation_values, tabulate

_X = Polynomial([0.0, 1.0])
_P3 = _X**3 * (_X - 1) ** 3  # x^3 (x-1)^3
_Q = _X**2 * (_X - 1) ** 2 * (2 * _X - 1)  # P3' / 3
_R = _X * (_X - 1) * (5 * _X**2 - 5 * _X + 1)  # P3'' / 6


class Separable:
    """Sum of terms c * p(x) * q(y); derivatives are taken exactly."""

    def __init__(self, terms):
        self.terms = [(float(c), p, q) for c, p, q in terms]

    def __call__(self, x, y, dx: int = 0, dy: int = 0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for c, p, q in self.terms:
            out = out + c * p.deriv(dx)(x) * q.deriv(dy)(y)
        return out


@dataclass(frozen=True)
class ExactSolution:
    """Clamped plate on the unit square with u = u0 + u_r and theta = grad u0.

    The thickness correction is u_r = -2 t^2 / (5 (1 - nu)) * (...), the sign
    for which the load below balances the equilibrium equations with shear
    correction factor 5/6.
    """

    E: float = 180e9
    nu: float = 0.3
    t: float = 1e-2
    u0: Separable = field(init=False, repr=False)
    ur: Separable = field(init=False, repr=False)
    theta_x: Separable = field(init=False, repr=False)
    theta_y: Separable = field(init=False, repr=False)

    def __post_init__(self):
        c = -2.0 * self.t**2 / (5.0 * (1.0 - self.nu))
        object.__setattr__(self, "u0", Separable([(1.0 / 3.0, _P3, _P3)]))
        object.__setattr__(self, "ur", Separable([(c, _R, _P3), (c, _P3, _R)]))
        object.__setattr__(self, "theta_x", Separable([(1.0, _Q, _P3)]))
        object.__setattr__(self, "theta_y", Separable([(1.0, _P3, _Q)]))

    @property
    def D(self) -> float:
        return self.E / (12.0 * (1.0 - self.nu**2))

    def u(self, x, y):
        return self.u0(x, y) + self.ur(x, y)

    def grad_u(self, x, y):
        return np.stack(
            [self.u0(x, y, 1, 0) + self.ur(x, y, 1, 0), self.u0(x, y, 0, 1) + self.ur(x, y, 0, 1)],
            axis=-1,
        )

    def laplacian_u(self, x, y):
        return sum(f(x, y, 2, 0) + f(x, y, 0, 2) for f in (self.u0, self.ur))

    def theta(self, x, y):
        return np.stack([self.theta_x(x, y), self.theta_y(x, y)], axis=-1)

    def grad_theta(self, x, y):
        """G[..., i, j] = d theta_i / d x_j."""
        tx, ty = self.theta_x, self.theta_y
        return np.stack(
            [
                np.stack([tx(x, y, 1, 0), tx(x, y, 0, 1)], axis=-1),
                np.stack([ty(x, y, 1, 0), ty(x, y, 0, 1)], axis=-1),
            ],
            axis=-2,
        )

    def div_moment(self, x, y, params: MaterialParams):
        """div sigma(theta) from exact second derivatives."""
        mu, lam = params.mu, params.lam
        tx, ty = self.theta_x, self.theta_y
        ax_xx, ax_xy, ax_yy = tx(x, y, 2, 0), tx(x, y, 1, 1), tx(x, y, 0, 2)
        ay_xx, ay_xy, ay_yy = ty(x, y, 2, 0), ty(x, y, 1, 1), ty(x, y, 0, 2)
        div_x = (2 * mu + lam) * ax_xx + lam * ay_xy + mu * (ax_yy + ay_xy)
        div_y = mu * (ax_xy + ay_xx) + lam * ax_xy + (2 * mu + lam) * ay_yy
        return np.stack([div_x, div_y], axis=-1)

    def zeta(self, x, y, params: MaterialParams):
        return np.sqrt(params.kappa) * (self.grad_u(x, y) - self.theta(x, y)) / self.t**2

    def g(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (
            self.E
            / (12 * (1 - self.nu**2))
            * (
                12 * y * (y - 1) * (5 * x**2 - 5 * x + 1)
                * (2 * y**2 * (y - 1) ** 2 + x * (x - 1) * (5 * y**2 - 5 * y + 1))
                + 12 * x * (x - 1) * (5 * y**2 - 5 * y + 1)
                * (2 * x**2 * (x - 1) ** 2 + y * (y - 1) * (5 * x**2 - 5 * x + 1))
            )
        )


def exact_fields(E: float = 180e9, nu: float = 0.3, t: float = 1e-2) -> ExactSolution:
    return ExactSolution(E, nu, t)


def manufactured_residuals(exact: ExactSolution, params: MaterialParams, x, y):
    """Strong-form residuals (rotation equation (..., 2), displacement equation (...))."""
    shear = exact.grad_u(x, y) - exact.theta(x, y)
    r_theta = -exact.div_moment(x, y, params) - params.shear_weight * shear
    div_shear = exact.laplacian_u(x, y) - exact.theta_x(x, y, 1, 0) - exact.theta_y(x, y, 0, 1)
    r_u = -params.shear_weight * div_shear - exact.g(x, y)
    return r_theta, r_u


def verify_manufactured_residual(
    E: float = 180e9, nu: float = 0.3, t: float = 1e-2, k_shear: float = 5.0 / 6.0,
    n_points: int = 200, seed: int = 0,
) -> float:
    """Max strong-form residual at random interior points, scaled by max |g|."""
    params = MaterialParams(E=E, nu=nu, t=t, k_shear=k_shear)
    exact = ExactSolution(E, nu, t)
    pts = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n_points, 2))
    r_theta, r_u = manufactured_residuals(exact, params, pts[:, 0], pts[:, 1])
    worst = max(np.abs(r_theta).max(), np.abs(r_u).max())
    return float(worst / np.abs(exact.g(pts[:, 0], pts[:, 1])).max())


def _volume(mesh: QuadMesh, variant, order: int):
    rule = gauss_square(order)
    return tabulate(mesh.corners, variant, rule.points, rule.weights)


def _edge_rotation(data, coef, side):
    tab = data.plus if side == "plus" else data.minus
    elems = [e.plus if side == "plus" else e.minus for e in data.edges]
    Te = coef.reshape(-1, N_ROTATION)[elems]
    val = np.einsum("epai,ea->epi", tab.theta, Te)
    grad = np.einsum("epaij,ea->epij", tab.grad_theta, Te)
    return val, grad


def triple_norm(
    mesh: QuadMesh,
    params: MaterialParams,
    variant: RotationVariant,
    Theta: np.ndarray,
    exact: ExactSolution | None = None,
    order: int = VOLUME_ORDER,
    edge_order: int = EDGE_ORDER,
) -> float:
    """Mesh-dependent energy norm of theta - theta^h (or of theta^h if no exact field)."""
    mu2 = 2 * params.mu + 2 * params.lam
    tab = _volume(mesh, variant, order)
    grad = -rotation_values(tab, Theta)[1]
    if exact is not None:
        grad = grad + exact.grad_theta(tab.x[..., 0], tab.x[..., 1])
    eps, sigma = curvature_and_moment(grad, params.mu, params.lam)
    total = np.einsum("ep,epij,epij->", tab.weights, sigma, eps)

    for edges in (mesh.interior_edges, mesh.boundary_edges):
        if not edges:
            continue
        data = edge_data(mesh, variant, edges, edge_order)
        n = data.normals
        vp, gp = _edge_rotation(data, Theta, "plus")
        ns_p = normal_moment(gp[:, :, None], n, params)[:, :, 0]
        if data.minus is not None:
            vm, gm = _edge_rotation(data, Theta, "minus")
            ns_m = normal_moment(gm[:, :, None], n, params)[:, :, 0]
            jump = -(vp - vm)
            avg = -0.5 * (ns_p + ns_m)
        else:
            jump, avg = -vp, -ns_p
        if exact is not None:
            xe = data.x
            gt = exact.grad_theta(xe[..., 0], xe[..., 1])
            avg = avg + normal_moment(gt[:, :, None], n, params)[:, :, 0]
            if data.minus is None:
                jump = jump + exact.theta(xe[..., 0], xe[..., 1])
        total += np.einsum("ep,e,epi,epi->", data.weights, data.h_E / mu2, avg, avg)
        total += np.einsum("ep,e,epi,epi->", data.weights, mu2 / data.h_E, jump, jump)
    return float(np.sqrt(total))


def triple_norm_error(mesh, params, variant, solution, exact, **kw) -> float:
    return triple_norm(mesh, params, variant, solution.rotation, exact, **kw)


def l2_error_displacement(
    mesh: QuadMesh, dofmap: DofMap, U: np.ndarray, exact: ExactSolution, order: int = VOLUME_ORDER
) -> float:
    tab = _volume(mesh, RotationVariant.PARAMETRIC, order)
    uh, _ = displacement_values(tab, dofmap, U)
    diff = exact.u(tab.x[..., 0], tab.x[..., 1]) - uh
    return float(np.sqrt(np.einsum("ep,ep,ep->", tab.weights, diff, diff)))


def scaled_shear_error(
    mesh: QuadMesh,
    params: MaterialParams,
    variant: RotationVariant,
    dofmap: DofMap,
    U: np.ndarray,
    Theta: np.ndarray,
    exact: ExactSolution,
    order: int = VOLUME_ORDER,
    shear: np.ndarray | None = None,
) -> float:
    """t ||zeta - zeta^h|| with zeta^h = kappa^(1/2) (grad u^h - theta^h) / t^2.

    If the coefficients ``shear`` of grad u^h - theta^h are known (shear-basis
    solves) they are used directly instead of differencing U and Theta.
    """
    tab = _volume(mesh, variant, order)
    if shear is not None:
        discrete, _ = rotation_values(tab, shear)
    else:
        _, grad_u = displacement_values(tab, dofmap, U)
        th, _ = rotation_values(tab, Theta)
        discrete = grad_u - th
    x, y = tab.x[..., 0], tab.x[..., 1]
    diff = (exact.grad_u(x, y) - exact.theta(x, y)) - discrete
    scale = np.sqrt(params.kappa) / params.t
    return float(scale * np.sqrt(np.einsum("ep,epi,epi->", tab.weights, diff, diff)))


def locking_ratio(dofmap: DofMap, U: np.ndarray, exact: ExactSolution) -> float:
    """max |u^h| over the Q2 nodes divided by max |u| over the same nodes."""
    x = dofmap.node_coords
    ref = np.abs(exact.u(x[:, 0], x[:, 1])).max()
    if ref == 0.0:
        raise ValueError("exact displacement vanishes at every node")
    return float(np.abs(U[: dofmap.n_u]).max() / ref)


def convergence_rates(h, errors) -> np.ndarray:
    """Pairwise observed orders log(e_l / e_{l+1}) / log(h_l / h_{l+1})."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2:
        raise ValueError("need at least two levels")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must decrease strictly")
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def consistency_functional(
    mesh: QuadMesh,
    params: MaterialParams,
    variant: RotationVariant,
    dofmap: DofMap,
    exact: ExactSolution,
    order: int = 8,
):
    """Evaluate the discrete form with the exact fields in the trial slot.

    Returns ``(F, S)`` over all DOFs where F[i] = a_h(theta, vartheta_i) +
    (kappa/t^2)(grad u - theta, grad v_i - vartheta_i) - (g, v_i) and S[i] is
    the sum of absolute values of the contributing terms.  Galerkin
    orthogonality of the discrete solution is equivalent to F = 0 on the
    free DOFs.
    """
    tab = _volume(mesh, variant, order)
    x, y = tab.x[..., 0], tab.x[..., 1]
    _, sigma = curvature_and_moment(exact.grad_theta(x, y), params.mu, params.lam)
    eps_b, _ = curvature_and_moment(tab.grad_theta, params.mu, params.lam)
    shear = params.shear_weight * (exact.grad_u(x, y) - exact.theta(x, y))
    gv = exact.g(x, y)

    bend = np.einsum("ep,epij,epaij->ea", tab.weights, sigma, eps_b)
    sh_u = np.einsum("ep,epi,epai->ea", tab.weights, shear, tab.grad_phi)
    sh_t = -np.einsum("ep,epi,epai->ea", tab.weights, shear, tab.theta)
    load = -np.einsum("ep,ep,pa->ea", tab.weights, gv, tab.phi)

    n = dofmap.n_dofs
    F = np.zeros(n)
    S = np.zeros(n)
    for dofs, vals in (
        (dofmap.element_theta, bend), (dofmap.element_u, sh_u),
        (dofmap.element_theta, sh_t), (dofmap.element_u, load),
    ):
        F += np.bincount(dofs.ravel(), weights=vals.ravel(), minlength=n)
        S += np.bincount(dofs.ravel(), weights=np.abs(vals).ravel(), minlength=n)

    # exact theta is continuous with zero trace, so only -(<n.sigma(theta)>, [vartheta]) remains
    for edges in (mesh.interior_edges, mesh.boundary_edges):
        if not edges:
            continue
        data = edge_data(mesh, variant, edges, order)
        xe = data.x
        gt = exact.grad_theta(xe[..., 0], xe[..., 1])
        ns = normal_moment(gt[:, :, None], data.normals, params)[:, :, 0]
        if data.minus is None:
            jump = data.plus.theta
        else:
            jump = np.concatenate([data.plus.theta, -data.minus.theta], axis=2)
        vals = -np.einsum("ep,epi,epai->ea", data.weights, ns, jump)
        dofs = edge_dofs(dofmap, edges)
        F += np.bincount(dofs.ravel(), weights=vals.ravel(), minlength=n)
        S += np.bincount(dofs.ravel(), weights=np.abs(vals).ravel(), minlength=n)
    return F, S
