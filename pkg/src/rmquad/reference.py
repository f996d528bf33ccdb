"""Reference-square bases and Gauss rules on [0, 1]^2.

Displacement nodes are numbered corners first (matching the geometry basis),
then the midpoints of local edges 0..3, then the center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = range(1, 13)

# Q2 node positions as (i, j) indices into the 1D nodes {0, 1/2, 1}
_Q2_IJ = np.array([(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)])
DISPLACEMENT_NODES = _Q2_IJ / 2.0

# Rotation monomials x^a y^b: first six drive the x-component, last six the y-component.
ROTATION_X_EXPONENTS = [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2)]
ROTATION_Y_EXPONENTS = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1)]
N_DISPLACEMENT = 9
N_ROTATION = 12


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, dim)
    weights: np.ndarray  # (nq,)

    def __len__(self) -> int:
        return len(self.weights)


def _gauss_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported quadrature order {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_segment(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for degree 2*order - 1."""
    x, w = _gauss_1d(order)
    return QuadratureRule(x[:, None], w)


def gauss_square(order: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule on [0, 1]^2, exact for Q_{2*order-1}."""
    x, w = _gauss_1d(order)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def _clamp(xhat) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=float)
    return np.clip(xhat, 0.0, 1.0) if np.all(np.abs(xhat - 0.5) <= 0.5 + 1e-12) else xhat


def _lagrange_1d(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic Lagrange functions on nodes {0, 1/2, 1} and their derivatives."""
    val = np.stack([2 * (s - 0.5) * (s - 1), -4 * s * (s - 1), 2 * s * (s - 0.5)], axis=-1)
    der = np.stack([4 * s - 3, 4 - 8 * s, 4 * s - 1], axis=-1)
    return val, der


def eval_geometry_basis(xhat) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear corner functions. Returns values (..., 4) and gradients (..., 4, 2)."""
    xhat = _clamp(xhat)
    x, y = xhat[..., 0], xhat[..., 1]
    val = np.stack([(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y], axis=-1)
    dx = np.stack([-(1 - y), 1 - y, y, -y], axis=-1)
    dy = np.stack([-(1 - x), -x, x, 1 - x], axis=-1)
    return val, np.stack([dx, dy], axis=-1)


def eval_displacement_basis(xhat) -> tuple[np.ndarray, np.ndarray]:
    """Q2 nodal basis. Returns values (..., 9) and reference gradients (..., 9, 2)."""
    xhat = _clamp(xhat)
    vx, dx = _lagrange_1d(xhat[..., 0])
    vy, dy = _lagrange_1d(xhat[..., 1])
    i, j = _Q2_IJ[:, 0], _Q2_IJ[:, 1]
    val = vx[..., i] * vy[..., j]
    grad = np.stack([dx[..., i] * vy[..., j], vx[..., i] * dy[..., j]], axis=-1)
    return val, grad


def _monomials(x, y, exps):
    val = np.stack([x**a * y**b for a, b in exps], axis=-1)
    dx = np.stack([a * x ** max(a - 1, 0) * y**b for a, b in exps], axis=-1)
    dy = np.stack([b * x**a * y ** max(b - 1, 0) for a, b in exps], axis=-1)
    return val, dx, dy


def eval_rotation_basis(xhat) -> tuple[np.ndarray, np.ndarray]:
    """Monomial basis of Q_{1,2} x Q_{2,1}.

    Returns values (..., 12, 2) and reference derivatives (..., 12, 2, 2) with
    ``deriv[..., a, i, k] = d(theta_a)_i / d xhat_k``.
    """
    xhat = _clamp(xhat)
    x, y = xhat[..., 0], xhat[..., 1]
    shape = x.shape
    val = np.zeros(shape + (N_ROTATION, 2))
    der = np.zeros(shape + (N_ROTATION, 2, 2))
    for comp, exps in enumerate((ROTATION_X_EXPONENTS, ROTATION_Y_EXPONENTS)):
        v, dx, dy = _monomials(x, y, exps)
        sl = slice(6 * comp, 6 * comp + 6)
        val[..., sl, comp] = v
        der[..., sl, comp, 0] = dx
        der[..., sl, comp, 1] = dy
    return val, der


def gradient_to_rotation_coefficients() -> np.ndarray:
    """Matrix G (12, 9) with rotation coefficients G @ e_a = reference gradient of phi_a.

    Each Q2 basis gradient lies exactly in the rotation space, so the
    coefficients are recovered by collocation at a unisolvent point set.
    """
    pts = gauss_square(3).points  # 9 points; rank is checked below
    val, _ = eval_rotation_basis(pts)
    _, grad = eval_displacement_basis(pts)
    # stack both components: rows (point, comp)
    V = val.transpose(0, 2, 1).reshape(-1, N_ROTATION)
    rhs = grad.transpose(0, 2, 1).reshape(-1, N_DISPLACEMENT)
    coef, _, rank, _ = np.linalg.lstsq(V, rhs, rcond=None)
    assert rank == N_ROTATION
    return coef
