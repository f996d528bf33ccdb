"""Bilinear element maps and the two push-forwards used for rotations.

All functions broadcast over leading axes: corner arrays have shape
(..., 4, 2) and reference points (P, 2), so passing every element of a mesh at
once gives per-element, per-point results.  Fields carried with a basis axis
(shape (..., P, B, 2)) are accepted wherever a single field (..., P, 2) is.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .reference import eval_geometry_basis

# mixed second derivative d^2 psi / dx dy of the four bilinear corner functions
_PSI_XY = np.array([1.0, -1.0, 1.0, -1.0])


class InvalidElementError(ValueError):
    pass


class RotationVariant(str, enum.Enum):
    COVARIANT = "covariant"
    PARAMETRIC = "parametric"


def map_point(corners, xhat) -> np.ndarray:
    psi, _ = eval_geometry_basis(xhat)
    return np.einsum("...ai,pa->...pi", np.asarray(corners, float), np.atleast_2d(psi))


def jacobian(corners, xhat, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """DF_K at the points: J[..., p, i, k] = d x_i / d xhat_k, and det J."""
    _, dpsi = eval_geometry_basis(xhat)
    J = np.einsum("...ai,pak->...pik", np.asarray(corners, float), dpsi.reshape(-1, 4, 2))
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if check and np.any(det <= 0.0):
        raise InvalidElementError("non-positive Jacobian determinant")
    return J, det


def jacobian_derivative(corners) -> np.ndarray:
    """dJ[..., k, i, j] = d J_ij / d xhat_k, constant for a bilinear map."""
    d = np.einsum("...ai,a->...i", np.asarray(corners, float), _PSI_XY)
    out = np.zeros(d.shape[:-1] + (2, 2, 2))
    out[..., 0, :, 1] = d
    out[..., 1, :, 0] = d
    return out


def _inv(J: np.ndarray) -> np.ndarray:
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det == 0.0):
        raise InvalidElementError("singular Jacobian")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1]
    inv[..., 1, 1] = J[..., 0, 0]
    inv[..., 0, 1] = -J[..., 0, 1]
    inv[..., 1, 0] = -J[..., 1, 0]
    return inv / det[..., None, None]


def _match(M: np.ndarray, field: np.ndarray, tail: int) -> np.ndarray:
    """Insert a basis axis into per-point matrix M if ``field`` carries one."""
    extra = (field.ndim - tail) - (M.ndim - 2)
    for _ in range(extra):
        M = M[..., None, :, :]
    return M


def push_rotation(J: np.ndarray, theta_hat: np.ndarray, variant: RotationVariant) -> np.ndarray:
    """Physical rotation values from reference ones at the same points."""
    if RotationVariant(variant) is RotationVariant.PARAMETRIC:
        return np.array(theta_hat, dtype=float)
    JinvT = _match(_inv(J).swapaxes(-1, -2), theta_hat, 1)
    return np.einsum("...ij,...j->...i", JinvT, theta_hat)


def pull_rotation(J: np.ndarray, theta: np.ndarray, variant: RotationVariant) -> np.ndarray:
    """Inverse of push_rotation: DF^T theta (covariant) or theta unchanged."""
    if RotationVariant(variant) is RotationVariant.PARAMETRIC:
        return np.array(theta, dtype=float)
    JT = _match(J.swapaxes(-1, -2), theta, 1)
    return np.einsum("...ij,...j->...i", JT, theta)


def physical_gradient_scalar(J: np.ndarray, ref_grad: np.ndarray) -> np.ndarray:
    JinvT = _match(_inv(J).swapaxes(-1, -2), ref_grad, 1)
    return np.einsum("...ij,...j->...i", JinvT, ref_grad)


def physical_derivatives_rotation(
    J: np.ndarray,
    dJ: np.ndarray,
    theta_hat: np.ndarray,
    dtheta_hat: np.ndarray,
    variant: RotationVariant,
) -> np.ndarray:
    """Physical gradient G[..., i, j] = d theta_i / d x_j.

    ``dtheta_hat[..., i, k]`` is d theta_hat_i / d xhat_k.  ``dJ`` comes from
    :func:`jacobian_derivative` with one entry per element (no point axis).
    For the covariant map the parametric derivative of the pushed field is
    DF^-T (d theta_hat/d xhat_k - (d DF^T/d xhat_k) theta); the parametric map
    has no correction term.
    """
    Jinv = _inv(J)
    if RotationVariant(variant) is RotationVariant.PARAMETRIC:
        dtheta = np.asarray(dtheta_hat, float)
    else:
        theta = push_rotation(J, theta_hat, variant)
        # dJ has no point axis: (..., k, i, j) -> (..., 1, k, i, j)
        dJp = dJ[..., None, :, :, :]
        extra = (theta.ndim - 1) - (dJp.ndim - 3)
        for _ in range(extra):
            dJp = dJp[..., None, :, :, :]
        # correction[..., m, k] = sum_i dJ[k, i, m] theta_i
        corr = np.einsum("...kim,...i->...mk", dJp, theta)
        JinvT = _match(Jinv.swapaxes(-1, -2), theta, 1)
        dtheta = np.einsum("...im,...mk->...ik", JinvT, dtheta_hat - corr)
    return np.einsum("...ik,...kj->...ij", dtheta, _match(Jinv, dtheta, 2))


@dataclass(frozen=True)
class ElementMap:
    """Single-element convenience wrapper over the vectorized map functions."""

    corners: np.ndarray  # (4, 2), counterclockwise

    def __post_init__(self):
        object.__setattr__(self, "corners", np.asarray(self.corners, dtype=float))
        _, det = jacobian(self.corners, np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]), check=False)
        if np.any(det <= 0.0):
            raise InvalidElementError("element is degenerate or clockwise")

    @property
    def jacobian_derivative(self) -> np.ndarray:
        return jacobian_derivative(self.corners)

    def _points(self, xhat):
        xhat = np.asarray(xhat, float)
        single = xhat.ndim == 1
        return np.atleast_2d(xhat), single

    def map_point(self, xhat) -> np.ndarray:
        pts, single = self._points(xhat)
        out = map_point(self.corners, pts)
        return out[0] if single else out

    def jacobian(self, xhat) -> tuple[np.ndarray, np.ndarray]:
        pts, single = self._points(xhat)
        J, det = jacobian(self.corners, pts)
        return (J[0], det[0]) if single else (J, det)

    def push_rotation(self, variant, xhat, theta_hat) -> np.ndarray:
        pts, single = self._points(xhat)
        J, _ = jacobian(self.corners, pts)
        theta_hat = np.asarray(theta_hat, float)
        out = push_rotation(J, theta_hat[None] if single else theta_hat, variant)
        return out[0] if single else out

    def pull_rotation(self, variant, xhat, theta) -> np.ndarray:
        pts, single = self._points(xhat)
        J, _ = jacobian(self.corners, pts)
        theta = np.asarray(theta, float)
        out = pull_rotation(J, theta[None] if single else theta, variant)
        return out[0] if single else out

    def physical_gradient_scalar(self, xhat, ref_grad) -> np.ndarray:
        pts, single = self._points(xhat)
        J, _ = jacobian(self.corners, pts)
        ref_grad = np.asarray(ref_grad, float)
        out = physical_gradient_scalar(J, ref_grad[None] if single else ref_grad)
        return out[0] if single else out

    def physical_derivatives_rotation(self, variant, xhat, theta_hat, dtheta_hat) -> np.ndarray:
        pts, single = self._points(xhat)
        J, _ = jacobian(self.corners, pts)
        theta_hat = np.asarray(theta_hat, float)
        dtheta_hat = np.asarray(dtheta_hat, float)
        if single:
            theta_hat, dtheta_hat = theta_hat[None], dtheta_hat[None]
        out = physical_derivatives_rotation(
            J, self.jacobian_derivative, theta_hat, dtheta_hat, variant
        )
        return out[0] if single else out
