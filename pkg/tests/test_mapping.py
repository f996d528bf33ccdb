import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TRAPEZOID, central_difference, random_convex_quad
from rmquad import mapping
from rmquad.mapping import ElementMap, InvalidElementError, RotationVariant
from rmquad.reference import eval_displacement_basis, eval_rotation_basis, gradient_to_rotation_coefficients

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
VARIANTS = list(RotationVariant)


def test_map_point_examples():
    assert np.allclose(ElementMap(UNIT).map_point([0.3, 0.7]), [0.3, 0.7])
    K = ElementMap(TRAPEZOID)
    for xh, yh in [(0.2, 0.9), (0.7, 0.1)]:
        np.testing.assert_allclose(K.map_point([xh, yh]), [xh, yh * (0.75 + 0.5 * xh)])
    np.testing.assert_allclose(K.map_point([0.5, 0.5]), TRAPEZOID.mean(axis=0))
    np.testing.assert_allclose(K.map_point(UNIT), TRAPEZOID)


def test_jacobian_examples():
    J, det = ElementMap(UNIT).jacobian([0.4, 0.4])
    np.testing.assert_allclose(J, np.eye(2))
    J, det = ElementMap(0.3 * UNIT).jacobian([0.1, 0.8])
    np.testing.assert_allclose(J, 0.3 * np.eye(2))
    assert det == pytest.approx(0.09)
    J, det = ElementMap(TRAPEZOID).jacobian([0.5, 0.5])
    np.testing.assert_allclose(J, [[1, 0], [0.25, 1.0]])
    assert det == pytest.approx(1.0)


def test_invalid_elements():
    with pytest.raises(InvalidElementError):
        ElementMap(UNIT[::-1])
    with pytest.raises(InvalidElementError):
        mapping.jacobian(UNIT[[0, 1, 1, 3]], np.array([[1.0, 1.0]]))


def test_push_rotation_examples():
    for v in VARIANTS:
        np.testing.assert_allclose(ElementMap(UNIT).push_rotation(v, [0.3, 0.3], [2.0, -1.0]), [2, -1])
    h = 0.25
    out = ElementMap(h * UNIT).push_rotation("covariant", [0.5, 0.5], [1.0, 0.0])
    np.testing.assert_allclose(out, [1 / h, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_push_pull_round_trip(seed):
    rng = np.random.default_rng(seed)
    K = ElementMap(random_convex_quad(rng))
    pts = rng.uniform(size=(5, 2))
    th = rng.normal(size=(5, 2))
    for v in VARIANTS:
        np.testing.assert_allclose(K.pull_rotation(v, pts, K.push_rotation(v, pts, th)), th, atol=1e-13)


def test_scalar_gradient_same_as_covariant_push(rng):
    K = ElementMap(random_convex_quad(rng))
    pts = rng.uniform(size=(6, 2))
    g = rng.normal(size=(6, 2))
    np.testing.assert_array_equal(K.physical_gradient_scalar(pts, g), K.push_rotation("covariant", pts, g))
    np.testing.assert_allclose(ElementMap(0.5 * UNIT).physical_gradient_scalar([0.2, 0.2], [1, 0]), [2, 0])


def _physical_q2(corners, coef, x):
    """Evaluate p = sum c_a phi_a o F^-1 at physical x via Newton on the bilinear map."""
    xh = np.full(2, 0.5)
    for _ in range(50):
        J, _ = mapping.jacobian(corners, xh[None])
        r = mapping.map_point(corners, xh[None])[0] - x
        xh = xh - np.linalg.solve(J[0], r)
    return eval_displacement_basis(xh)[0] @ coef


def test_q2_gradient_matches_physical_finite_differences(rng):
    corners = random_convex_quad(rng)
    coef = rng.normal(size=9)
    xh = np.array([0.3, 0.6])
    x = mapping.map_point(corners, xh[None])[0]
    _, dphi = eval_displacement_basis(xh)
    grad = ElementMap(corners).physical_gradient_scalar(xh, coef @ dphi)
    fd = central_difference(lambda p: _physical_q2(corners, coef, p), x)
    np.testing.assert_allclose(grad, fd, rtol=1e-6)


def test_rotation_derivative_identity_map(rng):
    th, dth = eval_rotation_basis(np.array([0.3, 0.8]))
    c = rng.normal(size=12)
    for v in VARIANTS:
        G = ElementMap(UNIT).physical_derivatives_rotation(v, [0.3, 0.8], c @ th, np.einsum("a,aik->ik", c, dth))
        np.testing.assert_allclose(G, np.einsum("a,aik->ik", c, dth))


def test_covariant_gradient_of_q2_gives_hessian(rng):
    """Pushing the reference gradient of a Q2 function gives grad p; its derivative is the Hessian."""
    corners = random_convex_quad(rng)
    coef = rng.normal(size=9)
    theta_coef = gradient_to_rotation_coefficients() @ coef
    K = ElementMap(corners)
    xh = np.array([0.35, 0.55])
    th, dth = eval_rotation_basis(xh)
    G = K.physical_derivatives_rotation("covariant", xh, theta_coef @ th, np.einsum("a,aik->ik", theta_coef, dth))
    x = K.map_point(xh)
    hess = central_difference(
        lambda p: central_difference(lambda q: _physical_q2(corners, coef, q), p, 1e-4), x, 1e-4
    )
    np.testing.assert_allclose(G, G.T, atol=1e-10 * np.abs(G).max())
    np.testing.assert_allclose(G, hess, rtol=1e-5, atol=1e-6 * np.abs(G).max())


@pytest.mark.parametrize("variant", VARIANTS)
def test_rotation_derivative_vs_finite_differences(variant, rng):
    corners = random_convex_quad(rng)
    K = ElementMap(corners)
    c = rng.normal(size=12)

    def field(xh):
        xh = np.atleast_2d(xh)
        th, _ = eval_rotation_basis(xh)
        J, _ = mapping.jacobian(corners, xh)
        return mapping.push_rotation(J, np.einsum("a,...ai->...i", c, th), variant)

    xh = np.array([0.45, 0.3])
    th, dth = eval_rotation_basis(xh)
    G = K.physical_derivatives_rotation(variant, xh, c @ th, np.einsum("a,aik->ik", c, dth))
    # reference derivative of the physical field, then chain rule with DF^-1
    dref = central_difference(lambda p: field(p)[0], xh)
    J, _ = K.jacobian(xh)
    np.testing.assert_allclose(G, dref @ np.linalg.inv(J), rtol=1e-6, atol=1e-8)


def test_affine_element_has_no_correction():
    para = np.array([[0, 0], [1, 0.2], [1.3, 1.2], [0.3, 1.0]])
    np.testing.assert_allclose(mapping.jacobian_derivative(para), 0, atol=1e-15)
    assert np.abs(mapping.jacobian_derivative(TRAPEZOID)).max() > 0


def test_covariant_preserves_tangential_traces(rng):
    corners = random_convex_quad(rng)
    K = ElementMap(corners)
    theta_hat = rng.normal(size=(4, 2))
    s = np.array([0.1, 0.4, 0.6, 0.9])
    edges = [(np.column_stack([s, 0 * s]), [1, 0]), (np.column_stack([1 + 0 * s, s]), [0, 1])]
    for pts, that in edges:
        theta = K.push_rotation("covariant", pts, theta_hat)
        J, _ = K.jacobian(pts)
        back = np.einsum("pik,pi->pk", J, theta)
        np.testing.assert_allclose(back @ that, theta_hat @ that, atol=1e-12)


def test_inclusion_on_reference_trapezoid(rng):
    """grad of every Q2 basis function lies in the covariant rotation space but not the parametric one."""
    K = ElementMap(TRAPEZOID)
    pts = rng.uniform(size=(16, 2))
    J, _ = K.jacobian(pts)
    _, dphi = eval_displacement_basis(pts)
    grads = np.einsum("pki,pak->pai", np.linalg.inv(J), dphi)
    th, _ = eval_rotation_basis(pts)
    worst = {}
    for v in VARIANTS:
        B = mapping.push_rotation(J, th, v).transpose(0, 2, 1).reshape(-1, 12)
        res = []
        for a in range(9):
            rhs = grads[:, a].ravel()
            c = np.linalg.lstsq(B, rhs, rcond=None)[0]
            res.append(np.linalg.norm(B @ c - rhs) / np.linalg.norm(rhs))
        worst[v] = max(res)
    assert worst[RotationVariant.COVARIANT] < 1e-11
    assert worst[RotationVariant.PARAMETRIC] > 1e-3
