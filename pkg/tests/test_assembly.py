import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import TRAPEZOID, single_element_mesh, two_element_mesh
from rmquad.assembly import (
    MaterialParams,
    assemble,
    assemble_load,
    assemble_matrix,
    curvature_and_moment,
    edge_data,
    edge_jump_average,
    edge_terms,
    element_bending,
    element_load,
    element_shear,
    normal_moment,
)
from rmquad.mapping import RotationVariant
from rmquad.mesh import generate_trapezoid_sequence, uniform_mesh
from rmquad.reference import gauss_square
from rmquad.solver import solve_spd
from rmquad.spaces import build_dof_map, gradient_rotation_coefficients, interpolate_displacement, tabulate

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
PARALLELOGRAM = np.array([[0, 0], [1, 0.2], [1.3, 1.2], [0.3, 1.0]])


def _tab(corners, variant="covariant", order=4):
    rule = gauss_square(order)
    return tabulate(np.asarray(corners, float)[None], variant, rule.points, rule.weights)


def test_material_constants():
    p = MaterialParams(E=180e9, nu=0.3, k_shear=5 / 6)
    assert p.mu == pytest.approx(180e9 / (24 * 1.3))
    assert p.lam == pytest.approx(0.3 * 180e9 / (12 * (1 - 0.09)))
    assert p.kappa == pytest.approx(180e9 * 5 / 6 / 2.6)
    with pytest.raises(ValueError):
        MaterialParams(t=0.0)


def test_curvature_and_moment_examples():
    mu, lam = 2.0, 3.0
    eps, sig = curvature_and_moment(np.zeros((2, 2)), mu, lam)
    assert not eps.any() and not sig.any()
    eps, sig = curvature_and_moment(np.eye(2), mu, lam)
    np.testing.assert_allclose(eps, np.eye(2))
    np.testing.assert_allclose(sig, (2 * mu + 2 * lam) * np.eye(2))
    eps, sig = curvature_and_moment(np.array([[0.0, 1.0], [-1.0, 0.0]]), mu, lam)
    assert not eps.any() and not sig.any()


@pytest.mark.parametrize("variant", list(RotationVariant))
def test_element_bending_properties(variant, params):
    Kb = element_bending(_tab(PARALLELOGRAM, variant), params)[0]
    np.testing.assert_allclose(Kb, Kb.T, atol=1e-12 * np.abs(Kb).max())
    np.testing.assert_allclose(Kb[[0, 6]], 0, atol=1e-12 * np.abs(Kb).max())
    assert np.linalg.eigvalsh(Kb).min() > -1e-9 * np.abs(Kb).max()


def test_element_bending_unit_square_quadrature():
    p = MaterialParams()
    Kb4 = element_bending(_tab(UNIT, order=4), p)[0]
    Kb8 = element_bending(_tab(UNIT, order=8), p)[0]
    np.testing.assert_allclose(Kb4, Kb8, rtol=1e-10, atol=1e-10 * np.abs(Kb8).max())


def test_element_shear_structure(params):
    tab = _tab(TRAPEZOID)
    S = element_shear(tab, params)[0]
    w = params.shear_weight
    uu = w * np.einsum("p,pai,pbi->ab", tab.weights[0], tab.grad_phi[0], tab.grad_phi[0])
    tt = w * np.einsum("p,pai,pbi->ab", tab.weights[0], tab.theta[0], tab.theta[0])
    ut = -w * np.einsum("p,pai,pbi->ab", tab.weights[0], tab.grad_phi[0], tab.theta[0])
    np.testing.assert_allclose(S[:9, :9], uu)
    np.testing.assert_allclose(S[9:, 9:], tt)
    np.testing.assert_allclose(S[:9, 9:], ut)
    assert np.linalg.eigvalsh(S / np.abs(S).max()).min() > -1e-12


def test_shear_kernel_covariant(rng, params):
    m = single_element_mesh(TRAPEZOID)
    d = build_dof_map(m)
    S = element_shear(_tab(TRAPEZOID), params)[0]
    U = rng.normal(size=9)
    x = np.concatenate([U, gradient_rotation_coefficients(d, U)])
    # scale: the same quadratic form with every term made positive (round-off level)
    scale = np.abs(x) @ np.abs(S) @ np.abs(x)
    assert abs(x @ S @ x) < 1e-14 * scale


def test_element_load_examples():
    tab = _tab(UNIT)
    np.testing.assert_array_equal(element_load(tab, lambda x, y: 0.0), 0.0)
    assert element_load(tab, lambda x, y: 1.0).sum() == pytest.approx(1.0, abs=1e-14)
    g = lambda x, y: np.exp(x) * np.sin(3 * y)
    # element of acceptance-mesh size; order 4 is not that accurate on a unit-size element
    small = 0.25 * TRAPEZOID + 0.3
    ref = element_load(_tab(small, order=8), g)
    np.testing.assert_allclose(element_load(_tab(small), g), ref, rtol=0, atol=1e-8)


def test_edge_conventions(params):
    m = two_element_mesh()
    (inner,) = m.interior_edges
    data = edge_data(m, "covariant", [inner])
    jump, avg = edge_jump_average(data, params)
    assert jump.shape[2] == 24
    np.testing.assert_allclose(jump[:, :, :12], data.plus.theta)
    np.testing.assert_allclose(jump[:, :, 12:], -data.minus.theta)
    bdata = edge_data(m, "covariant", m.boundary_edges)
    bjump, bavg = edge_jump_average(bdata, params)
    np.testing.assert_allclose(bjump, bdata.plus.theta)
    np.testing.assert_allclose(bavg, normal_moment(bdata.plus.grad_theta, bdata.normals, params))
    for d in (data, bdata):
        local = edge_terms(d, params)
        np.testing.assert_allclose(local, local.swapaxes(1, 2), atol=1e-12 * np.abs(local).max())


def _linear_field_coefficients(mesh, dofmap):
    """Global quadratic u (zero nowhere in particular) and its coefficients (U, grad U)."""
    u = lambda x, y: 0.7 * x**2 + 0.4 * x * y - 0.3 * y**2 + 0.2 * x - 0.1 * y
    U = interpolate_displacement(mesh, dofmap, u)
    return U, gradient_rotation_coefficients(dofmap, U)


def test_continuous_linear_field_has_no_jump(params):
    m = two_element_mesh()
    d = build_dof_map(m)
    _, Theta = _linear_field_coefficients(m, d)
    data = edge_data(m, "covariant", m.interior_edges)
    jump, _ = edge_jump_average(data, params)
    th = np.concatenate([Theta.reshape(-1, 12)[e] for e in (0, 1)])
    j = np.einsum("epai,a->epi", jump, th)
    assert np.abs(j).max() < 1e-12 * np.abs(Theta).max()
    penalty_only = dataclasses.replace(params, gamma=1.0)
    P = edge_terms(data, penalty_only)[0] - edge_terms(data, dataclasses.replace(params, gamma=2.0))[0]
    assert abs(th @ P @ th) < 1e-12 * np.abs(P).max() * th @ th


def test_patch_test(params):
    """Interior-only assembly: no jump or shear energy for a global linear rotation field,
    and the bending residual equals the boundary flux of the constant moment."""
    m = two_element_mesh()
    d = build_dof_map(m)
    U, Theta = _linear_field_coefficients(m, d)
    x = np.concatenate([U, Theta])
    A = assemble_matrix(m, params, "covariant", d, boundary_edges=False, order=10)
    S = assemble_matrix(m, params, "covariant", d, boundary_edges=False) - assemble_matrix(
        m, params, "covariant", d, boundary_edges=False, shear=False
    )
    assert abs(x @ S @ x) < 1e-14 * (np.abs(x) @ abs(S) @ np.abs(x))
    r = A @ x
    # displacement rows see only the shear term, which vanishes
    assert np.abs(r[: d.n_u]).max() < 1e-12 * np.abs(A).max() * np.abs(x).max()
    # rotation rows: integration by parts leaves the flux over the domain boundary
    grad = np.array([[1.4, 0.4], [0.4, -0.6]])
    _, sigma = curvature_and_moment(grad, params.mu, params.lam)
    bd = edge_data(m, "covariant", m.boundary_edges, order=10)
    flux = np.einsum("ep,ei,ij,epaj->ea", bd.weights, bd.normals, sigma, bd.plus.theta)
    expected = np.zeros(d.n_dofs)
    np.add.at(expected, d.element_theta[[e.plus for e in m.boundary_edges]], flux)
    rt = r[d.n_u :]
    np.testing.assert_allclose(rt, expected[d.n_u :], atol=1e-9 * np.abs(expected).max())


def test_one_element_system_dimension(params):
    s = assemble(uniform_mesh(1), params, "covariant")
    assert s.size == 13


@pytest.mark.parametrize("shear_basis", [False, True])
def test_assembled_matrix_symmetric(shear_basis, params):
    m = generate_trapezoid_sequence(2)[-1]
    A = assemble(m, params, "covariant", shear_basis=shear_basis).A
    assert abs(A - A.T).max() < 1e-9 * abs(A).max()


def test_shear_basis_gives_same_solution(params):
    from rmquad.analysis import ExactSolution

    m = generate_trapezoid_sequence(2)[-1]
    g = ExactSolution().g
    a = solve_spd(assemble(m, params, "covariant", g, shear_basis=False))
    b = solve_spd(assemble(m, params, "covariant", g, shear_basis=True))
    np.testing.assert_allclose(b.displacement, a.displacement, rtol=1e-9, atol=1e-9 * np.abs(a.displacement).max())
    np.testing.assert_allclose(b.rotation, a.rotation, rtol=1e-9, atol=1e-9 * np.abs(a.rotation).max())
    with pytest.raises(ValueError):
        assemble(m, params, "parametric", shear_basis=True)


def test_scaling_invariance():
    m = generate_trapezoid_sequence(2)[-1]
    g = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    base = solve_spd(assemble(m, MaterialParams(), "covariant", g))
    c = 7.5
    sys_c = assemble(m, MaterialParams(E=c * 180e9), "covariant", lambda x, y: c * g(x, y))
    sys_1 = assemble(m, MaterialParams(), "covariant", g)
    assert abs(sys_c.A - c * sys_1.A).max() < 1e-12 * abs(sys_c.A).max()
    scaled = solve_spd(sys_c)
    np.testing.assert_allclose(scaled.displacement, base.displacement, atol=1e-12 * np.abs(base.displacement).max())
    np.testing.assert_allclose(scaled.rotation, base.rotation, atol=1e-12 * np.abs(base.rotation).max())


def _smallest_eigenvalue(A):
    return np.linalg.eigvalsh(A.toarray())[0]


def test_penalty_monotonicity():
    m = generate_trapezoid_sequence(1)[0]
    lam = [_smallest_eigenvalue(assemble(m, MaterialParams(gamma=g), "covariant", shear_basis=False).A)
           for g in (1.0, 10.0, 100.0)]
    assert np.all(np.diff(lam) >= 0)


def test_load_vector_matches_refined_quadrature():
    m = generate_trapezoid_sequence(2)[-1]
    d = build_dof_map(m)
    g = lambda x, y: np.cos(x + 2 * y)
    np.testing.assert_allclose(assemble_load(m, d, g), assemble_load(m, d, g, order=8), atol=1e-8)
