import numpy as np
import pytest

from rmquad.assembly import MaterialParams
from rmquad.mesh import QuadMesh, build_edge_topology

TRAPEZOID = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.25], [0.0, 0.75]])


def random_convex_quad(rng, scale=1.0):
    """Perturbed square that stays convex and counterclockwise."""
    base = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return scale * (base + rng.uniform(-0.2, 0.2, size=(4, 2))) + rng.uniform(-1, 1, size=2)


def single_element_mesh(corners) -> QuadMesh:
    return build_edge_topology(QuadMesh(np.asarray(corners, float), np.array([[0, 1, 2, 3]])))


def two_element_mesh() -> QuadMesh:
    """Two non-affine quads sharing the edge x = 0.5."""
    v = np.array([[0, 0], [0.5, 0.1], [1, 0], [1, 1], [0.5, 0.8], [0, 1.0]])
    return build_edge_topology(QuadMesh(v, np.array([[0, 1, 4, 5], [1, 2, 3, 4]])))


def central_difference(f, x, step=1e-6):
    """Gradient of f at x (..., 2) by central differences; f returns (...) or (..., m)."""
    x = np.asarray(x, float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return MaterialParams()
