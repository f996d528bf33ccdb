"""Convex quadrilateral meshes of the unit square with DG edge topology."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    """A mesh edge with a fixed unit normal pointing from ``plus`` into ``minus``.

    ``local_plus``/``local_minus`` give the local edge number (0..3) of the edge
    inside each incident quad; local edge ``k`` joins quad vertices ``k`` and
    ``k+1``.
    """

    vertices: tuple[int, int]
    plus: int
    local_plus: int
    normal: tuple[float, float]
    h_E: float
    length: float
    minus: int | None = None
    local_minus: int | None = None

    @property
    def kind(self) -> str:
        return "boundary" if self.minus is None else "interior"

    @property
    def is_boundary(self) -> bool:
        return self.minus is None


@dataclass(frozen=True)
class QuadMesh:
    vertices: np.ndarray  # (nv, 2)
    quads: np.ndarray  # (nq, 4), counterclockwise
    edges: tuple[Edge, ...] = field(default=(), repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.quads)

    @property
    def corners(self) -> np.ndarray:
        """Corner coordinates per element, shape (nq, 4, 2)."""
        return self.vertices[self.quads]

    @property
    def areas(self) -> np.ndarray:
        return quad_areas(self.corners)

    @property
    def diameters(self) -> np.ndarray:
        c = self.corners
        d02 = np.linalg.norm(c[:, 2] - c[:, 0], axis=-1)
        d13 = np.linalg.norm(c[:, 3] - c[:, 1], axis=-1)
        # for a convex quad the diameter is attained on a diagonal or a side
        sides = np.linalg.norm(np.roll(c, -1, axis=1) - c, axis=-1).max(axis=1)
        return np.maximum(np.maximum(d02, d13), sides)

    @property
    def mesh_parameter_h(self) -> float:
        return float(self.diameters.max())

    @property
    def interior_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.is_boundary]

    @property
    def boundary_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.is_boundary]


def quad_areas(corners: np.ndarray) -> np.ndarray:
    """Signed shoelace areas of quads given as (..., 4, 2)."""
    x, y = corners[..., 0], corners[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def corner_cross_products(corners: np.ndarray) -> np.ndarray:
    """Cross products of consecutive edge vectors at each corner, (..., 4)."""
    e = np.roll(corners, -1, axis=-2) - corners
    e_next = np.roll(e, -1, axis=-2)
    return e[..., 0] * e_next[..., 1] - e[..., 1] * e_next[..., 0]


def is_convex(corners: np.ndarray) -> np.ndarray:
    return np.all(corner_cross_products(corners) > 0.0, axis=-1)


def validate(mesh: QuadMesh) -> None:
    if mesh.quads.ndim != 2 or mesh.quads.shape[1] != 4:
        raise MeshError("quads must have shape (n, 4)")
    if mesh.quads.min() < 0 or mesh.quads.max() >= mesh.n_vertices:
        raise MeshError("quad vertex index out of range")
    bad = np.flatnonzero(~is_convex(mesh.corners))
    if bad.size:
        raise MeshError(f"element {bad[0]} is not convex and counterclockwise")


def build_edge_topology(mesh: QuadMesh) -> QuadMesh:
    """Return a copy of ``mesh`` with its edge list populated.

    Edges are ordered by first appearance when sweeping elements and their
    local edges in order. The incident element with the smaller index is T+,
    so the normal is the outward normal of that element.
    """
    validate(mesh)
    incident: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for k, quad in enumerate(mesh.quads):
        for loc in range(4):
            a, b = int(quad[loc]), int(quad[(loc + 1) % 4])
            incident.setdefault((min(a, b), max(a, b)), []).append((k, loc))

    areas = mesh.areas
    edges = []
    for key, sides in incident.items():
        if len(sides) > 2:
            raise MeshError(f"non-manifold edge {key} shared by {len(sides)} elements")
        sides.sort()
        plus, loc_plus = sides[0]
        a = mesh.vertices[mesh.quads[plus, loc_plus]]
        b = mesh.vertices[mesh.quads[plus, (loc_plus + 1) % 4]]
        t = b - a
        length = float(np.hypot(t[0], t[1]))
        normal = (float(t[1] / length), float(-t[0] / length))
        if len(sides) == 2:
            minus, loc_minus = sides[1]
            h_E = (areas[plus] + areas[minus]) / (2.0 * length)
        else:
            minus, loc_minus = None, None
            h_E = areas[plus] / length
        edges.append(
            Edge(key, plus, loc_plus, normal, float(h_E), length, minus, loc_minus)
        )
    return replace(mesh, edges=tuple(edges))


def structured_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform n x n grid of the unit square; vertex (i, j) has index j*(n+1)+i."""
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v0 = (j * (n + 1) + i).ravel()
    quads = np.column_stack([v0, v0 + 1, v0 + n + 2, v0 + n + 1])
    return vertices, quads


TRAPEZOID_PATTERNS = ("self-similar", "checkerboard")


def generate_trapezoid_sequence(
    levels: int, distortion: float = 0.25, pattern: str = "self-similar"
) -> list[QuadMesh]:
    """Trapezoid meshes with N = 2, 4, ..., 2**levels cells per side.

    ``pattern="self-similar"`` lifts every vertex with odd grid indices (i, j)
    by ``s * distortion / N`` with s = (-1)**((i-1)/2 + (j-1)/2).  Each element
    then has exactly one displaced corner, so all elements are congruent (up to
    reflection) to one trapezoid with vertical parallel sides and mesh l+1 is
    a 2x2 tiling of reflected, halved copies of mesh l.

    ``pattern="checkerboard"`` lifts every interior vertex by
    ``(-1)**(i+j) * distortion / N``.  Elements are still trapezoids, but
    interior and boundary-row cells have different shapes, so shape measures
    drift between the coarsest levels.
    """
    if levels < 1:
        raise MeshError("levels must be >= 1")
    if not 0.0 <= distortion < 0.45:
        raise MeshError("distortion must lie in [0, 0.45)")
    if pattern not in TRAPEZOID_PATTERNS:
        raise MeshError(f"unknown trapezoid pattern {pattern!r}")
    meshes = []
    for level in range(1, levels + 1):
        n = 2**level
        vertices, quads = structured_grid(n)
        idx = np.arange(n + 1)
        jj, ii = np.meshgrid(idx, idx, indexing="ij")
        if pattern == "self-similar":
            lifted = (ii % 2 == 1) & (jj % 2 == 1)
            sign = np.where(((ii - 1) // 2 + (jj - 1) // 2) % 2 == 0, 1.0, -1.0)
        else:
            lifted = (ii > 0) & (ii < n) & (jj > 0) & (jj < n)
            sign = np.where((ii + jj) % 2 == 0, 1.0, -1.0)
        vertices[:, 1] += np.where(lifted, sign, 0.0).ravel() * distortion / n
        meshes.append(build_edge_topology(QuadMesh(vertices, quads)))
    return meshes


def generate_perturbed_mesh(n: int, jitter: float, seed: int) -> QuadMesh:
    """n x n grid with interior vertices jittered uniformly in [-jitter/n, jitter/n]^2.

    Vertices are visited in index order; a draw making any incident quad
    non-convex is rejected and redrawn.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    if not 0.0 <= jitter <= 0.3:
        raise MeshError("jitter must lie in [0, 0.3]")
    vertices, quads = structured_grid(n)
    rng = np.random.default_rng(seed)
    incident: dict[int, list[int]] = {}
    for k, quad in enumerate(quads):
        for v in quad:
            incident.setdefault(int(v), []).append(k)
    amp = jitter / n
    for j in range(1, n):
        for i in range(1, n):
            v = j * (n + 1) + i
            base = vertices[v].copy()
            for _ in range(1000):
                vertices[v] = base + rng.uniform(-amp, amp, size=2)
                if is_convex(vertices[quads[incident[v]]]).all():
                    break
            else:
                raise MeshError(f"could not place vertex {v} after 1000 draws")
    return build_edge_topology(QuadMesh(vertices, quads))


def uniform_mesh(n: int) -> QuadMesh:
    vertices, quads = structured_grid(n)
    return build_edge_topology(QuadMesh(vertices, quads))


def element_shape_ratios(mesh: QuadMesh) -> np.ndarray:
    """h_K / rho_K per element.

    rho_K is the smallest incircle diameter among the four triangles cut off
    by the two diagonals of K.
    """
    c = mesh.corners
    rho = np.full(mesh.n_elements, np.inf)
    for a, b, d in [(0, 1, 2), (0, 2, 3), (1, 2, 3), (1, 3, 0)]:
        p, q, r = c[:, a], c[:, b], c[:, d]
        ab = np.linalg.norm(q - p, axis=-1)
        bc = np.linalg.norm(r - q, axis=-1)
        ca = np.linalg.norm(p - r, axis=-1)
        area = 0.5 * np.abs((q - p)[:, 0] * (r - p)[:, 1] - (q - p)[:, 1] * (r - p)[:, 0])
        rho = np.minimum(rho, 4.0 * area / (ab + bc + ca))
    with np.errstate(divide="ignore"):
        return mesh.diameters / rho


def shape_regularity(mesh: QuadMesh) -> float:
    return float(element_shape_ratios(mesh).max())


def write_mesh(mesh: QuadMesh, path: str | Path) -> None:
    lines = [f"{mesh.n_vertices} {mesh.n_elements}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [" ".join(str(int(v)) for v in q) for q in mesh.quads]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path: str | Path) -> QuadMesh:
    tokens = Path(path).read_text().split()
    try:
        nv, nq = int(tokens[0]), int(tokens[1])
        coords = np.array(tokens[2 : 2 + 2 * nv], dtype=float).reshape(nv, 2)
        quads = np.array(tokens[2 + 2 * nv : 2 + 2 * nv + 4 * nq], dtype=np.int64).reshape(nq, 4)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    return build_edge_topology(QuadMesh(coords, quads))
