"""Conforming triangulations of the unit square and the unit disk."""

from dataclasses import dataclass, field

import numpy as np

# local edge i is opposite local vertex i and runs from vertex i+1 to i+2
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh with edge topology.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    edges : (E, 2) int array, lower vertex index first
    tri_edges : (T, 3) global edge of local edge i (opposite vertex i)
    tri_edge_sign : (T, 3) +1 when the counterclockwise traversal of the
        local edge agrees with the canonical low->high orientation
    boundary_vertex, boundary_edge : bool masks
    corners : vertex indices of the geometric corners of the domain
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_edge_sign: np.ndarray
    edge_triangles: np.ndarray
    boundary_vertex: np.ndarray
    boundary_edge: np.ndarray
    corners: np.ndarray
    name: str = field(default="mesh")

    def __post_init__(self):
        for value in self.__dict__.values():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    @classmethod
    def from_triangles(cls, vertices, triangles, corners, name="mesh"):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        local = triangles[:, LOCAL_EDGES]  # (T, 3, 2) in ccw traversal order
        lo = local.min(axis=2)
        hi = local.max(axis=2)
        keys = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        tri_edges = inverse.reshape(-1, 3)
        tri_edge_sign = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)

        # the (up to two) triangles adjacent to each edge, -1 if absent
        edge_triangles = -np.ones((len(edges), 2), dtype=np.int64)
        flat_t = np.repeat(np.arange(len(triangles)), 3)
        order = np.argsort(inverse, kind="stable")
        slot = np.zeros(len(inverse), dtype=np.int64)
        sorted_e = inverse[order]
        first = np.r_[True, sorted_e[1:] != sorted_e[:-1]]
        slot[order] = np.where(first, 0, 1)
        edge_triangles[inverse, slot] = flat_t

        boundary_edge = counts == 1
        boundary_vertex = np.zeros(len(vertices), dtype=bool)
        boundary_vertex[edges[boundary_edge].ravel()] = True
        return cls(
            vertices=vertices,
            triangles=triangles,
            edges=edges,
            tri_edges=tri_edges,
            tri_edge_sign=tri_edge_sign,
            edge_triangles=edge_triangles,
            boundary_vertex=boundary_vertex,
            boundary_edge=boundary_edge,
            corners=np.asarray(corners, dtype=np.int64),
            name=name,
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def edge_counts(self):
        """Number of triangles adjacent to each edge."""
        return (self.edge_triangles >= 0).sum(axis=1)

    def triangle_vertices(self):
        return self.vertices[self.triangles]

    def signed_areas(self):
        p = self.triangle_vertices()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self):
        p = self.triangle_vertices()
        lengths = np.linalg.norm(p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]], axis=2)
        return lengths.max(axis=1)

    def inradius_diameters(self):
        """Diameter of the inscribed circle, 4|K| / perimeter."""
        p = self.triangle_vertices()
        lengths = np.linalg.norm(p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]], axis=2)
        return 4.0 * np.abs(self.signed_areas()) / lengths.sum(axis=1)

    @property
    def h(self):
        return float(self.diameters().max())

    def edge_normals(self):
        """Unit normals of the canonically oriented edges (tangent rotated clockwise)."""
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def build_structured_square(n, perturb=0.0, seed=0):
    """Uniform ``n x n`` grid of the unit square, each cell cut along a diagonal.

    With ``perturb > 0`` the interior vertices move by uniform offsets of at
    most ``perturb / n`` per coordinate.  A perturbation that inverts a
    triangle is retried once at half magnitude before giving up.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= perturb < 0.3:
        raise ValueError("perturb must lie in [0, 0.3)")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    # two triangles per cell, stored cell by cell
    triangles = np.stack(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)], axis=1
    ).reshape(-1, 3)
    corners = [idx[0, 0], idx[0, n], idx[n, n], idx[n, 0]]

    if perturb > 0.0:
        rng = np.random.default_rng(seed)
        interior = (vertices > 0.0).all(axis=1) & (vertices < 1.0).all(axis=1)
        offsets = rng.uniform(-1.0, 1.0, size=vertices.shape) * (perturb / n)
        offsets[~interior] = 0.0
        for scale in (1.0, 0.5):
            moved = vertices + scale * offsets
            mesh = Mesh.from_triangles(moved, triangles, corners, name=f"square-{n}")
            if (mesh.signed_areas() > 0).all():
                return mesh
        raise ValueError("perturbation produced a non-positive triangle area")
    return Mesh.from_triangles(vertices, triangles, corners, name=f"square-{n}")


def build_polar_disk(n_rings, n_sectors):
    """Polar triangulation of the unit disk with a vertex at the origin.

    Rings sit at radii ``i / n_rings``; each carries ``n_sectors`` equally
    spaced vertices.  The innermost ring is a fan around the origin and every
    annular cell is cut along one diagonal.  The disk boundary is the
    inscribed polygon of the outer ring.
    """
    if n_rings < 1 or n_sectors < 3:
        raise ValueError("need n_rings >= 1 and n_sectors >= 3")
    angles = 2.0 * np.pi * np.arange(n_sectors) / n_sectors
    pts = [np.zeros((1, 2))]
    for i in range(1, n_rings + 1):
        r = i / n_rings
        pts.append(np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1))
    vertices = np.concatenate(pts)

    def ring(i, k):
        return 1 + (i - 1) * n_sectors + (k % n_sectors)

    tris = [[0, ring(1, k), ring(1, k + 1)] for k in range(n_sectors)]
    for i in range(1, n_rings):
        for k in range(n_sectors):
            a, b = ring(i, k), ring(i, k + 1)
            c, d = ring(i + 1, k), ring(i + 1, k + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    return Mesh.from_triangles(vertices, np.array(tris), [0], name=f"disk-{n_rings}x{n_sectors}")


@dataclass
class ValidationReport:
    checks: dict
    h: float
    min_quality: float
    max_quality: float
    size_ratio: float

    @property
    def ok(self):
        return all(self.checks.values())

    def failed(self):
        return [name for name, passed in self.checks.items() if not passed]


def validate(mesh, sigma1=10.0, sigma2=10.0):
    """Run every mesh invariant; failures are report entries, not exceptions."""
    areas = mesh.signed_areas()
    diam = mesh.diameters()
    quality = diam / mesh.inradius_diameters()
    counts = mesh.edge_counts
    interior = ~mesh.boundary_edge
    euler = mesh.n_vertices - mesh.n_edges + mesh.n_triangles
    canonical = bool((mesh.edges[:, 0] < mesh.edges[:, 1]).all())
    checks = {
        "positive area": bool((areas > 0).all()),
        "edge incidence": bool((counts[interior] == 2).all() and (counts[~interior] == 1).all()),
        "euler relation": euler == 1,
        "canonical edges": canonical,
        "shape regularity": bool(quality.max() <= sigma1),
        "inverse assumption": bool(diam.max() / diam.min() <= sigma2),
    }
    return ValidationReport(
        checks=checks,
        h=float(diam.max()),
        min_quality=float(quality.min()),
        max_quality=float(quality.max()),
        size_ratio=float(diam.max() / diam.min()),
    )
