import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgefem.mesh import Mesh, build_polar_disk, build_structured_square, validate


@pytest.mark.parametrize(
    "n, counts",
    [(1, (4, 5, 2)), (2, (9, 16, 8))],
)
def test_structured_counts(n, counts):
    m = build_structured_square(n)
    assert (m.n_vertices, m.n_edges, m.n_triangles) == counts
    assert m.n_vertices - m.n_edges + m.n_triangles == 1
    assert sorted(m.vertices[m.corners].tolist()) == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_perturbed_mesh_validates():
    m = build_structured_square(8, perturb=0.2, seed=7)
    rep = validate(m)
    assert rep.ok, rep.failed()
    assert abs(rep.h - np.sqrt(2) / 8) <= 0.25 * np.sqrt(2) / 8


def test_perturbation_is_seeded():
    a = build_structured_square(6, perturb=0.25, seed=3)
    b = build_structured_square(6, perturb=0.25, seed=3)
    c = build_structured_square(6, perturb=0.25, seed=4)
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, c.vertices)


@pytest.mark.parametrize("rings, sectors, counts", [(1, 4, (5, 8, 4)), (2, 6, (13, 30, 18))])
def test_polar_counts(rings, sectors, counts):
    m = build_polar_disk(rings, sectors)
    assert (m.n_vertices, m.n_edges, m.n_triangles) == counts
    assert validate(m).ok
    assert list(m.corners) == [0]


def test_polar_radii():
    m = build_polar_disk(5, 12)
    r = np.linalg.norm(m.vertices, axis=1) * 5
    assert np.allclose(r, np.round(r), atol=1e-12)


def test_validate_structured_h():
    rep = validate(build_structured_square(4))
    assert rep.ok
    assert rep.h == pytest.approx(np.sqrt(2) / 4, rel=1e-14)
    assert validate(build_polar_disk(4, 8)).ok


def test_flipped_triangle_fails_positive_area():
    m = build_structured_square(2)
    tris = m.triangles.copy()
    tris[0] = tris[0, [0, 2, 1]]
    bad = Mesh(
        vertices=m.vertices,
        triangles=tris,
        edges=m.edges,
        tri_edges=m.tri_edges,
        tri_edge_sign=m.tri_edge_sign,
        edge_triangles=m.edge_triangles,
        boundary_vertex=m.boundary_vertex,
        boundary_edge=m.boundary_edge,
        corners=m.corners,
    )
    rep = validate(bad)
    assert not rep.checks["positive area"]
    assert "positive area" in rep.failed()


def test_invalid_arguments():
    with pytest.raises(ValueError):
        build_structured_square(0)
    with pytest.raises(ValueError):
        build_structured_square(4, perturb=0.3)
    with pytest.raises(ValueError):
        build_polar_disk(0, 8)
    with pytest.raises(ValueError):
        build_polar_disk(2, 2)


@given(st.integers(1, 12), st.floats(0.0, 0.29), st.integers(0, 1000))
def test_generated_meshes_validate(n, perturb, seed):
    m = build_structured_square(n, perturb=perturb, seed=seed)
    rep = validate(m, sigma1=20.0, sigma2=20.0)
    assert rep.ok, rep.failed()
    # canonical orientation is a pure function of the vertex indices
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    # incidence signs: +1 exactly when the local edge runs low -> high index
    loc = np.array([[1, 2], [2, 0], [0, 1]])
    a = m.triangles[:, loc[:, 0]]
    b = m.triangles[:, loc[:, 1]]
    assert np.array_equal(m.tri_edge_sign, np.where(a < b, 1, -1))


@given(st.integers(1, 10), st.integers(3, 24))
def test_polar_meshes_validate(rings, sectors):
    rep = validate(build_polar_disk(rings, sectors), sigma1=200.0, sigma2=200.0)
    assert rep.checks["positive area"] and rep.checks["euler relation"] and rep.checks["edge incidence"]


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_refinement_halves_h(n):
    h1 = build_structured_square(n).h
    h2 = build_structured_square(2 * n).h
    assert 1 / 1.05 <= (h1 / h2) / 2 <= 1.05


def test_edges_are_deterministic():
    a = build_structured_square(5)
    b = build_structured_square(5)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.tri_edges, b.tri_edges)
