import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistkit.generators import disc, flat_torus, genus_two, icosphere, torus_of_revolution
from waistkit.mesh import MeshError, Region, TriMesh, barycentric_subdivision, cap_boundary, genus, load_mesh, scale_metric

TET_OFF = """OFF
4 4 0
1 1 1
1 -1 -1
-1 1 -1
-1 -1 1
3 0 1 2
3 0 3 1
3 0 2 3
3 1 3 2
"""


def test_tetrahedron_off_area():
    m = load_mesh(io.StringIO(TET_OFF), "off")
    s = 2 * math.sqrt(2)
    assert genus(m) == 0 and m.boundary_loops() == []
    assert m.area == pytest.approx(4 * math.sqrt(3) / 4 * s * s, rel=1e-12)


def test_obj_and_sidecar(tmp_path):
    obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n"
    path = tmp_path / "t.obj"
    path.write_text(obj)
    m = load_mesh(path)
    assert m.n_faces == 4 and genus(m) == 0
    (tmp_path / "t.lengths").write_text("0 1 1.5\n")
    m2 = load_mesh(path)
    assert m2.lengths[m2.edge_id(0, 1)] == 1.5


def test_flat_torus_genus_and_area():
    t = flat_torus(8)
    assert genus(t) == 1
    assert t.area == pytest.approx(1.0, abs=1e-14)


def test_icosphere_level4_area():
    s = icosphere(4)
    assert genus(s) == 0
    assert abs(s.area - 4 * math.pi) / (4 * math.pi) < 0.02


@pytest.mark.parametrize(
    "mesh, g",
    [(lambda: icosphere(0), 0), (lambda: flat_torus(5), 1), (lambda: genus_two(5), 2), (lambda: torus_of_revolution(12, 8), 1)],
)
def test_genus_and_euler(mesh, g):
    m = mesh()
    assert genus(m) == g
    b = len(m.boundary_loops())
    assert m.n_vertices - m.n_edges + m.n_faces == 2 - 2 * g - b


def test_genus_two_counts_by_hand():
    # two 5x5 tori share the 3 vertices of the removed triangle
    m = genus_two(5)
    assert (m.n_vertices, m.n_edges, m.n_faces) == (47, 147, 98)


def test_triangle_inequality_rejected():
    with pytest.raises(MeshError) as err:
        TriMesh([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]], {(0, 1): 1, (0, 2): 1, (0, 3): 1, (1, 2): 3, (1, 3): 1, (2, 3): 1})
    assert err.value.simplex is not None


def test_non_manifold_edge_rejected():
    faces = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
    pts = np.random.default_rng(0).normal(size=(5, 3))
    with pytest.raises(MeshError, match="more than two"):
        TriMesh(faces, embedding=pts)


def test_non_manifold_vertex_rejected():
    # two triangles touching at a single vertex
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0.0]])
    with pytest.raises(MeshError, match="vertex"):
        TriMesh([[0, 1, 2], [0, 3, 4]], embedding=pts)


def test_degenerate_face_rejected():
    pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 1e-14], [0, 1, 0.0]])
    with pytest.raises(MeshError):
        TriMesh([[0, 1, 2], [0, 2, 3]], embedding=pts)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([0.5, 2.0, 3.0, 0.1]))
def test_scale_metric_area(lam):
    t = flat_torus(6)
    assert scale_metric(t, lam).area == pytest.approx(lam * lam, rel=1e-14)


def test_scale_by_two_is_exact():
    s = icosphere(2)
    assert scale_metric(s, 2.0).area == 4 * s.area
    assert np.array_equal(scale_metric(s, 1.0).lengths, s.lengths)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_area_additive_over_regions(seed):
    s = icosphere(2)
    rng = np.random.default_rng(seed)
    mask = rng.random(s.n_faces) < 0.5
    a, b = Region(s, np.flatnonzero(mask)), Region(s, np.flatnonzero(~mask))
    assert a.area + b.area == pytest.approx(s.area, rel=1e-14)
    assert a.interface_length(b) == pytest.approx(a.boundary_length, rel=1e-12)


def test_region_topology_disc_and_annulus():
    d = disc(6)
    assert Region.whole(d).topology() == (1, 1, 1, 0)
    t = flat_torus(8)
    ring = Region(t, np.arange(2 * 8 * 3))  # three columns of cells wrap into an annulus
    comps, chi, b, g = ring.topology()
    assert (comps, chi, b, g) == (1, 0, 2, 0)


def test_subdivision_is_isometric():
    s = icosphere(1)
    sub = barycentric_subdivision(s)
    assert sub.mesh.area == pytest.approx(s.area, rel=1e-12)
    assert genus(sub.mesh) == 0
    assert sub.mesh.n_faces == 6 * s.n_faces


def test_cap_boundary_closes_disc():
    d = disc(4)
    cap = cap_boundary(d, 1e-6)
    assert cap.mesh.boundary_loops() == [] and genus(cap.mesh) == 0
    assert cap.mesh.area - d.area < 1e-3
