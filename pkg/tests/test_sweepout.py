import math

import numpy as np
import pytest

from waistkit.generators import disc, flat_torus, genus_two, icosphere
from waistkit.mesh import Region, TriMesh, scale_metric
from waistkit.morse import level_set, max_fiber_length
from waistkit.sweepout import (
    Bisector,
    SweepoutError,
    base_case_sweepout,
    bisecting_cycle,
    build_sweepout,
    merge_morse,
)


def dumbbell(n=8, neck=6):
    """Two n x n squares of unit cells joined by a one-cell-wide corridor."""
    W = 2 * n + neck
    keep = lambda i, j: i < n or i >= n + neck or j == n // 2  # noqa: E731
    idx = lambda i, j: i * (n + 1) + j  # noqa: E731
    pts = np.array([[i, j, 0.0] for i in range(W + 1) for j in range(n + 1)])
    faces = []
    for i in range(W):
        for j in range(n):
            if keep(i, j):
                a, b = idx(i, j), idx(i + 1, j)
                faces += [[a, b, b + 1], [a, b + 1, a + 1]]
    used = np.unique(faces)
    remap = np.full(len(pts), -1)
    remap[used] = np.arange(len(used))
    return TriMesh(remap[np.array(faces)], embedding=pts[used])


def test_base_case_single_triangle():
    s = icosphere(1)
    r = Region(s, [0])
    f = base_case_sweepout(r, 1e-9)
    assert max_fiber_length(f)[0] <= r.boundary_length + 1e-9
    assert level_set(f, 0.0).length == 0.0


def test_base_case_square_disc():
    d = disc(6)
    f = base_case_sweepout(Region.whole(d), 1e-9)
    mf, _ = max_fiber_length(f)
    assert mf <= 4.0 + 1e-9


def test_base_case_annulus():
    t = flat_torus(8)
    ring = Region(t, np.arange(2 * 8 * 2))  # two columns of cells
    assert ring.topology()[2] == 2
    # the discrete distance bends the mid-level curves slightly; delta absorbs it
    f = base_case_sweepout(ring, 1e-3)
    assert max_fiber_length(f)[0] <= ring.boundary_length + 1e-3


def test_base_case_rejects_positive_genus():
    with pytest.raises(SweepoutError, match="genus"):
        base_case_sweepout(Region.whole(flat_torus(4)))


def test_bisecting_cycle_sphere_bound():
    s = icosphere(3)
    cyc, plus, minus = bisecting_cycle(Region.whole(s))
    assert cyc.length <= 6.48 * math.sqrt(s.area)
    a = min(plus.area, minus.area) / s.area
    assert a >= 1 / 24
    # a cap of area A/24 on the unit sphere has boundary 2*pi*sin(theta) with 1 - cos(theta) = 1/12
    assert cyc.length >= 0.9 * 2 * math.pi * math.sqrt(1 - (11 / 12) ** 2)
    assert all(c.closed for c in cyc.components)


def test_bisecting_cycle_torus():
    t = flat_torus(16)
    cyc, plus, minus = bisecting_cycle(Region.whole(t))
    assert cyc.length <= 6.48
    assert min(plus.area, minus.area) >= 1 / 24


def test_bisecting_cycle_neck():
    m = dumbbell()
    cyc, plus, minus = bisecting_cycle(Region.whole(m))
    assert cyc.length == pytest.approx(1.0)
    assert abs(plus.area / m.area - 0.5) < 0.1
    assert all(not c.closed for c in cyc.components)
    # every distance level from the two square centres, scanned exhaustively
    X = m.embedding
    centres = [int(np.argmin(np.linalg.norm(X - p, axis=1))) for p in ([4, 4, 0], [18, 4, 0])]
    b = Bisector(m)
    b.centers = lambda region: centres
    assert cyc.length <= b.cut(Region.whole(m)).length + 1e-12


def test_merge_identity_and_half_discs():
    d = disc(8)
    left = Region(d, np.arange(d.n_faces // 2))
    right = Region(d, np.arange(d.n_faces // 2, d.n_faces))
    f1 = base_case_sweepout(left, 1e-9)
    f2 = base_case_sweepout(right, 1e-9, fine=None)
    f2 = f2.with_mesh(f1.mesh)
    assert merge_morse(f1, None) is f1
    f = merge_morse(f1, f2)
    m1, m2 = max_fiber_length(f1)[0], max_fiber_length(f2)[0]
    outer = Region.whole(d).boundary_length
    diameter = left.interface_length(right)
    assert max_fiber_length(f)[0] <= outer + 2 * diameter + max(m1, m2)
    assert level_set(f, 0.0).length == 0.0


def test_merge_rejects_overlap():
    d = disc(4)
    f = base_case_sweepout(Region.whole(d))
    with pytest.raises(SweepoutError):
        merge_morse(f, f)


@pytest.fixture(scope="module")
def sphere_cert():
    return build_sweepout(icosphere(3), delta=1e-6)


def test_sphere_certificate(sphere_cert):
    c = sphere_cert
    assert c.ok and not c.violations()
    assert c.max_fiber <= 616 * math.sqrt(4 * math.pi) + 1e-6
    assert c.max_fiber >= 0.97 * 2 * math.pi
    assert c.depth <= c.depth_bound


def test_ledger_invariants(sphere_cert):
    c = sphere_cert
    for r in c.bisections:
        assert r["length"] <= 6.48 * math.sqrt(r["area"]) * 1.05
        assert min(r["balance"]) >= 1 / 24 - 0.01


def test_torus_certificate_and_scaling():
    t = flat_torus(12)
    a = build_sweepout(t)
    assert a.ok and 1.0 <= a.max_fiber <= 10
    b = build_sweepout(scale_metric(t, 2.0))
    assert b.max_fiber == 2 * a.max_fiber
    c3 = build_sweepout(scale_metric(t, 3.0))
    assert c3.max_fiber == pytest.approx(3 * a.max_fiber, rel=1e-9)


def test_boundary_mesh_certificate():
    d = disc(8)
    c = build_sweepout(d)
    assert c.ok
    assert c.boundary_length == pytest.approx(4.0)
    assert level_set(c.function, 0.0).length == 0.0


def test_genus_two_certificate():
    c = build_sweepout(genus_two(5))
    assert c.genus == 2 and c.ok
