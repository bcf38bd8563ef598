import math

import numpy as np
import pytest

from waistkit.generators import disc, ellipsoid, flat_torus, icosphere
from waistkit.morse import PLFunction, max_fiber_length
from waistkit.parametric import (
    HeegaardFamily,
    MetricFamily,
    assemble_three_manifold,
    homotopy_sweepouts,
    long_ellipsoid_family,
    parametric_sweepout,
    round_s3_family,
    subdivide_metric_family,
    unit_function,
)


def heights(level=3):
    s = icosphere(level)
    X = s.embedding
    f0 = PLFunction(s, X[:, 2] + 1e-3 * X[:, 0] + 1e-4 * X[:, 1])
    f1 = PLFunction(s, X[:, 0] + 1e-3 * X[:, 1] + 1e-4 * X[:, 2])
    return f0, f1


def torus_coordinates(n=16):
    t = flat_torus(n)
    uv = t.meta["uv"]
    return PLFunction(t, uv[:, 0], period=1.0), PLFunction(t, uv[:, 1], period=1.0)


def test_same_function_stays_short():
    f0, _ = heights(2)
    L = max_fiber_length(f0)[0]
    p = homotopy_sweepouts(f0, f0, 0.05 * L, n_s=16, n_x=32)
    assert p.fiber_bound <= L + 0.05 * L


def test_sphere_pair_bound_and_endpoints():
    f0, f1 = heights(3)
    L = max(max_fiber_length(f0)[0], max_fiber_length(f1)[0])
    assert abs(L - 2 * math.pi) / (2 * math.pi) < 0.03
    p = homotopy_sweepouts(f0, f1, 0.05 * L)
    assert p.lengths.shape == (64, 64)
    assert p.fiber_bound <= 2 * L + 0.05 * L and p.ok
    assert np.array_equal(p.function(0.0).values, unit_function(f0).values)
    assert np.array_equal(p.function(1.0).values, unit_function(f1).values)
    # vertex values of the homotopy at the ends agree with the endpoints too
    assert np.array_equal(p.vertex_values(0.0), unit_function(f0).values)
    assert np.array_equal(p.vertex_values(1.0), unit_function(f1).values)


def test_sphere_pair_fibers_are_curves():
    f0, f1 = heights(2)
    p = homotopy_sweepouts(f0, f1, 0.1, n_s=4, n_x=4)
    for s in (0.0, 0.3, 0.5, 0.8):
        v = p.vertex_values(s)
        for t in (0.2, 0.5, 0.8):
            n, loose = p.fiber_components(s, v.min() + t * (v.max() - v.min()) + 1e-7)
            assert loose == 0
            assert n >= 1


def test_torus_pair_staircase():
    a, b = torus_coordinates()
    p = homotopy_sweepouts(a, b, 0.05, L=1.0)
    assert p.fiber_bound <= 2.05
    assert p.lengths[0].max() == pytest.approx(1.0) and p.lengths[-1].max() == pytest.approx(1.0)
    n, loose = p.fiber_components(0.5, 0.8)
    assert n == 1 and loose == 0


def test_homotopy_rejects_other_mesh():
    f0, _ = heights(1)
    g = PLFunction(icosphere(2), icosphere(2).embedding[:, 2])
    with pytest.raises(ValueError):
        homotopy_sweepouts(f0, g, 0.1)


def test_homotopy_scales_exactly():
    f0, f1 = heights(2)
    p = homotopy_sweepouts(f0, f1, 0.1, n_s=8, n_x=16)
    from waistkit.mesh import scale_metric

    for lam in (0.5, 2.0):
        m = scale_metric(f0.mesh, lam)
        q = homotopy_sweepouts(f0.with_mesh(m), f1.with_mesh(m), 0.1, n_s=8, n_x=16)
        assert q.fiber_bound == lam * p.fiber_bound


# -- metric families ------------------------------------------------------------------


def test_constant_family_single_interval():
    assert len(subdivide_metric_family(MetricFamily.constant(icosphere(1)), 0.05)) == 2


def test_linear_scaling_family_grid():
    s = icosphere(1)
    fam = MetricFamily(s, [0, 1], np.stack([s.lengths, 2 * s.lengths]))
    grid = subdivide_metric_family(fam, 0.1)
    assert len(grid) - 1 == math.ceil(math.log(2) / math.log(1.1)) == 8


def test_sphere_to_ellipsoid_grid_sandwich():
    s, e = icosphere(2), ellipsoid((2, 1, 1), 2)
    fam = MetricFamily.between(s, e)
    grid = subdivide_metric_family(fam, 0.05)
    stretch = np.max(np.abs(np.log(e.lengths / s.lengths)))
    assert len(grid) - 1 >= math.ceil(stretch / math.log(1.05))
    for a, b in zip(grid[:-1], grid[1:]):
        la, lb = fam.lengths_at(a), fam.lengths_at(b)
        assert np.all(lb <= 1.05**2 * la) and np.all(lb >= la / 1.05**2)
        assert np.max(np.abs(np.log(lb / la))) <= math.log1p(0.05)


def test_jumping_family_rejected():
    s = icosphere(1)
    L = s.lengths
    fam = MetricFamily(s, [0, 0.5, 0.5 + 1e-15, 1], np.stack([L, L, 2 * L, 2 * L]))
    with pytest.raises(ValueError, match="no finite subdivision"):
        subdivide_metric_family(fam, 0.05)


def test_area_bound_checked():
    s = icosphere(1)
    with pytest.raises(ValueError, match="area bound"):
        MetricFamily(s, [0, 1], np.stack([s.lengths, s.lengths]), area_bound=1.0)


def test_constant_sphere_parametric_and_scaling():
    fam = MetricFamily.constant(icosphere(2))
    c = parametric_sweepout(fam)
    assert c.ok and c.max_fiber < 0.01 * c.theorem_bound
    assert c.theorem_bound == pytest.approx(2000 * math.sqrt(fam.area_bound))
    c2 = parametric_sweepout(fam.scaled(2.0))
    assert c2.max_fiber == 2 * c.max_fiber
    assert c2.theorem_bound == pytest.approx(2 * c.theorem_bound, rel=1e-12)


def test_short_stretch_family():
    s = icosphere(1)
    e = ellipsoid((1.2, 1, 1), 1)
    c = parametric_sweepout(MetricFamily.between(s, e), n_s=5, n_x=17)
    assert c.ok
    assert all(i["max_fiber"] <= i["bound"] for i in c.intervals)


# -- three-manifold assembly ----------------------------------------------------------


@pytest.fixture(scope="module")
def s3():
    return round_s3_family(2, 17)


def test_round_s3_volume_and_scaling(s3):
    c = assemble_three_manifold(s3)
    assert math.isfinite(c.C_real) and c.C_real > 0
    assert c.volume == pytest.approx(2 * math.pi**2, rel=0.02)
    c2 = assemble_three_manifold(s3.scaled(2.0))
    assert c2.C_real == pytest.approx(c.C_real, rel=1e-12)
    assert c2.volume == pytest.approx(8 * c.volume, rel=1e-12)


def test_zero_fibers_on_parameter_boundary(s3):
    c = assemble_three_manifold(s3)
    T = c.fiber_table
    assert np.all(T[:, 0] == 0) and np.all(T[:, -1] == 0)
    assert np.all(T[0] == 0) and np.all(T[-1] == 0)


def test_long_ellipsoid_ratio_bounded():
    ratios = [assemble_three_manifold(long_ellipsoid_family(e, 1, 9)).C_real for e in (1, 2, 4, 8)]
    assert max(ratios) <= ratios[0] * 1.001
    assert all(b <= a * 1.001 for a, b in zip(ratios, ratios[1:]))


def test_bad_heegaard_inputs():
    s = icosphere(1)
    with pytest.raises(ValueError, match="two slices"):
        HeegaardFamily(s, [0.0], s.lengths[None], [1.0])
    with pytest.raises(ValueError, match="slab"):
        HeegaardFamily(s, [-1.0, 1.0], np.stack([s.lengths, s.lengths]), [1.0, -1.0])


def test_disc_family_has_boundary_term():
    d = disc(4)
    c = parametric_sweepout(MetricFamily.constant(d), n_s=3, n_x=9)
    assert c.ok
