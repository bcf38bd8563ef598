import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistkit.gamma import GammaFamily, LoopTuple, morse_to_gamma
from waistkit.generators import disc, ellipsoid, flat_torus, icosphere
from waistkit.mesh import scale_metric
from waistkit.morse import PLFunction, level_set
from waistkit.nets import GeodesicNet, birkhoff_shorten, geodesic_between, minmax_extract, stationarity_residual


def height(mesh, a=1e-3, b=1e-4):
    X = mesh.embedding
    return PLFunction(mesh, X[:, 2] + a * X[:, 0] + b * X[:, 1])


def flat_point(mesh, xy):
    """(face, bary) of a planar point on a flat embedded mesh."""
    X = mesh.embedding[:, :2]
    for f, tri in enumerate(mesh.faces):
        P = X[tri]
        T = np.column_stack([P[1] - P[0], P[2] - P[0]])
        uv = np.linalg.solve(T, np.asarray(xy) - P[0])
        b = np.r_[1 - uv.sum(), uv]
        if b.min() >= -1e-12:
            b = np.where(b < 1e-12, 0.0, b)
            return f, b / b.sum()
    raise ValueError("outside")


@pytest.fixture(scope="module")
def sphere():
    return icosphere(3)


@pytest.fixture(scope="module")
def sphere_trace(sphere):
    return minmax_extract(morse_to_gamma(height(sphere)))


# -- Birkhoff shortening --------------------------------------------------------------


def test_equator_is_fixed_point(sphere):
    r = birkhoff_shorten(level_set(height(sphere), 0.0).components[0], 300)
    assert r.converged and not r.contracted
    assert abs(r.length - 2 * math.pi) < 0.02 * 2 * math.pi
    assert r.residual <= 1e-3
    before = r.loop.length
    for _ in range(10):
        r.loop.run(1)
        assert before - r.loop.length <= 1e-6
    assert before - r.loop.length < 1e-9 * before


def test_latitude_contracts(sphere):
    c = level_set(height(sphere), math.sqrt(0.5)).components[0]
    assert c.length == pytest.approx(2 * math.pi * math.sqrt(0.5), rel=0.02)
    r = birkhoff_shorten(c, 500)
    assert r.contracted and r.length == 0.0
    assert len(r.curve.verts) == 1
    assert np.all(np.diff(r.lengths[:-1]) <= 1e-12)


def test_torus_loop_fixed():
    t = flat_torus(12)
    f = PLFunction(t, t.meta["uv"][:, 0], period=1.0)
    c = level_set(f, 0.37).components[0]
    r = birkhoff_shorten(c, 20)
    assert r.converged and abs(r.length - 1.0) <= 1e-12
    assert r.residual <= 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(0, 2 * math.pi), st.floats(0.1, 1.5))
def test_length_never_increases(level, phi, tilt):
    s = icosphere(2)
    X = s.embedding
    d = np.array([math.sin(tilt) * math.cos(phi), math.sin(tilt) * math.sin(phi), math.cos(tilt)])
    f = PLFunction(s, X @ d + 1e-7 * X[:, 0])
    comps = level_set(f, level).components
    c = max(comps, key=lambda c: c.length)
    r = birkhoff_shorten(c, 8, until_converged=False)
    h = np.array(r.lengths)
    assert h[0] == pytest.approx(c.length, rel=1e-12)
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_bad_input_rejected(sphere):
    c = level_set(height(sphere), 0.0).components[0]
    with pytest.raises(ValueError):
        birkhoff_shorten(c, 0)
    with pytest.raises(ValueError):
        birkhoff_shorten(c, 5, n=7)


def test_geodesic_on_flat_torus_is_straight():
    t = flat_torus(12)
    uv = t.meta["uv"]

    def lift(f, b):
        c = uv[t.faces[f]].copy()
        c -= np.round(c - c[0])
        return b @ c

    rng = np.random.default_rng(3)
    for _ in range(10):
        p = (int(rng.integers(t.n_faces)), rng.dirichlet([1, 1, 1]))
        q = (int(rng.integers(t.n_faces)), rng.dirichlet([1, 1, 1]))
        d = lift(*q) - lift(*p)
        d -= np.round(d)
        g = geodesic_between(t, p, q, rings=6)
        assert g.length == pytest.approx(np.hypot(*d), abs=1e-12)


# -- stationarity ---------------------------------------------------------------------


def star(angles, r=0.3):
    d = disc(6)
    centre = flat_point(d, (0.5, 0.5))
    arcs = [geodesic_between(d, centre, flat_point(d, (0.5 + r * math.cos(a), 0.5 + r * math.sin(a)))) for a in angles]
    return GeodesicNet.from_arcs(arcs)


def test_theta_junction_balanced():
    net = star([0.1, 0.1 + 2 * math.pi / 3, 0.1 + 4 * math.pi / 3])
    assert len(net.junctions) == 1
    assert stationarity_residual(net) <= 1e-6


@pytest.mark.parametrize("third", [0.0, 1.0, 2.5, math.pi + math.pi / 4, 5.0])
def test_unbalanced_y_junction(third):
    net = star([0.0, math.pi / 2, third])
    s = np.array([1.0, 0.0]) + np.array([0.0, 1.0]) + np.array([math.cos(third), math.sin(third)])
    assert stationarity_residual(net) == pytest.approx(np.linalg.norm(s), abs=1e-9)
    assert stationarity_residual(net) > 0.4


def test_single_loop_residual(sphere_trace):
    assert sphere_trace.residual <= 1e-3
    assert not sphere_trace.net.junctions


# -- min-max --------------------------------------------------------------------------


def test_sphere_minmax(sphere_trace):
    tr = sphere_trace
    assert tr.converged
    assert abs(tr.length - 2 * math.pi) <= 0.02 * 2 * math.pi
    assert tr.ok and tr.length <= tr.initial_max
    maxima = [L for L, _ in tr.iterations]
    assert all(b <= a for a, b in zip(maxima, maxima[1:]))
    assert tr.limit_candidate.k == 1
    assert tr.limit_candidate.length == pytest.approx(tr.length, rel=1e-12)


def test_torus_minmax():
    t = flat_torus(12)
    uv = t.meta["uv"]
    f = PLFunction(t, uv[:, 0] + 0.02 * np.sin(2 * np.pi * uv[:, 1]) + 1e-3 * uv[:, 1], period=1.0)
    tr = minmax_extract(morse_to_gamma(f))
    assert abs(tr.length - 1.0) <= 1e-6
    assert tr.ok


def test_ellipsoid_waist():
    e = ellipsoid((1, 1, 1.5), 3)
    tr = minmax_extract(morse_to_gamma(height(e)))
    assert abs(tr.length - 2 * math.pi) <= 0.03 * 2 * math.pi
    assert tr.ok and tr.residual <= 1e-3


def test_degree_zero_rejected(sphere):
    fam = morse_to_gamma(height(icosphere(1)))
    flat = GammaFamily(fam.params, fam.tuples, fam.events, fam.levels, np.zeros_like(fam.fillings), fam.area)
    with pytest.raises(ValueError, match="not a sweepout"):
        minmax_extract(flat)
    tup = fam.tuples[len(fam.tuples) // 2]
    with pytest.raises(ValueError, match="not a sweepout"):
        minmax_extract(GammaFamily([0.0, 1.0], [tup, tup]))


def test_minmax_scales_exactly():
    s = icosphere(2)
    X = s.embedding
    vals = X[:, 2] + 1e-3 * X[:, 0] + 1e-4 * X[:, 1]
    base = minmax_extract(morse_to_gamma(PLFunction(s, vals)), iterations=6)
    assert base.length > 0
    for lam in (0.5, 2.0):
        tr = minmax_extract(morse_to_gamma(PLFunction(scale_metric(s, lam), vals)), iterations=6)
        assert tr.length == pytest.approx(lam * base.length, rel=1e-12)


def test_tuples_without_source_curves():
    fam = morse_to_gamma(height(icosphere(2)))
    bare = [LoopTuple([dataclasses.replace(c, source=None) for c in t.curves], t.mesh) for t in fam.tuples]
    tr = minmax_extract(GammaFamily(fam.params, bare, fam.events, fam.levels, fam.fillings, fam.area), iterations=3)
    assert tr.ok
    assert 0 < tr.length <= 2 * math.pi
