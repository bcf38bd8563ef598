import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistkit.gamma import (
    GammaFamily,
    LoopTuple,
    almgren_degree,
    constant_curve,
    continuity_modulus,
    from_points,
    gamma_distance,
    morse_to_gamma,
)
from waistkit.generators import flat_torus, genus_two, icosphere, torus_of_revolution
from waistkit.morse import MorseError, PLFunction, classify_critical


def circle(r, n=400, centre=(0, 0, 0), phase=0.0):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False) + phase
    return from_points(np.c_[r * np.cos(th), r * np.sin(th), 0 * th] + np.asarray(centre, float))


def height(mesh, a=1e-3, b=1e-4, axis=2):
    X = mesh.embedding
    others = [i for i in range(3) if i != axis]
    return PLFunction(mesh, X[:, axis] + a * X[:, others[0]] + b * X[:, others[1]])


@pytest.fixture(scope="module")
def sphere_family():
    return morse_to_gamma(height(icosphere(3)))


@pytest.fixture(scope="module")
def torus_family():
    return morse_to_gamma(height(torus_of_revolution(32, 16), axis=0))


# -- distance -------------------------------------------------------------------------


def test_identity_and_constants():
    a = LoopTuple([circle(1.0)])
    assert gamma_distance(a, a) == 0.0
    p, q = constant_curve([0, 0, 0]), constant_curve([0.3, 0.4, 0])
    assert gamma_distance(LoopTuple([p]), LoopTuple([q])) == pytest.approx(0.5)


def test_concentric_circles_closed_form():
    d = gamma_distance(LoopTuple([circle(1.0)]), LoopTuple([circle(1.1)]))
    assert d == pytest.approx(0.1 + 0.2 * math.pi, rel=1e-4)


def test_size_mismatch_rejected():
    with pytest.raises(ValueError, match="sizes"):
        gamma_distance(LoopTuple([circle(1.0)]), LoopTuple([circle(1.0), circle(2.0)]))


def test_relabelling_and_start_point_do_not_matter():
    step = 2 * np.pi / 256
    a = LoopTuple([circle(1.0, 256), circle(0.5, 256, centre=(3, 0, 0))])
    b = LoopTuple([circle(0.5, 256, centre=(3, 0, 0), phase=37 * step), circle(1.0, 256, phase=-100 * step)])
    assert gamma_distance(a, b) < 1e-12


def _random_curve(rng):
    kind = rng.integers(3)
    if kind == 0:
        return constant_curve(rng.normal(size=3))
    pts = rng.normal(size=(int(rng.integers(3, 8)), 3))
    return from_points(pts, closed=bool(kind == 1))


def _random_tuple(rng, k):
    return LoopTuple([_random_curve(rng) for _ in range(k)])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_metric_axioms_random_triples(seed, k):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_tuple(rng, k) for _ in range(3))
    ab, ba = gamma_distance(a, b), gamma_distance(b, a)
    assert ab == ba
    assert ab <= gamma_distance(a, c) + gamma_distance(c, b) + 1e-9
    assert gamma_distance(a, a) == 0.0


@pytest.mark.parametrize("r,dr", [(1.0, 0.1), (0.5, 0.02), (2.0, 0.5)])
def test_dominates_area_between_nested_circles(r, dr):
    d = gamma_distance(LoopTuple([circle(r)]), LoopTuple([circle(r + dr)]))
    between = math.pi * ((r + dr) ** 2 - r**2)
    assert between <= math.pi * d * (2 * r + d)


# -- families -------------------------------------------------------------------------


def test_sphere_family(sphere_family):
    fam = sphere_family
    assert fam.k == 1
    assert [kind for _, kind in fam.events] == ["create", "destroy"]
    assert almgren_degree(fam) == pytest.approx(1.0, abs=1e-9)
    T = fam.tuples
    assert T[0].length == 0.0 and T[-1].length == 0.0


def test_closure_and_length_continuity(sphere_family, torus_family):
    for fam in (sphere_family, torus_family):
        T = fam.tuples
        assert all(not t.closure_defect() for t in T)
        for a, b in zip(T[:-1], T[1:]):
            assert abs(a.length - b.length) <= gamma_distance(a, b) + 1e-12


def test_torus_split_and_merge(torus_family):
    fam = torus_family
    assert fam.k == 2
    kinds = [kind for _, kind in fam.events]
    assert kinds.count("split") == 1 and kinds.count("merge") == 1
    assert kinds.index("split") < kinds.index("merge")
    assert almgren_degree(fam) == pytest.approx(1.0, abs=1e-9)


def test_genus_two_events_match_saddles():
    g = genus_two(5)
    f = PLFunction(g, np.random.default_rng(1).random(g.n_vertices))
    saddles = [c for c in classify_critical(f) if c[1] == "saddle"]
    assert all(mult == 1 for _, _, mult in saddles)
    fam = morse_to_gamma(f, n_levels=33)
    assert sum(kind in ("split", "merge") for _, kind in fam.events) == len(saddles)
    assert almgren_degree(fam) == pytest.approx(1.0, abs=1e-9)
    assert all(not t.closure_defect() for t in fam.tuples)


def test_flat_torus_coordinate_family():
    t = flat_torus(12)
    uv = t.meta["uv"]
    f = PLFunction(t, uv[:, 0] + 0.02 * np.sin(2 * np.pi * uv[:, 1]) + 1e-3 * uv[:, 1], period=1.0)
    fam = morse_to_gamma(f)
    assert fam.k == 1 and not fam.events
    assert almgren_degree(fam) == pytest.approx(1.0, abs=1e-9)


def test_constant_family():
    fam = GammaFamily.constant(LoopTuple([circle(1.0)]), np.linspace(0, 1, 5))
    assert continuity_modulus(fam) == 0.0
    assert almgren_degree(fam) == 0.0


def test_missing_fillings_rejected():
    tup = LoopTuple([circle(1.0)])
    with pytest.raises(ValueError, match="filling"):
        almgren_degree(GammaFamily([0.0, 1.0], [tup, tup]))


def test_modulus_shrinks_on_refinement():
    f = height(icosphere(3))
    m1 = continuity_modulus(morse_to_gamma(f, n_levels=65))
    m2 = continuity_modulus(morse_to_gamma(f, n_levels=129))
    assert m2 <= 0.75 * m1


def test_corrupted_family_detected(sphere_family):
    fam = sphere_family
    base = continuity_modulus(fam)
    T = list(fam.tuples)
    i = len(T) // 2
    c = T[i].curves[0]
    moved = type(c)(c.pos + np.array([0.0, 0.0, 5.0]), c.near, c.length, c.closed)
    T[i] = LoopTuple([moved], T[i].mesh)
    bad = GammaFamily(fam.params, T, fam.events, fam.levels, fam.fillings, fam.area)
    assert continuity_modulus(bad) > 2 * base


def test_non_morse_and_coarse_grid_rejected():
    s = icosphere(1)
    with pytest.raises(MorseError):
        morse_to_gamma(PLFunction(s, np.round(s.embedding[:, 2], 1)))
    f = height(torus_of_revolution(16, 8), axis=0)
    with pytest.raises(MorseError, match="vertices"):
        morse_to_gamma(f, levels=[0.0, 1.0])
