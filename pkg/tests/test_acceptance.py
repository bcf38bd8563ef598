"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the lines are also collected into the
terminal summary so they survive output capture.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import RESULTS
from waistkit.gamma import LoopTuple, almgren_degree, continuity_modulus, from_points, constant_curve, gamma_distance, morse_to_gamma
from waistkit.generators import disc, ellipsoid, flat_torus, genus_two, icosphere
from waistkit.mesh import scale_metric
from waistkit.morse import PLFunction, max_fiber_length
from waistkit.nets import minmax_extract
from waistkit.parametric import (
    MetricFamily,
    assemble_three_manifold,
    homotopy_sweepouts,
    parametric_sweepout,
    round_s3_family,
    subdivide_metric_family,
    unit_function,
)
from waistkit.stability import assemble_operator, falsification_run, first_dirichlet_eigenvalue
from waistkit.sweepout import build_sweepout


@contextmanager
def criterion(n, title):
    notes = []
    try:
        yield notes
    except BaseException:
        line = f"FAIL criterion {n}: {title}"
        print(line)
        RESULTS.append((n, line))
        raise
    line = f"PASS criterion {n}: {title}" + (f" ({'; '.join(notes)})" if notes else "")
    print(line)
    RESULTS.append((n, line))


def tilted(mesh, i=2):
    X = mesh.embedding
    return PLFunction(mesh, X[:, i] + 1e-3 * X[:, (i + 1) % 3] + 1e-4 * X[:, (i + 2) % 3])


@pytest.fixture(scope="module")
def certificates():
    meshes = {"sphere": icosphere(3), "torus": flat_torus(16), "genus2": genus_two(5), "disc": disc(8)}
    out = {}
    for name, m in meshes.items():
        t0 = time.perf_counter()
        c = build_sweepout(m, delta=1e-6, tau=0.05)
        out[name] = (c, time.perf_counter() - t0)
    return out


def test_criterion_1_sweepout_bound(certificates):
    with criterion(1, "sweepout fibers within 616 sqrt(g+1) sqrt(A) + delta, above the width") as notes:
        for name, width in (("sphere", 2 * math.pi * 0.97), ("torus", 1.0)):
            c, secs = certificates[name]
            bound = 616 * math.sqrt(c.genus + 1) * math.sqrt(c.area) + c.delta
            assert c.max_fiber <= bound
            assert c.max_fiber >= width
            assert secs <= 60
            notes.append(f"{name}: {c.max_fiber:.4f} <= {bound:.1f}, {secs:.1f} s")


def test_criterion_2_bisection_ledger(certificates):
    with criterion(2, "every bisection short and balanced over >= 200 records") as notes:
        count = 0
        for c, _ in certificates.values():
            for r in c.bisections:
                assert r["length"] <= 6.48 * max(1.0, math.sqrt(c.genus)) * math.sqrt(r["area"]) * 1.05
                assert min(r["balance"]) >= 1 / 24 - 0.01
                count += 1
        assert count >= 200
        notes.append(f"{count} records")


def test_criterion_3_homotopy_bound():
    with criterion(3, "homotopy fibers within 2L + 0.05L on a 64x64 grid, exact endpoints") as notes:
        s = icosphere(3)
        f0, f1 = tilted(s, 2), tilted(s, 0)
        t = flat_torus(16)
        uv = t.meta["uv"]
        pairs = [
            ("sphere", f0, f1, None),
            ("torus", PLFunction(t, uv[:, 0], period=1.0), PLFunction(t, uv[:, 1], period=1.0), 1.0),
        ]
        for name, a, b, L in pairs:
            if L is None:
                L = max(max_fiber_length(a)[0], max_fiber_length(b)[0])
                assert abs(L - 2 * math.pi) <= 0.03 * 2 * math.pi
            p = homotopy_sweepouts(a, b, 0.05 * L, n_s=64, n_x=64, L=L)
            assert p.lengths.shape == (64, 64)
            assert p.fiber_bound <= 2 * L + 0.05 * L
            assert np.array_equal(p.function(0.0).values, unit_function(a).values)
            assert np.array_equal(p.function(1.0).values, unit_function(b).values)
            assert np.array_equal(p.vertex_values(0.0), unit_function(a).values)
            assert np.array_equal(p.vertex_values(1.0), unit_function(b).values)
            notes.append(f"{name}: {p.fiber_bound:.4f} <= {2.05 * L:.4f}")


def test_criterion_4_parametric_bound():
    with criterion(4, "sphere to ellipsoid family within 2000 sqrt((g+1) A_max), exact grid sandwich") as notes:
        s, e = icosphere(2), ellipsoid((2, 1, 1), 2)
        fam = MetricFamily.between(s, e)
        grid = subdivide_metric_family(fam, 0.05)
        for a, b in zip(grid[:-1], grid[1:]):
            la, lb = fam.lengths_at(a), fam.lengths_at(b)
            assert np.all(lb <= 1.05**2 * la) and np.all(la <= 1.05**2 * lb)
        c = parametric_sweepout(fam, 0.05)
        bound = 2000 * math.sqrt((fam.genus + 1) * fam.area_bound)
        assert c.ok and c.max_fiber <= bound
        assert all(i["max_fiber"] <= bound for i in c.intervals)
        notes.append(f"{len(grid)} nodes, {c.max_fiber:.3f} <= {bound:.0f}")


def test_criterion_5_three_manifold_scaling():
    with criterion(5, "C_real invariant under scaling, volume 2 pi^2 lambda^3") as notes:
        h = round_s3_family(2, 17)
        base = assemble_three_manifold(h)
        assert base.C_real == pytest.approx(base.Lambda_max / base.volume ** (1 / 3), rel=1e-12)
        for lam in (0.5, 2.0, 3.0):
            c = assemble_three_manifold(h.scaled(lam))
            assert abs(c.C_real - base.C_real) <= 1e-9 * base.C_real
            assert abs(c.volume - 2 * math.pi**2 * lam**3) <= 0.02 * 2 * math.pi**2 * lam**3
        notes.append(f"C_real {base.C_real:.5f}, Vol {base.volume:.4f}")


def test_criterion_6_minmax():
    with criterion(6, "min-max limits: great circle on the sphere, unit loop on the torus") as notes:
        s = icosphere(3)
        tr = minmax_extract(morse_to_gamma(tilted(s)))
        assert tr.ok and tr.length <= tr.initial_max
        assert abs(tr.length - 2 * math.pi) <= 0.02 * 2 * math.pi
        assert tr.residual <= 1e-3
        t = flat_torus(12)
        uv = t.meta["uv"]
        f = PLFunction(t, uv[:, 0] + 0.02 * np.sin(2 * np.pi * uv[:, 1]) + 1e-3 * uv[:, 1], period=1.0)
        tt = minmax_extract(morse_to_gamma(f))
        assert tt.ok and tt.length <= tt.initial_max
        assert abs(tt.length - 1.0) <= 1e-6
        notes.append(f"sphere {tr.length:.5f} residual {tr.residual:.1e}; torus {tt.length:.9f}")


def test_criterion_7_infradius_ode():
    with criterion(7, "analytic eigenvalues, O(n^-2) convergence, no falsifying instance") as notes:
        for l, exact in ((math.pi / 2, 3.0), (math.pi, 0.0)):
            errs = [first_dirichlet_eigenvalue(assemble_operator(1.0, 1.0, l, n)).value - exact for n in (64, 128, 256, 512)]
            assert abs(errs[-1]) <= 1e-4
            assert all(3 <= a / b <= 5 for a, b in zip(errs, errs[1:]))
        r = falsification_run(10_000, seed=0)
        assert r["violations"] == 0
        notes.append(f"{r['instances']} instances, {r['nonnegative']} with L0 >= 0, 0 violations")


def _random_tuple(rng, k):
    curves = []
    for _ in range(k):
        kind = rng.integers(3)
        if kind == 0:
            curves.append(constant_curve(rng.normal(size=3)))
        else:
            curves.append(from_points(rng.normal(size=(int(rng.integers(3, 8)), 3)), closed=bool(kind == 1)))
    return LoopTuple(curves)


def test_criterion_8_gamma_space():
    with criterion(8, "metric axioms, unit degree, continuity modulus shrinks") as notes:
        rng = np.random.default_rng(0)
        worst = -math.inf
        for _ in range(1000):
            k = int(rng.integers(1, 4))
            a, b, c = (_random_tuple(rng, k) for _ in range(3))
            ab = gamma_distance(a, b)
            assert ab == gamma_distance(b, a)
            worst = max(worst, ab - gamma_distance(a, c) - gamma_distance(c, b))
        assert worst <= 1e-9
        fams = [
            morse_to_gamma(tilted(icosphere(3))),
            morse_to_gamma(PLFunction(genus_two(5), np.random.default_rng(1).random(genus_two(5).n_vertices)), n_levels=33),
            morse_to_gamma(PLFunction(flat_torus(12), flat_torus(12).meta["uv"][:, 0] + 1e-3 * flat_torus(12).meta["uv"][:, 1], period=1.0)),
        ]
        for fam in fams:
            assert abs(almgren_degree(fam) - 1.0) <= 1e-9
        f = tilted(icosphere(3))
        m1 = continuity_modulus(morse_to_gamma(f, n_levels=65))
        m2 = continuity_modulus(morse_to_gamma(f, n_levels=129))
        assert m2 <= 0.75 * m1
        notes.append(f"triangle slack {worst:.2e}, modulus ratio {m2 / m1:.3f}")


def test_criterion_9_scaling():
    with criterion(9, "every length certificate scales exactly") as notes:
        lams = (0.5, 2.0)
        t = flat_torus(12)
        base = build_sweepout(t).max_fiber
        s = icosphere(2)
        X = s.embedding
        v0 = X[:, 2] + 1e-3 * X[:, 0] + 1e-4 * X[:, 1]
        v1 = X[:, 0] + 1e-3 * X[:, 1] + 1e-4 * X[:, 2]
        hom = homotopy_sweepouts(PLFunction(s, v0), PLFunction(s, v1), 0.1, n_s=8, n_x=16).fiber_bound
        fam = MetricFamily.constant(icosphere(2))
        par = parametric_sweepout(fam).max_fiber
        mm = minmax_extract(morse_to_gamma(PLFunction(s, v0)), iterations=6).length
        worst = 0.0
        for lam in lams:
            pairs = [
                (build_sweepout(scale_metric(t, lam)).max_fiber, base),
                (homotopy_sweepouts(PLFunction(scale_metric(s, lam), v0), PLFunction(scale_metric(s, lam), v1), 0.1, n_s=8, n_x=16).fiber_bound, hom),
                (parametric_sweepout(fam.scaled(lam)).max_fiber, par),
                (minmax_extract(morse_to_gamma(PLFunction(scale_metric(s, lam), v0)), iterations=6).length, mm),
            ]
            for got, ref in pairs:
                assert ref > 0
                rel = abs(got - lam * ref) / (lam * ref)
                worst = max(worst, rel)
                assert rel <= 1e-12
        notes.append(f"worst relative deviation {worst:.1e}")
