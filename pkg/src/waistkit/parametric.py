"""Homotopies between sweepouts and sweepouts over families of metrics.

Two sweepouts ``f0, f1`` onto ``[0, 1]`` are joined by

    f_s = min(f1 + 1 - s, f0 + s),    0 <= s <= 1,

whose sublevel sets are unions ``{f1 <= x - 1 + s} ∪ {f0 <= x - s}``.  Every
fiber of ``f_s`` lies in the union of one fiber of ``f0`` and one of ``f1``,
so its length is at most the sum of their maxima.  ``f_0 = f0`` and
``f_1 = f1`` hold vertex for vertex.

Inside a face ``f_s`` is the minimum of two linear functions, so fibers are
measured exactly on convex pieces where both functions are linear (circle
valued functions are cut along their integer levels first).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix

from .mesh import TriMesh, barycentric_subdivision, cap_boundary, genus, scale_metric
from .morse import MorseError, PLFunction, classify_critical, max_fiber_length, perturb_to_morse

log = logging.getLogger(__name__)

__all__ = [
    "FunctionPath",
    "homotopy_sweepouts",
    "unit_function",
    "MetricFamily",
    "subdivide_metric_family",
    "parametric_sweepout",
    "ParametricCertificate",
    "HeegaardFamily",
    "assemble_three_manifold",
    "round_s3_family",
    "long_ellipsoid_family",
    "THEOREM_CONSTANT",
    "BoundViolation",
]

THEOREM_CONSTANT = 2000.0


class BoundViolation(ValueError):
    """An audited fiber is longer than the bound it is certified against."""


def unit_function(f: PLFunction) -> PLFunction:
    """Affine copy of ``f`` onto ``[0, 1]`` (circle valued: onto ``[0, 1)`` with period 1)."""
    v = f.values
    if f.period is None:
        lo, hi = float(v.min()), float(v.max())
        if not hi > lo:
            raise MorseError("constant function")
        if lo == 0.0 and hi == 1.0:
            return f
        return f.with_values((v - lo) / (hi - lo))
    p = float(f.period)
    lo = float(v.min())
    w = np.mod((v - lo) / p, 1.0) if (lo < 0 or v.max() >= p or p != 1.0) else v
    return PLFunction(f.mesh, w, period=1.0, domain=f.domain)


# -- convex pieces -------------------------------------------------------------------


def _clip(poly, j, level, keep_low):
    """Clip a convex polygon (list of (xy, bary, values)) by ``values[j] <= level``
    (or ``>=``)."""
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        sp = P[2][j] - level
        sq = Q[2][j] - level
        inp = sp <= 0 if keep_low else sp >= 0
        inq = sq <= 0 if keep_low else sq >= 0
        if inp:
            out.append(P)
        if inp != inq and sp != sq:
            lam = sp / (sp - sq)
            if 0 < lam < 1:
                vals = P[2] + lam * (Q[2] - P[2])
                vals[j] = level
                out.append((P[0] + lam * (Q[0] - P[0]), P[1] + lam * (Q[1] - P[1]), vals))
    return out


class _Pieces:
    """Convex pieces of the faces on which both functions are linear."""

    def __init__(self, mesh: TriMesh, f0: PLFunction, f1: PLFunction):
        lay = mesh.layout
        F = mesh.n_faces
        periods = (f0.period, f1.period)
        lifted = [f0.face_values(np.arange(F)), f1.face_values(np.arange(F))]
        self.mesh = mesh
        self.periodic = any(p is not None for p in periods)
        if not self.periodic:
            # every face is a single piece
            self.xy = lay
            self.bary = np.broadcast_to(np.eye(3), (F, 3, 3))
            self.vals = np.stack(lifted, axis=2)
            self.cut = np.zeros((F, 3), bool)
            self.face = np.arange(F)
            return
        polys, faces = [], []
        eye = np.eye(3)
        for fc in range(F):
            vals = np.stack([lifted[0][fc], lifted[1][fc]], axis=1)  # (3, 2)
            poly = [(lay[fc, i].copy(), eye[i].copy(), vals[i].copy()) for i in range(3)]
            pieces = [poly]
            for j, p in enumerate(periods):
                if p is None:
                    continue
                lo, hi = vals[:, j].min(), vals[:, j].max()
                for k in range(int(math.floor(lo)) + 1, int(math.ceil(hi))):
                    nxt = []
                    for pc in pieces:
                        for keep_low in (True, False):
                            q = _clip(pc, j, float(k), keep_low)
                            if len(q) >= 3:
                                nxt.append(q)
                    pieces = nxt
            for pc in pieces:
                polys.append(pc)
                faces.append(fc)
        K = max(len(p) for p in polys)
        P = len(polys)
        self.xy = np.zeros((P, K, 2))
        self.bary = np.zeros((P, K, 3))
        self.vals = np.zeros((P, K, 2))
        self.cut = np.zeros((P, K), bool)  # edge i -> i+1 lies on a cut line
        for r, pc in enumerate(polys):
            pad = pc + [pc[-1]] * (K - len(pc))
            self.xy[r] = [q[0] for q in pad]
            self.bary[r] = [q[1] for q in pad]
            self.vals[r] = [q[2] for q in pad]
        # circle valued functions: shift each piece to its branch in [0, 1)
        for j, p in enumerate(periods):
            if p is None:
                continue
            mid = np.array([np.mean([q[2][j] for q in pc]) for pc in polys])
            shift = np.floor(mid)
            self.vals[:, :, j] -= shift[:, None]
            v = self.vals[:, :, j]
            vn = np.roll(v, -1, axis=1)
            on = ((v == 0) & (vn == 0)) | ((v == 1) & (vn == 1))
            self.cut |= on
        self.face = np.array(faces)


def _segments(pc: _Pieces, g1, g0, x, strict_other):
    """Level-``x`` segments of ``g1`` clipped to ``g0 >= x`` (``> x`` if strict).

    Returns per-crossing-pair arrays: piece id, endpoints (xy), endpoint edge
    indices, kept fractions ``(u0, u1)`` along the segment.
    """
    h = g1 - x
    s = h < 0
    sn = np.roll(s, -1, axis=1)
    hn = np.roll(h, -1, axis=1)
    cross = s != sn
    rows, cols = np.nonzero(cross)
    if not len(rows):
        return None
    # convex pieces give two crossings; keep consecutive pairs
    counts = np.bincount(rows, minlength=len(h))
    ok = counts[rows] % 2 == 0
    rows, cols = rows[ok], cols[ok]
    hi, hj = h[rows, cols], hn[rows, cols]
    lam = hi / (hi - hj)
    K = h.shape[1]
    nxt = (cols + 1) % K
    xy = pc.xy[rows, cols] + lam[:, None] * (pc.xy[rows, nxt] - pc.xy[rows, cols])
    go = g0[rows, cols] + lam * (g0[rows, nxt] - g0[rows, cols]) - x
    piece = rows.reshape(-1, 2)[:, 0]
    A, B = xy.reshape(-1, 2, 2)[:, 0], xy.reshape(-1, 2, 2)[:, 1]
    e0, e1 = go.reshape(-1, 2)[:, 0], go.reshape(-1, 2)[:, 1]
    if strict_other:
        inside0, inside1 = e0 > 0, e1 > 0
    else:
        inside0, inside1 = e0 >= 0, e1 >= 0
    # kept part of the segment as a parameter interval [u0, u1] of A -> B
    denom = e0 - e1
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom != 0, e0 / denom, 0.0)
    u0 = np.where(inside0, 0.0, np.where(inside1, r, 1.0))
    u1 = np.where(inside1, 1.0, np.where(inside0, r, 0.0))
    u1 = np.maximum(u1, u0)
    edges = cols.reshape(-1, 2)
    return piece, A, B, edges, u0, u1


def _level_lengths(pc: _Pieces, s: float, xs):
    """Fiber lengths of ``f_s`` at every level in ``xs``."""
    g1 = pc.vals[:, :, 1] + (1.0 - s)
    g0 = pc.vals[:, :, 0] + s
    out = np.zeros(len(xs))
    for i, x in enumerate(xs):
        tot = 0.0
        for a, b, strict in ((g1, g0, False), (g0, g1, True)):
            seg = _segments(pc, a, b, x, strict)
            if seg is None:
                continue
            _, A, B, _, u0, u1 = seg
            tot += float(np.sum(np.linalg.norm(B - A, axis=1) * (u1 - u0)))
        out[i] = tot
    return out


@dataclass
class FunctionPath:
    """The homotopy ``s -> f_s`` with its audited fiber lengths.

    Attributes
    ----------
    grid : ndarray
        Homotopy parameters ``s`` that were audited.
    f0, f1 : PLFunction
        Endpoints (normalized onto ``[0, 1]``).
    fiber_bound : float
        Largest fiber length found on the audit grid.
    argmax : (s, x)
    cusp_parameters : list of float
        Parameters where the count of vertex critical points changes.
    """

    grid: np.ndarray
    f0: PLFunction
    f1: PLFunction
    fiber_bound: float
    argmax: tuple
    lengths: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    cusp_parameters: list = field(default_factory=list)
    bound: float | None = None
    epsilon: float = 0.0

    def vertex_values(self, s: float) -> np.ndarray:
        return np.minimum(self.f1.values + (1.0 - s), self.f0.values + s)

    def function(self, s: float) -> PLFunction:
        """Vertex values of ``f_s`` as a PL function (the endpoints are returned as given)."""
        if s == 0.0:
            return self.f0
        if s == 1.0:
            return self.f1
        return PLFunction(self.f0.mesh, self.vertex_values(s))

    def fiber_length(self, s: float, x: float, mesh: TriMesh | None = None) -> float:
        pc = _Pieces(mesh or self.f0.mesh, self.f0, self.f1)
        return float(_level_lengths(pc, s, [x])[0])

    def fiber_components(self, s: float, x: float):
        """Chain the fiber of ``f_s`` at ``x`` into curves.

        Returns ``(n_components, n_loose_ends)``; loose ends are segment ends
        that meet no other segment and lie neither on the mesh boundary nor
        on a cut of a circle valued function.
        """
        return _fiber_components(_Pieces(self.f0.mesh, self.f0, self.f1), s, x)

    @property
    def ok(self):
        return self.bound is None or self.fiber_bound <= self.bound

    def to_json(self):
        return {
            "grid": self.grid.tolist(),
            "fiber_bound": self.fiber_bound,
            "argmax": [float(v) for v in self.argmax],
            "bound": self.bound,
            "epsilon": self.epsilon,
            "cusp_parameters": [float(c) for c in self.cusp_parameters],
            "ok": self.ok,
        }


def _fiber_components(pc: _Pieces, s: float, x: float):
    mesh = pc.mesh
    g1 = pc.vals[:, :, 1] + (1.0 - s)
    g0 = pc.vals[:, :, 0] + s
    crease_count: dict = {}
    K = pc.xy.shape[1]
    bnd = set(map(int, mesh.boundary_edges)) if len(mesh.boundary_edges) else set()

    def edge_key(piece, e, xy):
        i, j = e, (e + 1) % K
        if pc.cut[piece, e]:
            return None
        bi, bj = pc.bary[piece, i], pc.bary[piece, j]
        zero = np.flatnonzero((bi == 0) & (bj == 0))
        f = int(pc.face[piece])
        if len(zero):
            c = int(zero[0])
            u, v = int(mesh.faces[f][(c + 1) % 3]), int(mesh.faces[f][(c + 2) % 3])
            lay = mesh.layout[f]
            pu, pv = lay[(c + 1) % 3], lay[(c + 2) % 3]
            w = float(np.linalg.norm(xy - pu) / np.linalg.norm(pv - pu))
            if u > v:
                u, v, w = v, u, 1.0 - w
            eid = mesh.edge_id(u, v)
            if int(eid) in bnd:
                return None
            return ("e", u, v, round(w, 9))
        return ("f", f, round(float(xy[0]), 9), round(float(xy[1]), 9))

    segs = []
    for a, b, strict in ((g1, g0, False), (g0, g1, True)):
        seg = _segments(pc, a, b, x, strict)
        if seg is None:
            continue
        piece, A, B, edges, u0, u1 = seg
        for r in range(len(piece)):
            if u1[r] - u0[r] <= 0:
                continue
            pts = []
            for u, e, at in ((u0[r], edges[r, 0], 0.0), (u1[r], edges[r, 1], 1.0)):
                if u != at:
                    key = ("c", int(piece[r]))
                    crease_count[key] = crease_count.get(key, 0) + 1
                    pts.append(key)
                else:
                    xy = A[r] if at == 0.0 else B[r]
                    pts.append(edge_key(int(piece[r]), int(e), xy))
            segs.append(pts)
    idx = {}
    rows, cols, loose = [], [], 0
    for s_id, pts in enumerate(segs):
        for key in pts:
            if key is None:
                continue
            idx.setdefault(key, len(idx))
            rows.append(s_id)
            cols.append(idx[key])
    if not segs:
        return 0, 0
    deg = np.bincount(cols, minlength=len(idx)) if cols else np.zeros(0, int)
    loose = int(np.sum(deg % 2 == 1))
    n = len(segs)
    A = coo_matrix((np.ones(len(rows)), (rows, np.array(cols) + n)), shape=(n + len(idx), n + len(idx)))
    ncomp, lab = connected_components(A, directed=False)
    used = np.unique(lab[:n])
    return int(len(used)), loose


def _critical_count(values, mesh):
    f = perturb_to_morse(PLFunction(mesh, values), 1e-12)
    return len(classify_critical(f, check=False))


def homotopy_sweepouts(
    f0: PLFunction,
    f1: PLFunction,
    epsilon: float,
    n_s: int = 64,
    n_x: int = 64,
    L: float | None = None,
    metric_path=None,
) -> FunctionPath:
    """Join two sweepouts by ``f_s = min(f1 + 1 - s, f0 + s)`` and audit it.

    Parameters
    ----------
    f0, f1 : PLFunction
        Functions on the same mesh; they are normalized onto ``[0, 1]``.
    epsilon : float
        Slack added to ``2 L`` in the audited bound.
    n_s, n_x : int
        Audit grid sizes in the homotopy parameter and in the level.
    L : float, optional
        Common fiber bound of ``f0`` and ``f1``; measured when omitted.
    metric_path : callable, optional
        ``s -> TriMesh`` giving the metric used to measure ``f_s``.

    Raises
    ------
    ValueError
        When the functions live on different meshes.
    MorseError
        When both share a critical vertex with equal value.
    """
    if f0.mesh.n_vertices != f1.mesh.n_vertices or not np.array_equal(f0.mesh.faces, f1.mesh.faces):
        raise ValueError("both functions must live on the same mesh")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    g0, g1 = unit_function(f0), unit_function(f1)
    if L is None:
        L = max(max_fiber_length(g0)[0], max_fiber_length(g1)[0])
    grid = np.linspace(0.0, 1.0, n_s)
    lengths = np.zeros((n_s, n_x))
    levels = np.zeros((n_s, n_x))
    counts = []
    pc_fixed = None if metric_path is not None else _Pieces(g0.mesh, g0, g1)
    for i, s in enumerate(grid):
        pc = pc_fixed if pc_fixed is not None else _Pieces(metric_path(s), g0.with_mesh(metric_path(s)), g1.with_mesh(metric_path(s)))
        vals = np.minimum(pc.vals[:, :, 1] + (1.0 - s), pc.vals[:, :, 0] + s)
        xs = np.linspace(vals.min(), vals.max(), n_x)
        levels[i] = xs
        lengths[i] = _level_lengths(pc, s, xs)
        if g0.period is None and g1.period is None:
            counts.append(_critical_count(np.minimum(g1.values + (1.0 - s), g0.values + s), g0.mesh))
    j = np.unravel_index(int(np.argmax(lengths)), lengths.shape)
    cusps = [float(grid[i + 1]) for i in range(len(counts) - 1) if counts[i] != counts[i + 1]]
    path = FunctionPath(
        grid=grid,
        f0=g0,
        f1=g1,
        fiber_bound=float(lengths[j]),
        argmax=(float(grid[j[0]]), float(levels[j])),
        lengths=lengths,
        levels=levels,
        cusp_parameters=cusps,
        bound=2 * L + epsilon,
        epsilon=epsilon,
    )
    log.info("homotopy: max fiber %.6g against %.6g", path.fiber_bound, path.bound)
    return path


# -- families of metrics -------------------------------------------------------------


def _face_areas(mesh: TriMesh, lengths):
    """Heron areas straight from edge lengths (zero for collapsed slices)."""
    L = np.asarray(lengths, float)[mesh.face_edges]
    a, b, c = np.sort(L, axis=1).T[::-1]
    q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(q, 0.0))


@dataclass
class MetricFamily:
    """Edge lengths on fixed combinatorics, linear in ``t`` between keyframes.

    Parameters
    ----------
    mesh : TriMesh
    keys : array_like
        Keyframe parameters, increasing from 0 to 1.
    lengths : array_like (n_keys, n_edges)
    area_bound : float, optional
        Upper bound ``A`` for the slice areas (measured when omitted).
    """

    mesh: TriMesh
    keys: np.ndarray
    lengths: np.ndarray = field(repr=False)
    area_bound: float | None = None

    def __post_init__(self):
        self.keys = np.asarray(self.keys, float)
        self.lengths = np.atleast_2d(np.asarray(self.lengths, float))
        if self.lengths.shape != (len(self.keys), self.mesh.n_edges):
            raise ValueError("need one length vector per keyframe")
        if self.keys[0] != 0.0 or self.keys[-1] != 1.0 or np.any(np.diff(self.keys) <= 0):
            raise ValueError("keyframes must increase from 0 to 1")
        for L in self.lengths:
            self.mesh.with_lengths(L)  # raises on broken triangle inequalities
        sampled = max(self.area_at(t) for t in np.union1d(self.keys, np.linspace(0, 1, 33)))
        if self.area_bound is None:
            self.area_bound = sampled
        elif self.area_bound < sampled * (1 - 1e-12):
            raise ValueError(f"area bound {self.area_bound:.6g} is below a slice area {sampled:.6g}")

    @classmethod
    def constant(cls, mesh: TriMesh):
        return cls(mesh, [0.0, 1.0], np.stack([mesh.lengths, mesh.lengths]))

    @classmethod
    def between(cls, a: TriMesh, b: TriMesh):
        """Linear interpolation of edge lengths from ``a`` to ``b``."""
        if not np.array_equal(a.faces, b.faces):
            raise ValueError("meshes must share their combinatorics")
        return cls(a, [0.0, 1.0], np.stack([a.lengths, b.lengths]))

    @property
    def genus(self):
        return genus(self.mesh)

    def lengths_at(self, t: float) -> np.ndarray:
        t = float(np.clip(t, 0.0, 1.0))
        i = min(int(np.searchsorted(self.keys, t, side="right")) - 1, len(self.keys) - 2)
        w = (t - self.keys[i]) / (self.keys[i + 1] - self.keys[i])
        if w == 0.0:
            return self.lengths[i].copy()
        if w == 1.0:
            return self.lengths[i + 1].copy()
        return (1 - w) * self.lengths[i] + w * self.lengths[i + 1]

    def mesh_at(self, t: float) -> TriMesh:
        return self.mesh.with_lengths(self.lengths_at(t))

    def area_at(self, t: float) -> float:
        return float(_face_areas(self.mesh, self.lengths_at(t)).sum())

    def scaled(self, lam: float) -> "MetricFamily":
        A = None if self.area_bound is None else self.area_bound * lam * lam
        return MetricFamily(self.mesh, self.keys, self.lengths * lam, A)


def _stretch(family: MetricFamily, ta: float, tb: float) -> float:
    """Largest edgewise log-stretch from ``ta`` to any ``u`` in ``(ta, tb]``.

    Lengths are linear between keyframes, so each log-ratio is monotone
    there and the maximum sits at a keyframe or at ``tb``.
    """
    la = family.lengths_at(ta)
    us = [u for u in family.keys if ta < u < tb] + [tb]
    return max(float(np.max(np.abs(np.log(family.lengths_at(u) / la)))) for u in us)


def subdivide_metric_family(family: MetricFamily, epsilon: float) -> np.ndarray:
    """Grid ``0 = t_0 < ... < t_n = 1`` whose adjacent slices are edgewise
    ``(1 + epsilon)``-bilipschitz: ``max_e |log(l_b / l_a)| <= log(1 + epsilon)``.

    Each step goes as far as possible (bisection on the stretch).

    Raises
    ------
    ValueError
        When no step of positive length fits (a jump in the family).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    target = math.log1p(epsilon)
    grid = [0.0]
    t = 0.0
    while t < 1.0:
        if _stretch(family, t, 1.0) <= target:
            grid.append(1.0)
            break
        lo, hi = t, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _stretch(family, t, mid) <= target:
                lo = mid
            else:
                hi = mid
        if lo - t <= 1e-12:
            raise ValueError(f"metric family jumps near t = {t:.6g}; no finite subdivision")
        grid.append(lo)
        t = lo
    grid = np.array(grid)
    for a, b in zip(grid[:-1], grid[1:]):
        assert _stretch(family, a, b) <= target
    return grid


@dataclass
class ParametricCertificate:
    """Audit of a sweepout family over a family of metrics."""

    grid: np.ndarray
    nodes: list
    intervals: list
    max_fiber: float
    argmax: tuple
    area_bound: float
    genus: int
    epsilon: float
    runtime: float = 0.0
    functions: list = field(default_factory=list, repr=False)

    @property
    def theorem_bound(self):
        return THEOREM_CONSTANT * math.sqrt((self.genus + 1) * self.area_bound)

    @property
    def composite_bound(self):
        from .sweepout import SWEEP_CONSTANT

        return 2 * (1 + self.epsilon) * SWEEP_CONSTANT * math.sqrt((self.genus + 1) * self.area_bound) + self.epsilon

    @property
    def ok(self):
        return self.max_fiber <= min(self.theorem_bound, self.composite_bound) and all(n["ok"] for n in self.nodes)

    def to_json(self):
        return {
            "grid": self.grid.tolist(),
            "nodes": self.nodes,
            "intervals": self.intervals,
            "max_fiber": self.max_fiber,
            "argmax": {"t": self.argmax[0], "x": self.argmax[1]},
            "area_bound": self.area_bound,
            "genus": self.genus,
            "epsilon": self.epsilon,
            "composite_bound": self.composite_bound,
            "theorem_bound": self.theorem_bound,
            "ok": self.ok,
            "runtime": self.runtime,
        }


def _sweep_mesh(mesh):
    # the mesh build_sweepout puts its function on
    if len(mesh.boundary_edges):
        mesh = cap_boundary(mesh, 1e-6 * mesh.area).mesh
    return barycentric_subdivision(mesh).mesh


def _shape_key(lengths):
    return np.round(lengths / lengths.max(), 12).tobytes()


def _homothetic_interval(family: MetricFamily, ta, tb):
    us = [ta] + [u for u in family.keys if ta < u < tb] + [tb]
    return len({_shape_key(family.lengths_at(u)) for u in us}) == 1


def parametric_sweepout(
    family: MetricFamily,
    epsilon: float = 0.05,
    delta: float = 1e-6,
    n_s: int = 9,
    n_x: int = 33,
    workers: int = 1,
) -> ParametricCertificate:
    """Sweepouts of every slice of ``family`` with short fibers throughout.

    A sweepout is built at every node of the bilipschitz grid; adjacent
    nodes are joined by :func:`homotopy_sweepouts`, measured in the metric
    interpolated along the interval.

    Nodes whose metric is a homothety of an earlier node reuse that node's
    function (the construction is scale-equivariant); its fibers are
    re-measured in the new metric.

    Raises
    ------
    ValueError
        When an audited fiber exceeds the theorem bound; the message names
        ``(t, x)``.
    """
    import time

    from .sweepout import build_sweepout, sweep_bound

    t0 = time.perf_counter()
    grid = subdivide_metric_family(family, epsilon)
    gamma = family.genus
    A = family.area_bound
    built: dict = {}

    def node(t):
        mesh_t = family.mesh_at(t)
        key = _shape_key(mesh_t.lengths)
        if key in built:
            f0, scale0 = built[key]
            f = f0.with_mesh(scale_metric(f0.mesh, mesh_t.lengths.max() / scale0))
            mf = max_fiber_length(f)[0]
            reused = True
        else:
            cert = build_sweepout(mesh_t, delta=delta)
            f, mf, reused = cert.function, cert.max_fiber, False
            built[key] = (f, mesh_t.lengths.max())
        bound = sweep_bound(mesh_t.area, gamma, 0.0, delta)
        return f, {"t": float(t), "max_fiber": float(mf), "bound": bound, "reused": reused, "ok": bool(mf <= bound)}

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(node, grid))
    else:
        results = [node(t) for t in grid]
    funcs = [r[0] for r in results]
    nodes = [r[1] for r in results]

    intervals = []
    best, arg = max((n["max_fiber"], (n["t"], float("nan"))) for n in nodes)
    theorem = THEOREM_CONSTANT * math.sqrt((gamma + 1) * A)
    for i in range(len(grid) - 1):
        ta, tb = grid[i], grid[i + 1]

        def metric(s, ta=ta, tb=tb):
            return _sweep_mesh(family.mesh_at(ta + s * (tb - ta)))

        L = max(nodes[i]["max_fiber"], nodes[i + 1]["max_fiber"])
        if _homothetic_interval(family, ta, tb) and np.array_equal(funcs[i].values, funcs[i + 1].values):
            # f_s = f + min(s, 1 - s) has the fibers of f, and the metric is a
            # multiple of the endpoint metric that is linear in t: the
            # sup over the interval is attained at an end
            j = i if nodes[i]["max_fiber"] >= nodes[i + 1]["max_fiber"] else i + 1
            intervals.append(
                {
                    "t_a": float(ta),
                    "t_b": float(tb),
                    "max_fiber": L,
                    "argmax": {"t": float(grid[j]), "x": float("nan")},
                    "bound": 2 * (1 + epsilon) * L + epsilon * L,
                    "ok": True,
                    "exact": True,
                }
            )
            continue
        path = homotopy_sweepouts(funcs[i], funcs[i + 1], epsilon * L, n_s=n_s, n_x=n_x, L=(1 + epsilon) * L, metric_path=metric)
        s_at, x_at = path.argmax
        t_at = float(ta + s_at * (tb - ta))
        intervals.append(
            {
                "t_a": float(ta),
                "t_b": float(tb),
                "max_fiber": path.fiber_bound,
                "argmax": {"t": t_at, "x": x_at},
                "bound": path.bound,
                "ok": path.ok,
            }
        )
        if path.fiber_bound > best:
            best, arg = path.fiber_bound, (t_at, x_at)
        if path.fiber_bound > theorem:
            raise BoundViolation(f"fiber of length {path.fiber_bound:.6g} at (t, x) = ({t_at:.6g}, {x_at:.6g}) exceeds {theorem:.6g}")
    cert = ParametricCertificate(grid, nodes, intervals, float(best), arg, float(A), gamma, float(epsilon))
    cert.runtime = time.perf_counter() - t0
    cert.functions = funcs
    log.info("parametric: %d nodes, max fiber %.6g, bound %.6g", len(grid), best, cert.theorem_bound)
    return cert


# -- three-manifold assembly ---------------------------------------------------------


@dataclass
class HeegaardFamily:
    """Surfaces ``Σ_t`` (``t`` in ``[-1, 1]``) sweeping a 3-manifold.

    ``lengths[i]`` is the metric of slice ``i`` on the common mesh and
    ``slab[i] > 0`` its thickness weight, so that the volume is the
    trapezoid integral of ``Area(Σ_t) · slab(t)``.  Slices may collapse
    (zero lengths) at the ends.
    """

    mesh: TriMesh
    ts: np.ndarray
    lengths: np.ndarray = field(repr=False)
    slab: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.ts = np.asarray(self.ts, float)
        self.lengths = np.asarray(self.lengths, float)
        self.slab = np.asarray(self.slab, float)
        if len(self.ts) < 2:
            raise ValueError("at least two slices are needed to integrate the volume")
        if np.any(np.diff(self.ts) <= 0) or self.ts[0] < -1 or self.ts[-1] > 1:
            raise ValueError("slice parameters must increase within [-1, 1]")
        if self.lengths.shape != (len(self.ts), self.mesh.n_edges) or self.slab.shape != self.ts.shape:
            raise ValueError("need one metric and one slab weight per slice")
        if not np.all(np.isfinite(self.slab)) or np.any(self.slab <= 0):
            raise ValueError("slab weights must be positive")
        if np.any(self.lengths < 0):
            raise ValueError("edge lengths must be non-negative")
        g = genus(self.mesh)
        if g > 3:
            warnings.warn(f"slice genus {g} is above 3", stacklevel=2)

    @property
    def genus(self):
        return genus(self.mesh)

    def areas(self):
        return np.array([_face_areas(self.mesh, L).sum() for L in self.lengths])

    @property
    def volume(self):
        y = self.areas() * self.slab
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(self.ts)))

    def scaled(self, lam: float) -> "HeegaardFamily":
        return HeegaardFamily(self.mesh, self.ts, self.lengths * lam, self.slab * lam)


def round_s3_family(level: int = 2, n: int = 33) -> HeegaardFamily:
    """Round unit 3-sphere swept by 2-spheres of radius ``sin θ``, ``θ = (t + 1) π / 2``."""
    from .generators import icosphere

    base = icosphere(level)
    ts = np.linspace(-1.0, 1.0, n)
    theta = (ts + 1) * np.pi / 2
    r = np.sin(theta)
    r[[0, -1]] = 0.0
    return HeegaardFamily(base, ts, r[:, None] * base.lengths[None], np.full(n, np.pi / 2))


def long_ellipsoid_family(elongation: float, level: int = 2, n: int = 33) -> HeegaardFamily:
    """Boundary of the 4-ellipsoid with axes ``(e, 1, 1, 1)`` swept along its long axis.

    Slices are round spheres of radius ``sin θ``; the slab weight is the speed
    of the meridian ``(e cos θ, sin θ)``, which makes the volume integral
    exact for this hypersurface of revolution.
    """
    h = round_s3_family(level, n)
    theta = (h.ts + 1) * np.pi / 2
    speed = np.sqrt((elongation * np.sin(theta)) ** 2 + np.cos(theta) ** 2)
    return HeegaardFamily(h.mesh, h.ts, h.lengths, speed * np.pi / 2)


@dataclass
class ThreeManifoldCertificate:
    Lambda_max: float
    volume: float
    C_real: float
    clamp: tuple
    genus: int
    parametric: ParametricCertificate
    slice_ts: np.ndarray
    fiber_table: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    tolerances: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "certificate": {
                "Lambda_max": self.Lambda_max,
                "Vol": self.volume,
                "C_real": self.C_real,
                "tolerances": self.tolerances,
            },
            "clamp": list(self.clamp),
            "genus": self.genus,
            "family": {
                "t": self.slice_ts.tolist(),
                "x": self.levels.tolist(),
                "fiber_lengths": self.fiber_table.tolist(),
            },
            "parametric": self.parametric.to_json(),
        }


def assemble_three_manifold(
    h: HeegaardFamily,
    epsilon: float = 0.05,
    clamp: float = 1e-4,
    delta: float = 1e-6,
    n_s: int = 5,
    n_x: int = 33,
    workers: int = 1,
) -> ThreeManifoldCertificate:
    """Two-parameter family of fibers over the slices of ``h``.

    Slices with area below ``clamp`` times the largest slice area are
    treated as graphs swept by points (zero-length fibers).  The remaining
    slices form a metric family swept by :func:`parametric_sweepout`.

    Returns the longest fiber ``Λ_max``, the volume and ``C_real = Λ_max / Vol^(1/3)``.
    """
    from .morse import fiber_length

    areas = h.areas()
    keep = np.flatnonzero(areas >= clamp * areas.max())
    i0, i1 = int(keep[0]), int(keep[-1])
    ts = h.ts[i0 : i1 + 1]
    if len(ts) == 1:
        fam = MetricFamily.constant(h.mesh.with_lengths(h.lengths[i0]))
    else:
        keys = (ts - ts[0]) / (ts[-1] - ts[0])
        keys[-1] = 1.0
        fam = MetricFamily(h.mesh, keys, h.lengths[i0 : i1 + 1])
    cert = parametric_sweepout(fam, epsilon, delta, n_s=n_s, n_x=n_x, workers=workers)
    vol = h.volume
    lam = cert.max_fiber
    levels = np.linspace(0.0, 1.0, n_x)
    table = np.zeros((len(h.ts), n_x))
    for i in range(i0, i1 + 1):
        u = (h.ts[i] - ts[0]) / (ts[-1] - ts[0]) if len(ts) > 1 else 0.0
        j = int(np.argmin(np.abs(cert.grid - u)))
        mesh_i = barycentric_subdivision(h.mesh.with_lengths(h.lengths[i])).mesh
        f = cert.functions[j].with_mesh(mesh_i)
        table[i] = [fiber_length(f, x) for x in levels]
    out = ThreeManifoldCertificate(
        Lambda_max=lam,
        volume=vol,
        C_real=lam / vol ** (1 / 3),
        clamp=(float(h.ts[i0]), float(h.ts[i1])),
        genus=h.genus,
        parametric=cert,
        slice_ts=h.ts,
        fiber_table=table,
        levels=levels,
        tolerances={"epsilon": epsilon, "clamp": clamp, "delta": delta},
    )
    log.info("assembly: Lambda_max %.6g, Vol %.6g, C_real %.6g", lam, vol, out.C_real)
    return out
