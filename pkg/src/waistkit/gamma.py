"""Tuples of parameterized curves and families of them.

A :class:`LoopTuple` holds ``k`` curves sampled at ``N + 1`` parameter values
with constant speed.  The distance between two tuples is

    max_{i, t} d(gamma_i(t), eta_i(t)) + sum_i sqrt( int |gamma_i' - eta_i'|^2 dt ),

minimized over relabelling of the curves and over the re-parameterizations
that leave closed curves unchanged as sets (cyclic shifts by a whole sample
and reversal).  Minimizing over a group acting isometrically keeps the
triangle inequality.

Points are compared by their ambient distance when the mesh has an
embedding.  Without one, points are snapped to the nearest vertex and
compared by graph distance, and the derivative term is replaced by the
length gap ``|L_i - L'_i|``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .curves import PolyCurve
from .mesh import TriMesh
from .morse import MorseError, PLFunction, band_areas, classify_critical, level_set

__all__ = [
    "SampledCurve",
    "LoopTuple",
    "GammaFamily",
    "gamma_distance",
    "morse_to_gamma",
    "almgren_degree",
    "continuity_modulus",
    "resample",
    "from_points",
    "constant_curve",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 256
_EXACT_MATCHING_MAX_K = 6


@dataclass(frozen=True)
class SampledCurve:
    """Constant-speed samples of one curve.

    Attributes
    ----------
    pos : ndarray (n, 3) or None
        Ambient positions (None for meshes without embedding).
    near : ndarray (n,)
        Nearest mesh vertex per sample (-1 when no mesh is attached).
    length : float
        Length of the curve (intrinsic when on a mesh, else polyline length).
    closed : bool
    source : PolyCurve, optional
        The mesh curve the samples were taken from, when there is one.
    """

    pos: np.ndarray | None = field(repr=False)
    near: np.ndarray = field(repr=False)
    length: float
    closed: bool
    source: PolyCurve | None = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return len(self.near)

    @property
    def start(self):
        return self._point(0)

    @property
    def end(self):
        return self._point(-1)

    def _point(self, i):
        if self.pos is not None:
            return tuple(np.round(self.pos[i], 12))
        return int(self.near[i])

    @property
    def is_constant(self):
        return self.length == 0.0

    def derivative(self):
        """Piecewise-constant derivative of the sampled polyline in parameter ``t``."""
        return np.diff(self.pos, axis=0) * (self.n - 1)


def _resample_arrays(cum, pos, near, n):
    """Resample by arclength ``cum`` (non-decreasing) at ``n`` equally spaced values."""
    L = cum[-1]
    if L <= 0:
        p = None if pos is None else np.repeat(pos[:1], n, axis=0)
        return p, np.repeat(near[:1], n)
    s = np.linspace(0.0, L, n)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    seg = cum[idx + 1] - cum[idx]
    tau = np.divide(s - cum[idx], seg, out=np.zeros_like(s), where=seg > 0)
    p = None if pos is None else pos[idx] + tau[:, None] * (pos[idx + 1] - pos[idx])
    nr = np.where(tau < 0.5, near[idx], near[idx + 1])
    # endpoints are kept bit-exact so that arcs cut from one curve close up as 0-chains
    if p is not None:
        p[0], p[-1] = pos[0], pos[-1]
    nr[0], nr[-1] = near[0], near[-1]
    return p, nr


def _nearest_vertex(verts, weights):
    return verts[np.arange(len(verts)), np.argmax(weights, axis=1)]


def resample(curve: PolyCurve, n: int = DEFAULT_SAMPLES + 1) -> SampledCurve:
    """Constant-speed samples of a mesh curve (by intrinsic arclength)."""
    seg = curve.segment_lengths()
    cum = np.r_[0.0, np.cumsum(seg)]
    pos = curve.points3d() if curve.mesh.embedding is not None else None
    near = _nearest_vertex(curve.verts, curve.weights)
    if len(cum) == 1:
        cum = np.r_[0.0, 0.0]
        pos = None if pos is None else np.repeat(pos, 2, axis=0)
        near = np.repeat(near, 2)
    p, nr = _resample_arrays(cum, pos, near, n)
    return SampledCurve(p, nr, float(cum[-1]), bool(curve.closed), curve)


def constant_curve(point, n: int = DEFAULT_SAMPLES + 1, near: int = -1) -> SampledCurve:
    pos = None if point is None else np.repeat(np.asarray(point, float).reshape(1, 3), n, axis=0)
    return SampledCurve(pos, np.full(n, near), 0.0, True)


def from_points(points, closed=True, n: int = DEFAULT_SAMPLES + 1) -> SampledCurve:
    """Constant-speed samples of a polyline given by ambient points."""
    P = np.asarray(points, float)
    if closed and not np.allclose(P[0], P[-1]):
        P = np.vstack([P, P[:1]])
    cum = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))]
    p, nr = _resample_arrays(cum, P, np.full(len(P), -1), n)
    return SampledCurve(p, nr, float(cum[-1]), closed)


def sub_arc(c: SampledCurve, s0: float, s1: float, n: int | None = None) -> SampledCurve:
    """Arc of a closed sampled curve between arclength positions ``s0`` and ``s1``
    (taken forward, wrapping around)."""
    n = n or c.n
    L = c.length
    if L == 0:
        return c
    m = c.n - 1
    cum = np.linspace(0.0, L, c.n)
    if s1 < s0:
        s1 += L
    # unroll one period so arcs may wrap
    cum2 = np.r_[cum, L + cum[1:]]
    pos2 = None if c.pos is None else np.vstack([c.pos, c.pos[1:]])
    near2 = np.r_[c.near, c.near[1:]]
    i0 = int(np.searchsorted(cum2, s0, side="right") - 1)
    i1 = int(np.searchsorted(cum2, s1, side="left"))
    i1 = min(max(i1, i0 + 1), len(cum2) - 1)

    def at(s):
        j = min(max(int(np.searchsorted(cum2, s, side="right") - 1), 0), len(cum2) - 2)
        tau = (s - cum2[j]) / (cum2[j + 1] - cum2[j])
        p = None if pos2 is None else pos2[j] + tau * (pos2[j + 1] - pos2[j])
        return p, near2[j] if tau < 0.5 else near2[j + 1]

    pa, na = at(s0)
    pb, nb = at(s1)
    inner = np.arange(i0 + 1, i1)
    inner = inner[(cum2[inner] > s0) & (cum2[inner] < s1)]
    cc = np.r_[s0, cum2[inner], s1] - s0
    pp = None if pos2 is None else np.vstack([pa, pos2[inner], pb])
    nn = np.r_[na, near2[inner], nb]
    p, nr = _resample_arrays(cc, pp, nn, n)
    del m
    return SampledCurve(p, nr, float(s1 - s0), False)


def concat(a: SampledCurve, b: SampledCurve, n: int | None = None, closed=False) -> SampledCurve:
    """Traverse ``a`` then ``b`` (end of ``a`` should meet the start of ``b``)."""
    n = n or a.n
    ca = np.linspace(0, a.length, a.n)
    cb = a.length + np.linspace(0, b.length, b.n)
    cum = np.r_[ca, cb[1:]]
    pos = None if a.pos is None else np.vstack([a.pos, b.pos[1:]])
    near = np.r_[a.near, b.near[1:]]
    p, nr = _resample_arrays(cum, pos, near, n)
    return SampledCurve(p, nr, a.length + b.length, closed)


@dataclass(frozen=True)
class LoopTuple:
    """``k`` sampled curves on a common mesh (or in space when ``mesh`` is None)."""

    curves: tuple
    mesh: TriMesh | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        ns = {c.n for c in self.curves}
        if len(ns) > 1:
            raise ValueError("all curves in a tuple need the same sample count")

    @property
    def k(self):
        return len(self.curves)

    @property
    def length(self):
        return float(sum(c.length for c in self.curves))

    @property
    def embedded(self):
        return all(c.pos is not None for c in self.curves)

    def closure_defect(self):
        """Starts minus ends as 0-chains: empty when the tuple closes up."""
        from collections import Counter

        starts = Counter(c.start for c in self.curves)
        ends = Counter(c.end for c in self.curves)
        return (starts - ends) + (ends - starts)

    def to_json(self):
        out = []
        for c in self.curves:
            d = {"closed": c.closed, "length": c.length}
            if c.pos is not None:
                d["points"] = np.round(c.pos, 12).tolist()
            else:
                d["vertices"] = c.near.tolist()
            out.append(d)
        return {"k": self.k, "curves": out}


# -- distance --------------------------------------------------------------------------


class _VertexMetric:
    """Graph distances between mesh vertices, computed lazily per source row."""

    def __init__(self, mesh: TriMesh, m: int = 2):
        from .paths import vertex_distances

        self._vd = vertex_distances
        self.mesh, self.m = mesh, m
        self.rows = {}

    def matrix(self, a, b):
        """Distances ``D[i, j] = d(a[i], b[j])``."""
        ua, inv = np.unique(a, return_inverse=True)
        need = [int(v) for v in ua if int(v) not in self.rows]
        if need:
            D = self._vd(self.mesh, need, self.m)
            for v, row in zip(need, D):
                self.rows[v] = row
        rows = np.stack([self.rows[int(v)] for v in ua])
        return rows[inv][:, np.asarray(b)]


_METRICS: dict = {}


def _vertex_metric(mesh):
    key = id(mesh)
    if key not in _METRICS or _METRICS[key][0] is not mesh:
        _METRICS.clear()
        _METRICS[key] = (mesh, _VertexMetric(mesh))
    return _METRICS[key][1]


def _variants(a: SampledCurve, b: SampledCurve):
    """Index arrays for the re-parameterizations of ``b`` compared against ``a``.

    Cyclic shifts and reversal are only used when both curves are closed,
    since they then act on the pair simultaneously.
    """
    n = b.n
    if not (a.closed and b.closed) or a.is_constant or b.is_constant:
        return np.arange(n)[None]
    m = n - 1
    base = np.arange(n) % m
    s = np.arange(m)[:, None]
    return np.concatenate([(base[None] + s) % m, (s - base[None]) % m])


def _key(c: SampledCurve):
    arr = c.pos if c.pos is not None else c.near
    return (c.closed, c.length, arr.tobytes())


def _pair_cost(a: SampledCurve, b: SampledCurve, metric=None):
    """(sup-distance, derivative gap) for the best re-parameterization of ``b``.

    The pair is put in a canonical order first so the result is exactly
    symmetric.
    """
    swap = _key(b) < _key(a)
    if swap:
        a, b = b, a
    idx = _variants(a, b)
    if a.pos is not None and b.pos is not None:
        bp = b.pos[idx]  # (V, n, 3)
        sup = np.linalg.norm(bp - a.pos[None], axis=2).max(axis=1)
        da = np.diff(a.pos, axis=0)
        db = np.diff(bp, axis=1)
        n = a.n - 1
        # the polyline derivative is n * delta on each of n intervals of width 1/n
        der = np.sqrt(n * ((db - da[None]) ** 2).sum(axis=(1, 2)))
    else:
        M = metric.matrix(a.near, b.near)
        sup = M[np.arange(a.n)[None], idx].max(axis=1)
        der = np.full(len(idx), abs(a.length - b.length))
    j = int(np.argmin(sup + der))
    return float(sup[j]), float(der[j])


def align(prev: SampledCurve, cur: SampledCurve, metric=None) -> SampledCurve:
    """Rotate and/or reverse a closed ``cur`` so its samples best follow ``prev``."""
    if not cur.closed or cur.is_constant or prev.is_constant:
        return cur
    m = cur.n - 1
    base = np.arange(cur.n) % m
    s = np.arange(m)[:, None]
    idx = np.concatenate([(base[None] + s) % m, (s - base[None]) % m])
    if prev.pos is not None and cur.pos is not None:
        cp = cur.pos[idx]
        cost = np.linalg.norm(cp - prev.pos[None], axis=2).max(axis=1)
        cost = cost + np.sqrt(m * ((np.diff(cp, axis=1) - np.diff(prev.pos, axis=0)[None]) ** 2).sum(axis=(1, 2)))
    else:
        cost = metric.matrix(prev.near, cur.near)[np.arange(cur.n)[None], idx].max(axis=1)
    v = idx[int(np.argmin(cost))]
    return SampledCurve(None if cur.pos is None else cur.pos[v], cur.near[v], cur.length, True, cur.source)


def _metric_for(a: LoopTuple, b: LoopTuple):
    if a.embedded:
        return None
    mesh = a.mesh if a.mesh is not None else b.mesh
    if mesh is None:
        raise ValueError("unembedded tuples need a mesh for point distances")
    return _vertex_metric(mesh)


def _cost_matrices(a: LoopTuple, b: LoopTuple):
    metric = _metric_for(a, b)
    k = a.k
    sup = np.zeros((k, k))
    der = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            sup[i, j], der[i, j] = _pair_cost(a.curves[i], b.curves[j], metric)
    return sup, der


def gamma_distance(a: LoopTuple, b: LoopTuple) -> float:
    """Distance between two tuples with equal ``k``.

    Raises
    ------
    ValueError
        When the tuples have different sizes.
    """
    if a.k != b.k:
        raise ValueError(f"tuples have different sizes ({a.k} and {b.k})")
    if a.k == 0:
        return 0.0
    if a.embedded != b.embedded:
        raise ValueError("cannot compare embedded and unembedded tuples")
    k = a.k
    sup, der = _cost_matrices(a, b)
    if k <= _EXACT_MATCHING_MAX_K:
        best = math.inf
        for perm in itertools.permutations(range(k)):
            p = list(perm)
            # summing in sorted order keeps d(a, b) == d(b, a) bit for bit
            val = sup[range(k), p].max() + np.sort(der[range(k), p]).sum()
            best = min(best, val)
        return float(best)
    r, c = linear_sum_assignment(sup + der)
    return float(sup[r, c].max() + np.sort(der[r, c]).sum())


# -- families --------------------------------------------------------------------------

EVENT_KINDS = ("create", "destroy", "split", "merge")


@dataclass(frozen=True)
class GammaFamily:
    """Tuples on a sorted parameter grid in ``[0, 1]``.

    ``levels`` and ``fillings`` are present for families swept out by a
    function: ``fillings[i]`` is the area between ``levels[i]`` and
    ``levels[i + 1]``.  ``phases`` labels each tuple (``level``, ``move``,
    ``rotate`` or ``grow``).
    """

    params: np.ndarray
    tuples: tuple
    events: tuple = ()
    levels: np.ndarray | None = None
    fillings: np.ndarray | None = None
    area: float | None = None
    phases: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, float))
        object.__setattr__(self, "tuples", tuple(self.tuples))
        object.__setattr__(self, "events", tuple(self.events))
        if len(self.params) != len(self.tuples):
            raise ValueError("one tuple per parameter value is needed")
        if np.any(np.diff(self.params) < 0):
            raise ValueError("parameters must be sorted")
        if len({t.k for t in self.tuples}) > 1:
            raise ValueError("tuple size must be constant along a family")

    @classmethod
    def constant(cls, tup: LoopTuple, params):
        params = np.asarray(params, float)
        return cls(params, [tup] * len(params), fillings=np.zeros(len(params) - 1))

    @property
    def k(self):
        return self.tuples[0].k if self.tuples else 0

    def lengths(self):
        return np.array([t.length for t in self.tuples])

    def counts(self):
        return np.array([sum(not c.is_constant for c in t.curves) for t in self.tuples])

    def csv_rows(self):
        return [(float(t), float(L), int(c)) for t, L, c in zip(self.params, self.lengths(), self.counts())]

    def to_json(self, with_tuples=True):
        out = {
            "k": self.k,
            "grid": self.params.tolist(),
            "events": [[float(t), kind] for t, kind in self.events],
        }
        if with_tuples:
            out["tuples"] = [t.to_json() for t in self.tuples]
        return out


def continuity_modulus(family: GammaFamily) -> float:
    """Largest distance between tuples at adjacent grid points."""
    T = family.tuples
    return max((gamma_distance(a, b) for a, b in zip(T[:-1], T[1:])), default=0.0)


def almgren_degree(family: GammaFamily) -> float:
    """Total area swept by the family relative to the area of the surface.

    Raises
    ------
    ValueError
        When the family carries no filling data.
    """
    if family.fillings is None:
        raise ValueError("family has no filling data")
    if not len(family.fillings) or not np.any(family.fillings):
        return 0.0
    if not family.area:
        raise ValueError("family has no surface area")
    return float(np.sum(family.fillings) / family.area)


# -- Morse function to family ----------------------------------------------------------


def _auto_grid(crit_t, n_levels):
    t = np.linspace(0.0, 1.0, max(int(n_levels), 2))
    inner = crit_t[(crit_t > 0) & (crit_t < 1)]
    keep = ~np.isin(t, inner)
    t = t[keep]
    while True:
        cell = np.searchsorted(t, inner, side="right")
        dup = np.flatnonzero(np.diff(cell) == 0)
        if not len(dup):
            return t
        mids = (inner[dup] + inner[dup + 1]) / 2
        t = np.union1d(t, mids)


def _check_grid(t, crit_t, crit):
    on = np.isin(crit_t, t[1:-1])
    if np.any(on):
        v = crit[int(np.flatnonzero(on)[0])][0]
        raise MorseError(f"grid point lies on the critical value at vertex {v}")
    inner = np.flatnonzero((crit_t > t[0]) & (crit_t < t[-1]))
    cell = np.searchsorted(t, crit_t[inner], side="right")
    for a, b in zip(inner[:-1], inner[1:]):
        if cell[a - inner[0]] == cell[b - inner[0]]:
            va, vb = crit[a][0], crit[b][0]
            raise MorseError(
                f"grid too coarse to separate the critical values at vertices {va} and {vb} "
                f"(parameters {crit_t[a]:.6g} and {crit_t[b]:.6g})"
            )


class _Builder:
    """Sequential stitching of level-set tuples into one family."""

    def __init__(self, mesh, samples):
        self.mesh = mesh
        self.n = samples + 1
        self.metric = None if mesh.embedding is not None else _vertex_metric(mesh)
        self.params, self.tuples, self.phases = [], [], []
        self.step = mesh.median_edge

    def emit(self, t, slots, phase):
        self.params.append(float(t))
        self.tuples.append(LoopTuple(list(slots), self.mesh))
        self.phases.append(phase)

    def point(self, c: SampledCurve, i):
        return (None if c.pos is None else c.pos[i], int(c.near[i]))

    def vertex_point(self, v):
        X = self.mesh.embedding
        return (None if X is None else X[v], int(v))

    def const(self, pt):
        return constant_curve(pt[0], self.n, pt[1]) if pt[0] is not None else SampledCurve(None, np.full(self.n, pt[1]), 0.0, True)

    def dist(self, pa, pb):
        if pa[0] is not None:
            return float(np.linalg.norm(pa[0] - pb[0]))
        return float(self.metric.matrix([pa[1]], [pb[1]])[0, 0])

    def move(self, src, dst):
        """Points from ``src`` to ``dst`` along a mesh path, ``dst`` last."""
        from .paths import shortest_path

        if src[1] == dst[1] or src[1] < 0:
            return [dst]
        path = shortest_path(self.mesh, src[1], dst[1], m=0, straight=False)
        steps = max(1, int(math.ceil(path.length / self.step)))
        c = resample(path, steps + 1)
        pts = [(None if c.pos is None else c.pos[i], int(c.near[i])) for i in range(1, steps)]
        return pts + [dst]

    def cost(self, a, b):
        s, d = _pair_cost(a, b, self.metric)
        return s + d

    def near_dist(self, c: SampledCurve, pt):
        """Distance from a point to the closest sample of ``c``."""
        if c.pos is not None:
            return float(np.linalg.norm(c.pos - pt[0], axis=1).min())
        return float(self.metric.matrix([pt[1]], c.near).min())

    def labels(self, C: SampledCurve, A: SampledCurve, B: SampledCurve):
        """For each sample of ``C``, whether it sits closer to ``B`` than to ``A``."""
        if C.pos is not None:
            da = np.linalg.norm(C.pos[:, None] - A.pos[None], axis=2).min(axis=1)
            db = np.linalg.norm(C.pos[:, None] - B.pos[None], axis=2).min(axis=1)
        else:
            da = self.metric.matrix(C.near, A.near).min(axis=1)
            db = self.metric.matrix(C.near, B.near).min(axis=1)
        return db < da


def _rotate(c: SampledCurve, i0: int, reverse=False) -> SampledCurve:
    m = c.n - 1
    idx = (np.arange(c.n) + i0) % m if not reverse else (i0 - np.arange(c.n)) % m
    return SampledCurve(None if c.pos is None else c.pos[idx], c.near[idx], c.length, True, c.source)


def _arc(c: SampledCurve, i0: int, i1: int, n: int) -> SampledCurve:
    """Open arc through samples ``i0..i1`` of an equally spaced curve."""
    m = c.n - 1
    if i1 <= i0:
        pt = None if c.pos is None else c.pos[i0]
        out = constant_curve(pt, n, int(c.near[i0])) if pt is not None else SampledCurve(None, np.full(n, c.near[i0]), 0.0, True)
        return out
    cum = np.linspace(0.0, c.length, c.n)[i0 : i1 + 1]
    pos = None if c.pos is None else c.pos[i0 : i1 + 1]
    p, nr = _resample_arrays(cum - cum[0], pos, c.near[i0 : i1 + 1], n)
    return SampledCurve(p, nr, c.length * (i1 - i0) / m, False)


def _split_points(lab):
    """Start and end (exclusive) of the longest cyclic run of ``False`` in ``lab``."""
    m = len(lab)
    if lab.all() or not lab.any():
        raise MorseError("could not locate the pinch of a splitting component")
    start = int(np.flatnonzero(lab)[-1] + 1) % m
    best, cur, best_start = 0, 0, start
    for j in range(m):
        i = (start + j) % m
        if not lab[i]:
            if cur == 0:
                run_start = i
            cur += 1
            if cur > best:
                best, best_start = cur, run_start
        else:
            cur = 0
    return best_start, best


def morse_to_gamma(f: PLFunction, levels=None, n_levels: int = 65, samples: int = DEFAULT_SAMPLES,
                   substeps: int | None = None) -> GammaFamily:
    """Family of level-set tuples of a Morse function.

    Parameters
    ----------
    f : PLFunction
        Morse function on a closed surface (distinct vertex values).
    levels : array_like, optional
        Sorted parameters in ``[0, 1]`` mapped affinely onto the range of
        ``f``.  By default a uniform grid of ``n_levels`` points is refined
        until every cell holds at most one critical value.
    samples : int
        Samples per curve (``samples + 1`` points).
    substeps : int, optional
        Number of growth steps at splits and merges (default from the
        mesh scale).

    Raises
    ------
    MorseError
        When ``f`` is not Morse or the grid does not separate critical values.
    """
    mesh = f.mesh
    if len(mesh.boundary_edges):
        raise MorseError("level-set families need a closed surface")
    crit = sorted(classify_critical(f), key=lambda c: f.values[c[0]])
    if any(kind == "saddle" and mult > 1 for _, kind, mult in crit):
        raise MorseError("degenerate saddle; perturb the function first")
    vals = f.values
    if f.period is None:
        lo, span = float(vals.min()), float(vals.max() - vals.min())
        crit_t = np.array([(vals[v] - lo) / span for v, _, _ in crit])
    else:
        lo, span = float(vals.min()), float(f.period)
        crit_t = np.array([((vals[v] - lo) % span) / span for v, _, _ in crit])
        order = np.argsort(crit_t, kind="stable")
        crit, crit_t = [crit[i] for i in order], crit_t[order]
    if levels is None:
        t = _auto_grid(crit_t, n_levels)
    else:
        t = np.asarray(levels, float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > 1:
            raise MorseError("levels must be a strictly increasing grid in [0, 1]")
    _check_grid(t, crit_t, crit)
    xs = lo + t * span

    B = _Builder(mesh, samples)
    n = B.n

    def curves_at(x):
        out = []
        for comp in level_set(f, x).components:
            c = resample(comp, n)
            if c.length == 0.0:
                c = B.const(B.point(c, 0))
            out.append(c)
        return out

    comps = [curves_at(x) for x in xs]
    k = max(len(c) for c in comps)
    events = []
    if f.period is None:
        events.append((0.0, "create"))

    slots = list(comps[0])
    active = [not c.is_constant or f.period is None for c in slots]
    park = B.point(slots[0], 0)
    slots += [B.const(park)] * (k - len(slots))
    active += [False] * (k - len(active))
    B.emit(t[0], slots, "level")

    def emit_moves(t0, t1, s, dst):
        pts = B.move(B.point(slots[s], 0), dst)
        for j, pt in enumerate(pts):
            slots[s] = B.const(pt)
            B.emit(t0 + (t1 - t0) * (j + 1) / (len(pts) + 1), slots, "move")

    def assign(rows, new, extra=()):
        """Match slots ``rows`` (plus pseudo-rows ``extra``) to curves ``new``."""
        prev = [slots[r] for r in rows] + list(extra)
        C = np.array([[B.cost(p, q) for q in new] for p in prev]) if prev and new else np.zeros((len(prev), len(new)))
        r, c = linear_sum_assignment(C)
        return dict(zip(r.tolist(), c.tolist()))

    def spare():
        free = [s for s in range(k) if not active[s]]
        if not free:
            raise MorseError("no spare component available")
        return free[0]

    for i in range(len(t) - 1):
        t0, t1 = t[i], t[i + 1]
        mid = (t0 + t1) / 2
        new = comps[i + 1]
        inside = [(c, crit_t[j]) for j, c in enumerate(crit) if t0 < crit_t[j] < t1]
        act = [s for s in range(k) if active[s]]
        if f.period is None and i == len(t) - 2:
            # the last level is the maximum point itself
            inside = [c for c in inside if c[0][1] != "max" or f.values[c[0][0]] < vals.max()]
        if not inside:
            if len(new) != len(act) and not (f.period is None and i == len(t) - 2):
                raise MorseError(f"component count changed between {xs[i]:.6g} and {xs[i + 1]:.6g}")
            m = assign(act, new)
            for r, cidx in m.items():
                slots[act[r]] = align(slots[act[r]], new[cidx], B.metric)
            for r in range(len(act)):
                if r not in m:
                    slots[act[r]] = B.const(B.point(slots[act[r]], 0))
                    active[act[r]] = False
            B.emit(t1, slots, "level")
            continue
        (v, kind, _), tc = inside[0]
        pv = B.vertex_point(v)
        if kind == "min":
            s = spare()
            emit_moves(t0, mid, s, pv)
            m = assign(act + [s], new)
            for r, cidx in m.items():
                slot = (act + [s])[r]
                slots[slot] = align(slots[slot], new[cidx], B.metric)
            active[s] = True
            events.append((float(tc), "create"))
        elif kind == "max":
            m = assign(act, new, extra=[])
            if len(new) != len(act) - 1:
                raise MorseError(f"expected a component to vanish at vertex {v}")
            # the vanishing component is the one nearest the maximum
            gone = min(act, key=lambda s: B.near_dist(slots[s], pv))
            rest = [s for s in act if s != gone]
            m = assign(rest, new)
            for r, cidx in m.items():
                slots[rest[r]] = align(slots[rest[r]], new[cidx], B.metric)
            slots[gone] = B.const(pv)
            active[gone] = False
            events.append((float(tc), "destroy"))
        elif len(new) == len(act) + 1:
            _split(B, slots, active, act, new, pv, t0, mid, t1, spare(), emit_moves, assign, substeps)
            events.append((float(tc), "split"))
        elif len(new) == len(act) - 1:
            _merge(B, slots, active, act, new, pv, t0, t1, assign, substeps)
            events.append((float(tc), "merge"))
        else:
            raise MorseError(f"saddle at vertex {v} neither splits nor merges components")
        B.emit(t1, slots, "level")

    if f.period is None:
        events.append((1.0, "destroy"))
    fillings = band_areas(f, xs)
    events.sort(key=lambda e: e[0])
    return GammaFamily(np.array(B.params), B.tuples, events, xs, fillings, mesh.area, tuple(B.phases))


def _growth_steps(B, length, substeps):
    if substeps is not None:
        return max(1, int(substeps))
    return max(2, int(math.ceil(4 * length / B.step)))


def _split(B, slots, active, act, new, pv, t0, mid, t1, s, emit_moves, assign, substeps):
    n = B.n
    j = min(act, key=lambda q: B.near_dist(slots[q], pv))
    two = sorted(range(len(new)), key=lambda q: B.near_dist(new[q], pv))[:2]
    Ap, Bp = new[two[0]], new[two[1]]
    C = slots[j]
    lab = B.labels(C, Ap, Bp)[:-1]
    i0, run = _split_points(lab)
    C = _rotate(C, i0)
    slots[j] = C
    B.emit(t0 + (mid - t0) * 0.25, slots, "rotate")
    emit_moves(t0 + (mid - t0) * 0.25, mid, s, B.point(C, 0))
    m = C.n - 1
    q = min(max(run, 1), m - 1)
    r = _growth_steps(B, C.length * (m - q) / m, substeps)
    for step in range(r + 1):
        sig = int(round(m - (m - q) * step / r))
        slots[j] = _arc(C, 0, sig, n)
        slots[s] = _arc(C, sig, m, n)
        B.emit(mid + (t1 - mid) * step / (r + 1), slots, "grow")
    arcA, arcB = slots[j], slots[s]
    slots[j] = align(arcA, Ap, B.metric)
    slots[s] = align(arcB, Bp, B.metric)
    active[s] = True
    others = [q for q in act if q != j]
    rest = [q for q in range(len(new)) if q not in two]
    mm = assign(others, [new[q] for q in rest])
    for a, b in mm.items():
        slots[others[a]] = align(slots[others[a]], new[rest[b]], B.metric)


def _merge(B, slots, active, act, new, pv, t0, t1, assign, substeps):
    n = B.n
    two = sorted(act, key=lambda q: B.near_dist(slots[q], pv))[:2]
    j, s = two
    ci = min(range(len(new)), key=lambda q: B.near_dist(new[q], pv))
    C = new[ci]
    lab = B.labels(C, slots[j], slots[s])[:-1]
    i0, run = _split_points(lab)
    C = _rotate(C, i0)
    m = C.n - 1
    q = min(max(run, 1), m - 1)
    arcA, arcB = _arc(C, 0, q, n), _arc(C, q, m, n)
    # line the two merging curves up with the arcs they turn into
    slots[j] = align(arcA, slots[j], B.metric)
    slots[s] = align(arcB, slots[s], B.metric)
    B.emit(t0 + (t1 - t0) * 0.25, slots, "rotate")
    others = [a for a in act if a not in two]
    rest = [a for a in range(len(new)) if a != ci]
    mm = assign(others, [new[a] for a in rest])
    for a, b in mm.items():
        slots[others[a]] = align(slots[others[a]], new[rest[b]], B.metric)
    r = _growth_steps(B, C.length * (m - q) / m, substeps)
    for step in range(r + 1):
        sig = int(round(q + (m - q) * step / r))
        slots[j] = _arc(C, 0, sig, n)
        slots[s] = _arc(C, sig, m, n)
        B.emit(t0 + (t1 - t0) * (0.5 + 0.5 * step / (r + 1)), slots, "grow")
    slots[j] = C
    slots[s] = B.const(B.point(C, 0))
    active[s] = False
