"""Piecewise-linear functions on meshes and their level sets.

Criticality follows the lower-link rule: a vertex contributes index
``1 - chi(lower link)``, which is ``+1`` at extrema, ``0`` at regular points
and ``-(k - 1)`` at a saddle whose link changes sign ``2k`` times.  These
indices add up to the Euler characteristic, with or without boundary.

Level sets use the convention that a vertex with value ``>= x`` lies above
the level, so every face meets ``f = x`` in zero or one straight segment.
The length of ``f^{-1}(x)`` is then piecewise affine in ``x`` with breaks at
vertex values only, and its supremum is found exactly by evaluating one-sided
limits at every vertex value.

Functions may be circle valued (``period`` set).  Each face is then lifted to
the real line before interpolating, which is how the coordinate functions of
a flat torus are represented.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .curves import PolyCurve, vertex_points
from .mesh import TriMesh

__all__ = [
    "MorseError",
    "PLFunction",
    "MultiCurve",
    "classify_critical",
    "index_sum",
    "vertex_indices",
    "fiber_profile",
    "level_set",
    "fiber_length",
    "max_fiber_length",
    "perturb_to_morse",
    "sublevel_area",
    "band_areas",
]

log = logging.getLogger(__name__)


class MorseError(ValueError):
    pass


def _wrap(d, period):
    return d if period is None else d - period * np.round(d / period)


@dataclass(frozen=True)
class PLFunction:
    """Vertex values interpolated linearly on faces.

    Parameters
    ----------
    mesh : TriMesh
    values : ndarray, shape (V,)
    period : float, optional
        Makes the function circle valued; values are read modulo ``period``.
    domain : ndarray of bool, shape (F,), optional
        Faces on which the function lives (a region).  Defaults to all faces.
    """

    mesh: TriMesh = field(repr=False)
    values: np.ndarray = field(repr=False)
    period: float | None = None
    domain: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape != (self.mesh.n_vertices,):
            raise ValueError("one value per vertex required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite function value")
        if self.period is not None:
            vals = np.mod(vals, self.period)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.domain is not None:
            dom = np.zeros(self.mesh.n_faces, bool)
            d = np.asarray(self.domain)
            dom[d if d.dtype != bool else np.flatnonzero(d)] = True
            dom.setflags(write=False)
            object.__setattr__(self, "domain", dom)

    # -- helpers -----------------------------------------------------------

    @property
    def face_mask(self):
        return np.ones(self.mesh.n_faces, bool) if self.domain is None else self.domain

    @property
    def domain_faces(self):
        return np.flatnonzero(self.face_mask)

    @property
    def domain_vertices(self):
        return np.unique(self.mesh.faces[self.domain_faces])

    @property
    def range(self):
        if self.period is not None:
            return 0.0, float(self.period)
        v = self.values[self.domain_vertices]
        return float(v.min()), float(v.max())

    def face_values(self, faces=None):
        """Per-face corner values, lifted to the real line when circle valued."""
        faces = self.domain_faces if faces is None else np.asarray(faces)
        fv = self.values[self.mesh.faces[faces]]
        if self.period is not None:
            base = fv[:, :1]
            fv = base + _wrap(fv - base, self.period)
        return fv

    def edge_values(self, edges):
        """Lifted (start, end) values along edges ``(u, v)`` with ``u < v``."""
        a = self.values[self.mesh.edges[edges, 0]]
        b = self.values[self.mesh.edges[edges, 1]]
        return a, a + _wrap(b - a, self.period) if self.period is not None else b

    def with_mesh(self, mesh):
        return PLFunction(mesh, self.values, self.period, self.domain)

    def with_values(self, values):
        return PLFunction(self.mesh, values, self.period, self.domain)

    def lower(self, u, v):
        """Strict order used for criticality: by value, ties broken by id."""
        d = _wrap(self.values[u] - self.values[v], self.period)
        return (d < 0) | ((d == 0) & (np.asarray(u) < np.asarray(v)))


# -- criticality ---------------------------------------------------------------


def _check_distinct(f: PLFunction):
    vs = f.domain_vertices
    vals = np.sort(f.values[vs])
    if len(vals) > 1 and np.any(np.diff(vals) == 0):
        raise MorseError("function has repeated vertex values; call perturb_to_morse first")
    if f.period is not None and len(vals) > 1 and vals[0] + f.period == vals[-1]:
        raise MorseError("function has repeated vertex values; call perturb_to_morse first")


def vertex_indices(f: PLFunction):
    """(index, lower-neighbour count, degree) per vertex, restricted to the domain."""
    mesh = f.mesh
    faces = mesh.faces[f.domain_faces]
    fe = np.unique(mesh.face_edges[f.domain_faces].ravel())
    u, v = mesh.edges[fe, 0], mesh.edges[fe, 1]
    V = mesh.n_vertices
    deg = np.bincount(u, minlength=V) + np.bincount(v, minlength=V)
    u_low = f.lower(u, v)
    n_low = np.bincount(v[u_low], minlength=V) + np.bincount(u[~u_low], minlength=V)
    e_low = np.zeros(V, dtype=np.int64)
    for i in range(3):
        c, a, b = faces[:, i], faces[:, (i + 1) % 3], faces[:, (i + 2) % 3]
        both = f.lower(a, c) & f.lower(b, c)
        np.add.at(e_low, c[both], 1)
    index = 1 - (n_low - e_low)
    return index, n_low, deg


def classify_critical(f: PLFunction, check=True):
    """Critical vertices as ``(vertex, kind, multiplicity)``.

    ``kind`` is ``'min'``, ``'max'`` or ``'saddle'``.  Extrema have
    multiplicity 1; a saddle's multiplicity is minus its index.
    """
    if check:
        _check_distinct(f)
    index, n_low, deg = vertex_indices(f)
    out = []
    for v in f.domain_vertices:
        i = int(index[v])
        if i == 0:
            continue
        if i > 0:
            out.append((int(v), "min" if n_low[v] == 0 else "max", 1))
        else:
            out.append((int(v), "saddle", -i))
    return out


def index_sum(f: PLFunction) -> int:
    index, _, _ = vertex_indices(f)
    return int(index[f.domain_vertices].sum())


def perturb_to_morse(f: PLFunction, delta: float) -> PLFunction:
    """Make vertex values pairwise distinct with sup-norm change at most ``delta``.

    Vertices are visited in (value, id) order and a value that does not exceed
    its predecessor is lifted just above it, by steps of ``delta / V``.
    Already-distinct functions come back unchanged.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    vals = f.values.copy()
    vs = f.domain_vertices
    order = vs[np.lexsort((vs, vals[vs]))]
    step = delta / max(len(vs), 1)
    x = vals[order]
    new = x.copy()
    for i in range(1, len(new)):
        if new[i] <= new[i - 1]:
            new[i] = new[i - 1] + step
    vals[order] = new
    if f.period is not None and np.any(vals[vs] >= f.period):
        # wrapped values would collide with the low end; shift the tail downwards instead
        over = vals[vs] >= f.period
        log.debug("perturbation wrapped %d values past the period", int(over.sum()))
        vals[vs[over]] = f.period - step * (1 + np.arange(over.sum()))[::-1] / 2
    return f.with_values(vals)


# -- level sets --------------------------------------------------------------------


@dataclass
class MultiCurve:
    """Components of one level set plus the critical points sitting on it."""

    level: float
    components: list
    singular: list = field(default_factory=list)

    @property
    def length(self) -> float:
        return float(sum(c.length for c in self.components))

    def __len__(self):
        return len(self.components)

    def to_json(self):
        comps = []
        for c in self.components:
            pts = []
            for vv, ww, fc in zip(c.verts, c.weights, np.r_[c.seg_faces, c.seg_faces[-1:]] if len(c.seg_faces) else [-1]):
                face = int(fc) if fc >= 0 else -1
                bary = [0.0, 0.0, 0.0]
                if face >= 0:
                    corners = c.mesh.faces[face]
                    for v, w in zip(vv, ww):
                        bary[int(np.flatnonzero(corners == v)[0])] += float(w) if w else 0.0
                else:
                    bary = [float(ww[0]), float(ww[1]), float(ww[2])]
                pts.append([face, *bary])
            comps.append({"closed": bool(c.closed), "points": pts, "length": c.length})
        return {"level": float(self.level), "components": comps, "singular": [int(v) for v in self.singular]}


def _edge_crossings(f: PLFunction, x: float, edges):
    """Crossing parameter along each edge (NaN when the edge misses the level)."""
    a, b = f.edge_values(edges)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    if f.period is None:
        xk = np.full(len(edges), float(x))
    else:
        p = f.period
        xk = x + p * (np.floor((lo - x) / p) + 1)
        # the smallest shift strictly above lo; an exact hit on hi is allowed
    hit = (lo < xk) & (xk <= hi)
    t = np.full(len(edges), np.nan)
    d = b - a
    t[hit] = (xk[hit] - a[hit]) / d[hit]
    return t


def level_set(f: PLFunction, x: float) -> MultiCurve:
    """Chain the level-``x`` segments of every face into curves.

    Components are closed, or run between boundary edges of the domain.
    At a critical value the curves meeting at the critical vertex are
    returned as they are and the vertex is listed in ``singular``.
    """
    mesh = f.mesh
    dom = f.domain_faces
    t_edge = np.full(mesh.n_edges, np.nan)
    dom_edges = np.unique(mesh.face_edges[dom].ravel())
    t_edge[dom_edges] = _edge_crossings(f, x, dom_edges)
    fe = mesh.face_edges[dom]
    cross = ~np.isnan(t_edge[fe])
    ncross = cross.sum(axis=1)
    if np.any(ncross % 2):
        raise MorseError("inconsistent level crossing; is the function too coarse for its period?")
    seg_face = dom[ncross == 2]
    ends = fe[ncross == 2][cross[ncross == 2]].reshape(-1, 2)

    nbr = {}
    for s, (e1, e2) in enumerate(ends):
        nbr.setdefault(int(e1), []).append(s)
        nbr.setdefault(int(e2), []).append(s)
    used = np.zeros(len(ends), bool)
    comps = []

    def walk(start_edge, first_seg):
        chain, faces = [start_edge], []
        e, s = start_edge, first_seg
        while s is not None and not used[s]:
            used[s] = True
            faces.append(int(seg_face[s]))
            e1, e2 = ends[s]
            e = int(e2) if int(e1) == e else int(e1)
            chain.append(e)
            nxt = [q for q in nbr[e] if not used[q]]
            s = nxt[0] if nxt else None
        return chain, faces

    starts = sorted(e for e, ss in nbr.items() if len(ss) == 1)
    for e in starts:
        s = nbr[e][0]
        if used[s]:
            continue
        chain, faces = walk(e, s)
        comps.append((chain, faces, False))
    for s0 in range(len(ends)):
        if used[s0]:
            continue
        e0 = int(min(ends[s0]))
        chain, faces = walk(e0, s0)
        comps.append((chain, faces, True))

    components = []
    for chain, faces, closed in comps:
        verts, weights = _points_on_edges(mesh, np.array(chain), t_edge[chain])
        components.append(PolyCurve(mesh, verts, weights, closed, np.array(faces, dtype=np.int64)))

    # isolated minima sitting exactly on the level are point components
    vals = f.values
    on = f.domain_vertices[_wrap(vals[f.domain_vertices] - x, f.period) == 0]
    singular = []
    if len(on):
        index, n_low, _ = vertex_indices(f)
        for v in on:
            if index[v] != 0:
                singular.append(int(v))
            if index[v] > 0 and n_low[v] == 0:
                vv, ww = vertex_points([v])
                components.append(PolyCurve(mesh, vv, ww, True, np.zeros(0, dtype=np.int64)))
    return MultiCurve(float(x), components, singular)


def _points_on_edges(mesh, edges, t):
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    verts = np.stack([a, b, a], axis=1)
    weights = np.stack([1 - t, t, np.zeros_like(t)], axis=1)
    return verts, weights


# -- fiber lengths -----------------------------------------------------------------


def face_tents(f: PLFunction, faces=None):
    """Per-face (a, b, c, peak) with sorted lifted values and the peak length.

    Inside a face, the level segment grows linearly from 0 at ``a`` to
    ``peak`` at ``b`` and shrinks back to 0 at ``c``.  ``peak`` is the
    distance from the middle corner to the point of the opposite edge with
    the same value.
    """
    mesh = f.mesh
    faces = f.domain_faces if faces is None else np.asarray(faces)
    fv = f.face_values(faces)
    order = np.argsort(fv, axis=1, kind="stable")
    sv = np.take_along_axis(fv, order, axis=1)
    lay = mesh.layout[faces]
    pa = np.take_along_axis(lay, order[:, 0, None, None].repeat(2, 2), 1)[:, 0]
    pb = np.take_along_axis(lay, order[:, 1, None, None].repeat(2, 2), 1)[:, 0]
    pc = np.take_along_axis(lay, order[:, 2, None, None].repeat(2, 2), 1)[:, 0]
    a, b, c = sv.T
    span = c - a
    s = np.divide(b - a, span, out=np.zeros_like(span), where=span > 0)
    q = pa + s[:, None] * (pc - pa)
    peak = np.hypot(*(q - pb).T)
    return a, b, c, peak


def _tent_eval(a, b, c, peak, x, side):
    """Tent value at ``x``: ``side=+1`` right limit, ``-1`` left limit, ``0`` the value itself."""
    if side > 0:
        rise = (x >= a) & (x < b)
        fall = (x >= b) & (x < c)
    else:
        # the value uses the "vertex >= x is above" convention, which is left continuous
        rise = (x > a) & (x <= b)
        fall = (x > b) & (x <= c)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = peak * (x - a) / (b - a)
        fl = peak * (c - x) / (c - b)
    return np.where(rise, r, 0.0) + np.where(fall, fl, 0.0)


def fiber_length(f: PLFunction, x: float) -> float:
    """Length of ``f^{-1}(x)``, using the same convention as :func:`level_set`."""
    a, b, c, peak = face_tents(f)
    if f.period is not None:
        p = f.period
        x = x + p * (np.floor((a - x) / p) + 1)  # the lift in (a, a + p]
    return float(_tent_eval(a, b, c, peak, x, 0).sum())


def _sparse_eval(a, b, c, peak, X, side, period=None, budget=20_000_000):
    """Sum of tents at each sorted breakpoint in ``X``, evaluating only active faces."""
    n = len(X)
    if period is None:
        lo = np.searchsorted(X, a, side="left")
        hi = np.searchsorted(X, c, side="right")
        Xe = X
    else:
        shift = period * np.floor(a / period)
        a, b, c = a - shift, b - shift, c - shift
        Xe = np.concatenate([X, X + period])
        lo = np.searchsorted(Xe, a, side="left")
        hi = np.searchsorted(Xe, c, side="right")
    cnt = hi - lo
    total = int(cnt.sum())
    out = np.zeros(n)
    if total == 0:
        return out
    chunk = max(1, budget // max(1, int(cnt.max())))
    for s in range(0, len(a), chunk):
        sl = slice(s, s + chunk)
        k = cnt[sl]
        fid = np.repeat(np.arange(len(k)), k)
        starts = np.repeat(lo[sl], k)
        offs = np.arange(len(fid)) - np.repeat(np.cumsum(k) - k, k)
        j = starts + offs
        vals = _tent_eval(a[sl][fid], b[sl][fid], c[sl][fid], peak[sl][fid], Xe[j], side)
        np.add.at(out, j % n, vals)
    return out


def max_fiber_length(f: PLFunction):
    """Exact supremum of ``length(f^{-1}(x))`` and a level attaining it.

    Returns
    -------
    (float, float)
        Supremum and its level.  When the supremum is a one-sided limit the
        returned level is the breakpoint it is approached at.
    """
    a, b, c, peak = face_tents(f)
    if np.all(c == a):
        raise MorseError("constant function has no sweep; perturb it first")
    X = np.unique(np.concatenate([a, b, c]))
    if f.period is not None:
        X = np.unique(np.mod(X, f.period))
    right = _sparse_eval(a, b, c, peak, X, +1, f.period)
    left = _sparse_eval(a, b, c, peak, X, -1, f.period)
    both = np.maximum(left, right)
    j = int(np.argmax(both))
    return float(both[j]), float(X[j])


def fiber_profile(f: PLFunction):
    """Breakpoints and the larger one-sided fiber length at each (for plots)."""
    a, b, c, peak = face_tents(f)
    X = np.unique(np.concatenate([a, b, c]))
    if f.period is not None:
        X = np.unique(np.mod(X, f.period))
    right = _sparse_eval(a, b, c, peak, X, +1, f.period)
    left = _sparse_eval(a, b, c, peak, X, -1, f.period)
    return X, np.maximum(left, right)


# -- areas -----------------------------------------------------------------------------


def _face_sublevel(a, b, c, area, x):
    """Area of ``{f <= x}`` inside faces with sorted values ``a <= b <= c``."""
    x = np.broadcast_to(x, a.shape).astype(float)
    out = np.where(x >= c, area, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lowpart = area * (x - a) ** 2 / ((b - a) * (c - a))
        highpart = area * (1.0 - (c - x) ** 2 / ((c - a) * (c - b)))
    m1 = (x > a) & (x <= b) & (b > a)
    m2 = (x > b) & (x < c)
    out = np.where(m1, lowpart, out)
    out = np.where(m2, highpart, out)
    return out


def sublevel_area(f: PLFunction, x: float) -> float:
    """Area of ``{f <= x}`` (for circle-valued ``f``, of the arc ``[0, x]``)."""
    if f.period is not None:
        return float(band_areas(f, [0.0, x])[0])
    a, b, c, _ = face_tents(f)
    area = f.mesh.face_areas[f.domain_faces]
    return float(_face_sublevel(a, b, c, area, x).sum())


def band_areas(f: PLFunction, grid) -> np.ndarray:
    """Areas of ``{grid[i] <= f <= grid[i + 1]}``; they add up to the domain area over a full range."""
    grid = np.asarray(grid, float)
    a, b, c, _ = face_tents(f)
    area = f.mesh.face_areas[f.domain_faces]
    if f.period is None:
        S = np.array([_face_sublevel(a, b, c, area, x).sum() for x in grid])
        return np.diff(S)
    p = f.period
    out = []
    for x0, x1 in zip(grid[:-1], grid[1:]):
        tot = np.zeros_like(a)
        # every lift of the band that can meet a face spanning less than one period
        k0 = np.floor((a - x1) / p)
        for k in range(0, 3):
            s = (k0 + k) * p
            tot += _face_sublevel(a, b, c, area, x1 + s) - _face_sublevel(a, b, c, area, x0 + s)
        out.append(tot.sum())
    return np.array(out)
