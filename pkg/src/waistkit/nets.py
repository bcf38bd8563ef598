"""Min-max extraction: discrete Birkhoff shortening and geodesic nets.

A geodesic arc between two surface points is found by pulling a string
(funnel algorithm) through a corridor of faces unfolded into the plane.  The
corridor is the one of the arc being replaced, so the string is never longer
than that arc.  When the string wraps around a vertex a local Steiner-graph
search proposes a second corridor and the shorter string wins.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .curves import PolyCurve
from .gamma import GammaFamily, LoopTuple, almgren_degree, constant_curve, resample
from .mesh import TriMesh
from .paths import SteinerGraph, _pair_graph

__all__ = [
    "GeodesicNet",
    "MinMaxTrace",
    "ShortenResult",
    "birkhoff_shorten",
    "geodesic_between",
    "minmax_extract",
    "stationarity_residual",
]

log = logging.getLogger(__name__)

_EPS = 1e-12
DEFAULT_BREAKS = 64
MAX_BREAKS = 1024


# -- per-mesh tables ------------------------------------------------------------------


class _Topo:
    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        vf = mesh.vertex_faces()
        self.vfaces = [np.array(f, dtype=np.int64) for f in vf]
        self.median_edge = mesh.median_edge
        self.face_edge_sets = [set(map(int, r)) for r in mesh.face_edges]
        self._fans: dict = {}

    def other_face(self, e, f):
        a, b = self.mesh.edge_faces[e]
        return int(b) if a == f else int(a)

    def ring(self, faces, k):
        faces = np.unique(np.asarray(faces, dtype=np.int64))
        for _ in range(k):
            verts = np.unique(self.mesh.faces[faces])
            faces = np.unique(np.concatenate([self.vfaces[v] for v in verts]))
        return faces

    def fan(self, v):
        """Faces around ``v`` in counter-clockwise order with angle offsets."""
        if v in self._fans:
            return self._fans[v]
        mesh = self.mesh
        start = int(self.vfaces[v][0])

        def step(f, forward):
            i = int(np.flatnonzero(mesh.faces[f] == v)[0])
            e = mesh.face_edges[f, (i + 2) % 3] if forward else mesh.face_edges[f, i]
            return self.other_face(e, f)

        # walk clockwise to a boundary (if any) so the fan starts there
        f, seen = start, {start}
        while True:
            g = step(f, False)
            if g < 0 or g in seen:
                break
            seen.add(g)
            f = g
        first = f if g < 0 else start
        order, offs, total, f = [], {}, 0.0, first
        while True:
            order.append(f)
            offs[f] = total
            total += _corner_angle(mesh, f, v)
            g = step(f, True)
            if g < 0 or g == first or g in offs:
                break
            f = g
        out = (offs, total, g == first)
        self._fans[v] = out
        return out


@lru_cache(maxsize=8)
def _topo(mesh):
    return _Topo(mesh)


def _corner_angle(mesh, f, v):
    i = int(np.flatnonzero(mesh.faces[f] == v)[0])
    L = mesh.layout[f]
    a, b = L[(i + 1) % 3] - L[i], L[(i + 2) % 3] - L[i]
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


# -- surface points -------------------------------------------------------------------
# A point is (face, bary) with bary over mesh.faces[face].


def _bary(mesh, f, verts, weights):
    corners = mesh.faces[f]
    b = np.zeros(3)
    for v, w in zip(verts, weights):
        if w > 0:
            hit = np.flatnonzero(corners == v)
            if len(hit) == 0:
                raise ValueError("point is not in the given face")
            b[hit[0]] += w
    return b / b.sum()


def _curve_point(curve: PolyCurve, i):
    sf = curve.seg_faces
    n = len(curve.verts)
    i = i % n
    if len(sf):
        f = int(sf[min(i, len(sf) - 1)])
    else:
        v = int(curve.verts[i][np.argmax(curve.weights[i])])
        f = int(_topo(curve.mesh).vfaces[v][0])
    return f, _bary(curve.mesh, f, curve.verts[i], curve.weights[i])


def _locate(mesh, f, b):
    """('v', vertex) / ('e', edge) / ('f', face) for the cell carrying a point."""
    nz = np.flatnonzero(b > _EPS)
    c = mesh.faces[f]
    if len(nz) == 1:
        return "v", int(c[nz[0]])
    if len(nz) == 2:
        i, j = int(nz[0]), int(nz[1])
        k = i if j == i + 1 else 2
        return "e", int(mesh.face_edges[f, k])
    return "f", int(f)


def _bary_in(mesh, p, g):
    """Barycentric coordinates of point ``p`` in face ``g`` (which must contain it)."""
    f, b = p
    if f == g:
        return b
    verts = mesh.faces[f]
    return _bary(mesh, g, verts, np.where(b > _EPS, b, 0.0))


def _key(mesh, p):
    kind, ident = _locate(mesh, *p)
    if kind == "v":
        return ("v", ident)
    f, b = p
    if kind == "e":
        u, w = mesh.edges[ident]
        g = f
        bb = _bary_in(mesh, p, g)
        t = bb[np.flatnonzero(mesh.faces[g] == w)[0]]
        return ("e", ident, round(float(t), 9))
    return ("f", ident, *np.round(b, 9))


def _as_rows(mesh, p):
    f, b = p
    return mesh.faces[f], b


def _make_curve(mesh, points, faces, closed=False):
    verts = np.array([mesh.faces[f] for f, _ in points]) if points else np.zeros((0, 3), np.int64)
    weights = np.array([b for _, b in points]) if points else np.zeros((0, 3))
    return PolyCurve(mesh, verts, weights, closed, np.asarray(faces, dtype=np.int64))


def _join(a: PolyCurve, b: PolyCurve) -> PolyCurve:
    return PolyCurve(a.mesh, np.vstack([a.verts, b.verts[1:]]), np.vstack([a.weights, b.weights[1:]]), False, np.r_[a.seg_faces, b.seg_faces])


def _split(curve: PolyCurve, s):
    """Cut an open curve at arclength ``s``; returns (head, point, tail)."""
    mesh = curve.mesh
    seg = curve.segment_lengths()
    cum = np.cumsum(seg)
    k = int(min(np.searchsorted(cum, s, side="left"), len(seg) - 1))
    s0 = cum[k] - seg[k]
    tau = 0.0 if seg[k] == 0 else min(max((s - s0) / seg[k], 0.0), 1.0)
    f = int(curve.seg_faces[k])
    pa = _bary(mesh, f, curve.verts[k], curve.weights[k])
    pb = _bary(mesh, f, curve.verts[k + 1], curve.weights[k + 1])
    m = (1 - tau) * pa + tau * pb
    m = np.where(m < _EPS, 0.0, m)
    m /= m.sum()
    fv = mesh.faces[f]
    head = PolyCurve(mesh, np.vstack([curve.verts[: k + 1], fv]), np.vstack([curve.weights[: k + 1], m]), False, curve.seg_faces[: k + 1])
    tail = PolyCurve(mesh, np.vstack([fv, curve.verts[k + 1 :]]), np.vstack([m, curve.weights[k + 1 :]]), False, curve.seg_faces[k:])
    return head, (f, m), tail


# -- corridors and string pulling -----------------------------------------------------


def _fan_steps(topo: _Topo, v, a, b):
    """Shortest walk of (edge, face) steps around ``v`` from face ``a`` to ``b``."""
    mesh = topo.mesh
    best = None
    i = int(np.flatnonzero(mesh.faces[a] == v)[0])
    for e0 in (mesh.face_edges[a, i], mesh.face_edges[a, (i + 2) % 3]):
        steps, f, e = [], a, int(e0)
        for _ in range(len(topo.vfaces[v]) + 1):
            g = topo.other_face(e, f)
            if g < 0:
                steps = None
                break
            steps.append((e, g))
            if g == b:
                break
            j = int(np.flatnonzero(mesh.faces[g] == v)[0])
            cand = [int(x) for x in (mesh.face_edges[g, j], mesh.face_edges[g, (j + 2) % 3]) if x != e]
            f, e = g, cand[0]
        else:
            steps = None
        if steps is not None and steps[-1][1] == b and (best is None or len(steps) < len(best)):
            best = steps
    if best is None:
        raise ValueError(f"faces {a} and {b} do not meet at vertex {v}")
    return best


def _corridor(curve: PolyCurve):
    """Edge-adjacent face sequence (faces, portal edges) along a curve."""
    mesh = curve.mesh
    topo = _topo(mesh)
    sf = curve.seg_faces
    F, P = [int(sf[0])], []

    def push(e, g):
        if P and P[-1] == e and len(F) >= 2 and F[-2] == g:
            F.pop()
            P.pop()
        else:
            F.append(g)
            P.append(e)

    for i in range(1, len(sf)):
        a, b = F[-1], int(sf[i])
        if a == b:
            continue
        kind, ident = _locate(mesh, *_curve_point(curve, i))
        shared = topo.face_edge_sets[a] & topo.face_edge_sets[b]
        if kind == "e" and ident in shared:
            push(ident, b)
        elif kind != "v" and len(shared) == 1:
            push(next(iter(shared)), b)
        else:
            if kind != "v":
                common = set(map(int, mesh.faces[a])) & set(map(int, mesh.faces[b]))
                ident = min(common)
            for e, g in _fan_steps(topo, ident, a, b):
                push(e, g)
    return F, P


def _unfold(mesh, F, P):
    """Planar corner positions (complex) of each corridor face."""
    lay = mesh.layout
    placed = [lay[F[0]] @ np.array([1.0, 1j])]
    for i, e in enumerate(P):
        f, g = F[i], F[i + 1]
        u, v = mesh.edges[e]
        cf, cg = mesh.faces[f], mesh.faces[g]
        Pu, Pv = placed[i][cf == u][0], placed[i][cf == v][0]
        Lg = lay[g] @ np.array([1.0, 1j])
        Lu, Lv = Lg[cg == u][0], Lg[cg == v][0]
        rot = (Pv - Pu) / (Lv - Lu)
        rot /= abs(rot)
        placed.append(Pu + (Lg - Lu) * rot)
    return placed


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def _funnel(start, end, portals):
    """String pulling through ``portals`` [(left, right, left_id, right_id)].

    Returns the apex list [(position, portal index, id)] including both ends;
    portal index 0 is the start and ``len(portals) + 1`` the end.
    """
    pts = [(start, start, None, None)] + list(portals) + [(end, end, None, None)]
    apex, left, right = start, start, start
    ai = li = ri = 0
    lid = rid = None
    path = [(start, 0, None)]
    i, n = 1, len(pts)
    scale = max(abs(end - start), max((abs(p[0] - start) for p in portals), default=0.0), 1e-300)
    tiny = 1e-14 * scale * scale

    def same(a, b):
        return abs(a - b) <= 1e-13 * scale

    while i < n:
        pl, pr, plid, prid = pts[i]
        if _cross(right - apex, pr - apex) >= -tiny:
            if same(apex, right) or _cross(left - apex, pr - apex) < -tiny:
                right, ri, rid = pr, i, prid
            else:
                apex, ai = left, li
                path.append((apex, ai, lid))
                right, ri, rid = apex, ai, lid
                i = ai + 1
                continue
        if _cross(left - apex, pl - apex) <= tiny:
            if same(apex, left) or _cross(right - apex, pl - apex) > tiny:
                left, li, lid = pl, i, plid
            else:
                apex, ai = right, ri
                path.append((apex, ai, rid))
                left, li, lid = apex, ai, rid
                i = ai + 1
                continue
        i += 1
    if path[-1][1] != n - 1:
        path.append((end, n - 1, None))
    return path


def _pull(mesh, p, q, F, P):
    """Shortest curve from ``p`` to ``q`` inside corridor (F, P); also flags vertex contact."""
    placed = _unfold(mesh, F, P)
    start = _bary_in(mesh, p, F[0]) @ placed[0]
    end = _bary_in(mesh, q, F[-1]) @ placed[-1]
    portals, ends = [], []
    for i, e in enumerate(P):
        u, v = (int(x) for x in mesh.edges[e])
        cf = mesh.faces[F[i]]
        A, B = placed[i][cf == u][0], placed[i][cf == v][0]
        C = placed[i][(cf != u) & (cf != v)][0]
        if _cross(A - C, B - C) > 0:
            portals.append((B, A, v, u))
        else:
            portals.append((A, B, u, v))
        ends.append((A, B))
    path = _funnel(start, end, portals)
    touched = [(a[2], a[1]) for a in path[1:-1]]
    pts = [(F[0], _bary_in(mesh, p, F[0]))]
    seg = 0
    for j, e in enumerate(P, start=1):
        while path[seg + 1][1] < j:
            seg += 1
        A, B = ends[j - 1]
        if path[seg + 1][1] == j:
            vid = path[seg + 1][2]
            t = 0.0 if vid == int(mesh.edges[e][0]) else 1.0
        else:
            X, Y = path[seg][0], path[seg + 1][0]
            d = Y - X
            den = _cross(d, B - A)
            if abs(den) <= 1e-300:
                t = 0.0 if abs(A - X) <= abs(B - X) else 1.0
            else:
                t = min(max(-_cross(d, A - X) / den, 0.0), 1.0)
        u, v = mesh.edges[e]
        g = F[j]
        b = np.zeros(3)
        cg = mesh.faces[g]
        b[np.flatnonzero(cg == u)[0]] = 1.0 - t
        b[np.flatnonzero(cg == v)[0]] += t
        pts.append((g, b))
    pts.append((F[-1], _bary_in(mesh, q, F[-1])))
    faces = list(F)
    return _make_curve(mesh, pts, faces), touched


def _faces_of(mesh, p):
    kind, ident = _locate(mesh, *p)
    if kind == "v":
        return [int(f) for f in _topo(mesh).vfaces[ident]]
    if kind == "e":
        return [int(f) for f in mesh.edge_faces[ident] if f >= 0]
    return [ident]


def _graph_curve(mesh, p, q, region, m=2):
    """Unstraightened Steiner-graph path from ``p`` to ``q`` inside faces ``region``."""
    fp_, fq_ = _faces_of(mesh, p), _faces_of(mesh, q)
    region = np.unique(np.r_[region, fp_, fq_]).astype(np.int64)
    W, Fm, fn, fpos = _pair_graph(mesh, m, region)
    N = W.shape[0]
    W = W.tocoo()
    rows, cols, vals = [W.row], [W.col], [W.data]
    extra_face = {}
    for node, pt, faces in ((N, p, fp_), (N + 1, q, fq_)):
        for f in faces:
            r = int(np.searchsorted(region, f))
            pos = _bary_in(mesh, pt, f) @ mesh.layout[f]
            d = np.maximum(np.linalg.norm(fpos[r] - pos, axis=1), 1e-300)
            rows += [np.full(len(d), node), fn[r]]
            cols += [fn[r], np.full(len(d), node)]
            vals += [d, d]
            for x in fn[r]:
                extra_face.setdefault((node, int(x)), f)
    common = sorted(set(fp_) & set(fq_))
    if common:
        f = common[0]
        d = max(float(np.linalg.norm((_bary_in(mesh, p, f) - _bary_in(mesh, q, f)) @ mesh.layout[f])), 1e-300)
        rows += [np.array([N, N + 1])]
        cols += [np.array([N + 1, N])]
        vals += [np.array([d, d])]
        extra_face[(N, N + 1)] = f
    r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    ids, inv = np.unique(np.r_[r, c], return_inverse=True)
    M = coo_matrix((w, (inv[: len(r)], inv[len(r) :])), shape=(len(ids), len(ids))).tocsr()
    src, dst = len(ids) - 2, len(ids) - 1
    dist, pred = dijkstra(M, directed=False, indices=src, return_predecessors=True)
    if not np.isfinite(dist[dst]):
        return None
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    nodes = [int(ids[k]) for k in path[::-1]]
    Fm = Fm.tocsr()
    faces = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        if a >= N or b >= N:
            faces.append(extra_face.get((a, b), extra_face.get((b, a))))
        else:
            faces.append(int(Fm[a, b]) - 1)
    g = SteinerGraph(mesh, m, None, None, None, None)
    inner = nodes[1:-1]
    verts, weights = g.node_points(inner) if inner else (np.zeros((0, 3), np.int64), np.zeros((0, 3)))
    fv0, fv1 = _as_rows(mesh, p), _as_rows(mesh, q)
    V = np.vstack([fv0[0][None], verts, fv1[0][None]])
    Wt = np.vstack([fv0[1][None], weights, fv1[1][None]])
    return PolyCurve(mesh, V, Wt, False, np.array(faces, dtype=np.int64))


def _other_side(mesh, F, P, v, j):
    """Corridor routed around the other side of vertex ``v`` touched at portal ``j``."""
    i, k = j - 1, j
    while i > 0 and v in mesh.faces[F[i - 1]]:
        i -= 1
    while k + 1 < len(F) and v in mesh.faces[F[k + 1]]:
        k += 1
    topo = _topo(mesh)
    a, b = F[i], F[k]
    best = None
    ia = int(np.flatnonzero(mesh.faces[a] == v)[0])
    for e0 in (int(mesh.face_edges[a, ia]), int(mesh.face_edges[a, (ia + 2) % 3])):
        if e0 == P[i]:
            continue
        steps, f, e = [], a, e0
        for _ in range(len(topo.vfaces[v]) + 1):
            g = topo.other_face(e, f)
            if g < 0:
                break
            steps.append((e, g))
            if g == b:
                best = steps
                break
            jg = int(np.flatnonzero(mesh.faces[g] == v)[0])
            e = [int(x) for x in (mesh.face_edges[g, jg], mesh.face_edges[g, (jg + 2) % 3]) if x != e][0]
            f = g
    if best is None:
        return None
    return F[: i + 1] + [g for _, g in best] + F[k + 1 :], P[:i] + [e for e, _ in best] + P[k:]


def _pull_best(mesh, p, q, F, P, tries=8):
    """String pulling, then rerouting around touched vertices while that helps."""
    c, touched = _pull(mesh, p, q, F, P)
    for _ in range(tries):
        better = None
        for v, j in touched:
            alt = _other_side(mesh, F, P, v, j)
            if alt is None:
                continue
            c2, t2 = _pull(mesh, p, q, *alt)
            if c2.length < c.length * (1 - 1e-13) and (better is None or c2.length < better[0].length):
                better = (c2, t2, alt)
        if better is None:
            break
        c, touched, (F, P) = better
    return c, touched


def geodesic_between(mesh: TriMesh, p, q, guide: PolyCurve | None = None, rings: int = 2) -> PolyCurve:
    """Locally shortest curve from ``p`` to ``q`` (points as ``(face, bary)``).

    Parameters
    ----------
    guide : PolyCurve, optional
        A curve from ``p`` to ``q``; the result is never longer than it.
    rings : int
        Size of the face neighbourhood searched for other corridors.
    """
    cands = []
    touched = True
    if guide is not None:
        F, P = _corridor(guide)
        c, touched = _pull_best(mesh, p, q, F, P)
        cands.append(c)
        base = F
    else:
        base = [p[0], q[0]]
    if touched:
        region = _topo(mesh).ring(base, rings)
        g = _graph_curve(mesh, p, q, region)
        if g is not None:
            F, P = _corridor(g)
            cands.append(_pull_best(mesh, p, q, F, P)[0])
    if not cands:
        raise ValueError("no path between the points inside the searched region")
    return min(cands, key=lambda c: c.length)


# -- tangent directions ---------------------------------------------------------------


def _rotation(mesh, e, g, f):
    """Complex rotation taking face ``g``'s layout to face ``f``'s across edge ``e``."""
    u, v = mesh.edges[e]
    Lf, Lg = mesh.layout[f] @ np.array([1.0, 1j]), mesh.layout[g] @ np.array([1.0, 1j])
    cf, cg = mesh.faces[f], mesh.faces[g]
    r = (Lf[cf == v][0] - Lf[cf == u][0]) / (Lg[cg == v][0] - Lg[cg == u][0])
    return r / abs(r)


def _direction(topo: _Topo, p, face, vec):
    """Unit tangent (complex) at ``p`` of a vector given in ``face``'s layout.

    Directions around a vertex are measured by angle along its fan and the
    total angle is rescaled to 2π, so a cone point behaves like a flat one.
    """
    mesh = topo.mesh
    kind, ident = _locate(mesh, *p)
    z = complex(vec[0], vec[1])
    if kind == "v":
        offs, total, closed = topo.fan(ident)
        i = int(np.flatnonzero(mesh.faces[face] == ident)[0])
        L = mesh.layout[face]
        a = complex(*(L[(i + 1) % 3] - L[i]))
        ang = math.atan2(_cross(a, z), (a.conjugate() * z).real)
        ang = min(max(ang, 0.0), _corner_angle(mesh, face, ident))
        theta = offs[face] + ang
        return np.exp(1j * (2 * math.pi * theta / total if closed else theta))
    if kind == "e":
        ef = mesh.edge_faces[ident]
        ref = int(min(x for x in ef if x >= 0))
        if face != ref:
            z *= _rotation(mesh, ident, face, ref)
    elif face != ident:
        shared = topo.face_edge_sets[face] & topo.face_edge_sets[ident]
        if shared:
            z *= _rotation(mesh, next(iter(shared)), face, ident)
    return z / abs(z)


def _end_vector(curve: PolyCurve, at_start: bool):
    """(face, vector) of the first nonzero segment leaving the given end."""
    d = curve.segment_vectors()
    n = np.hypot(d[:, 0], d[:, 1])
    tol = 1e-14 * max(n.sum(), 1e-300)
    idx = np.flatnonzero(n > tol)
    if len(idx) == 0:
        return None
    k = int(idx[0] if at_start else idx[-1])
    v = d[k] if at_start else -d[k]
    return int(curve.seg_faces[k]), v


def _tangent_3d(mesh, face, vec):
    X = mesh.embedding[mesh.faces[face]]
    L = mesh.layout[face]
    M = np.column_stack([X[1] - X[0], X[2] - X[0]]) @ np.linalg.inv(np.column_stack([L[1] - L[0], L[2] - L[0]]))
    t = M @ vec
    return t / np.linalg.norm(t)


# -- geodesic nets --------------------------------------------------------------------


@dataclass
class GeodesicNet:
    """Geodesic arcs and the nodes where their ends meet.

    ``nodes[i]`` is a list of ``(point, face, vector)`` outgoing tangents;
    breakpoints of a closed loop are nodes of degree two.
    """

    mesh: TriMesh = field(repr=False)
    edges: list = field(repr=False)
    nodes: list = field(repr=False)

    @property
    def length(self):
        return float(sum(e.length for e in self.edges))

    @property
    def junctions(self):
        """Nodes where three or more arc ends meet."""
        return [n[0][0] for n in self.nodes if len(n) >= 3]

    @property
    def residual(self):
        return stationarity_residual(self)

    @classmethod
    def from_arcs(cls, arcs, radius=None):
        """Cluster arc endpoints within ``radius``.

        The default is twice the Steiner point spacing of the default
        shortest-path graph (a fifth of the median edge).
        """
        if not arcs:
            raise ValueError("no arcs")
        mesh = arcs[0].mesh
        radius = 2 * mesh.median_edge / 5 if radius is None else float(radius)
        ends = []
        for a in arcs:
            for at_start in (True, False):
                ev = _end_vector(a, at_start)
                if ev is None:
                    continue
                p = _curve_point(a, 0 if at_start else len(a.verts) - 1)
                ends.append((p, ev[0], ev[1]))
        keys = [_key(mesh, p) for p, _, _ in ends]
        pos = None
        if mesh.embedding is not None:
            pos = np.array([p[1] @ mesh.embedding[mesh.faces[p[0]]] for p, _, _ in ends])
        parent = list(range(len(ends)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(ends)):
            for j in range(i):
                close = keys[i] == keys[j] or (pos is not None and np.linalg.norm(pos[i] - pos[j]) <= radius)
                if close:
                    parent[find(i)] = find(j)
        groups: dict = {}
        for i in range(len(ends)):
            groups.setdefault(find(i), []).append(ends[i])
        return cls(mesh, list(arcs), list(groups.values()))

    def to_json(self):
        def pt(p):
            return [int(p[0]), *(float(x) for x in p[1])]

        return {
            "edges": [[pt(_curve_point(e, i)) for i in range(len(e.verts))] for e in self.edges],
            "junctions": [pt(p) for p in self.junctions],
            "residual": self.residual,
            "length": self.length,
        }


def stationarity_residual(net: GeodesicNet) -> float:
    """Largest norm of the sum of outgoing unit tangents over the nodes of a net.

    Tangents meeting at one surface point are compared intrinsically; ends
    clustered from nearby points are compared as ambient vectors.
    """
    mesh = net.mesh
    topo = _topo(mesh)
    worst = 0.0
    for node in net.nodes:
        if len(node) < 2:
            continue
        if len({_key(mesh, p) for p, _, _ in node}) == 1:
            s = sum(_direction(topo, p, f, v) for p, f, v in node)
            r = abs(s)
        elif mesh.embedding is not None:
            r = float(np.linalg.norm(sum(_tangent_3d(mesh, f, v) for _, f, v in node)))
        else:
            raise ValueError("clustered ends on a mesh without embedding")
        worst = max(worst, float(r))
    return worst


# -- Birkhoff shortening --------------------------------------------------------------


class _Loop:
    """Break points and the arcs between them for one curve."""

    def __init__(self, mesh, pts, arcs, closed):
        self.mesh = mesh
        self.topo = _topo(mesh)
        self.pts = list(pts)
        self.arcs = list(arcs)
        self.lens = [a.length for a in self.arcs]
        self.closed = closed
        self.contracted = False
        self.converged = False
        self.last_drop = math.inf
        self.history = [self.length]

    @classmethod
    def from_curve(cls, curve: PolyCurve, n=DEFAULT_BREAKS):
        mesh = curve.mesh
        rem = PolyCurve(mesh, curve.verts, curve.weights, False, curve.seg_faces)
        pts, arcs = [_curve_point(rem, 0)], []
        for i in range(n - 1):
            head, m, rem = _split(rem, rem.length / (n - i))
            arcs.append(head)
            pts.append(m)
        arcs.append(rem)
        if not curve.closed:
            pts.append(_curve_point(rem, len(rem.verts) - 1))
        return cls(mesh, pts, arcs, bool(curve.closed))

    @property
    def n(self):
        return len(self.arcs)

    @property
    def length(self):
        return 0.0 if getattr(self, "contracted", False) else float(sum(self.lens))

    def _q(self, j):
        return self.pts[(j + 2) % len(self.pts)] if self.closed else self.pts[j + 2]

    def _half(self, parity):
        n = self.n
        last = n if self.closed else n - 1
        for j in range(parity, last, 2):
            j1 = (j + 1) % n
            p, q = self.pts[j], self._q(j)
            old = self.lens[j] + self.lens[j1]
            if old == 0.0 or _key(self.mesh, p) == _key(self.mesh, q):
                continue
            new = geodesic_between(self.mesh, p, q, guide=_join(self.arcs[j], self.arcs[j1]))
            L = new.length
            if L < old * (1 - 1e-13):
                head, m, tail = _split(new, L / 2)
                self.arcs[j], self.arcs[j1] = head, tail
                self.lens[j], self.lens[j1] = head.length, tail.length
                self.pts[j1] = m

    def _rebalance(self):
        scale = self.topo.median_edge
        n = self.n
        if max(self.lens) > 8 * scale and n < MAX_BREAKS:
            pts, arcs = [], []
            for j in range(n):
                head, m, tail = _split(self.arcs[j], self.lens[j] / 2)
                pts += [self.pts[j], m]
                arcs += [head, tail]
            if not self.closed:
                pts.append(self.pts[-1])
            self.pts, self.arcs = pts, arcs
        elif self.closed and n > 8 and n % 2 == 0 and self.length / n < 2 * scale:
            self.pts = self.pts[::2]
            self.arcs = [_join(self.arcs[j], self.arcs[j + 1]) for j in range(0, n, 2)]
        else:
            return
        self.lens = [a.length for a in self.arcs]

    def run(self, passes, tol=1e-9):
        for _ in range(passes):
            if self.contracted:
                return
            before = self.length
            self._half(0)
            self._half(1)
            after = self.length
            if after > before * (1 + 1e-12):
                raise AssertionError(f"shortening pass increased length {before} -> {after}")
            self.history.append(after)
            if self.closed and after < 4 * self.topo.median_edge:
                self.contracted = True
                self.history[-1] = 0.0
                return
            self.last_drop = (before - after) / before
            # a tenth of tol per pass keeps later passes within tol in total
            self.converged = self.last_drop <= 0.1 * tol
            self._rebalance()

    def curve(self) -> PolyCurve:
        c = self.arcs[0]
        for a in self.arcs[1:]:
            c = _join(c, a)
        return PolyCurve(self.mesh, c.verts, c.weights, self.closed, c.seg_faces)

    def residual(self):
        if self.contracted:
            return 0.0
        return stationarity_residual(self.net())

    def net(self) -> GeodesicNet:
        nodes = []
        n = self.n
        idx = range(n) if self.closed else range(1, n)
        for j in idx:
            out, back = _end_vector(self.arcs[j], True), _end_vector(self.arcs[j - 1], False)
            if out is None or back is None:
                continue
            p = self.pts[j]
            nodes.append([(p, *out), (p, *back)])
        return GeodesicNet(self.mesh, list(self.arcs), nodes)


@dataclass
class ShortenResult:
    """Outcome of :func:`birkhoff_shorten`.

    Attributes
    ----------
    curve : PolyCurve
        The shortened curve (a single point when ``contracted``).
    lengths : list
        Length before the first pass and after every pass.
    """

    curve: PolyCurve = field(repr=False)
    length: float
    lengths: list = field(repr=False)
    contracted: bool
    converged: bool
    passes: int
    breaks: int
    residual: float
    loop: _Loop = field(repr=False, default=None)

    def to_json(self):
        return {
            "length": self.length,
            "lengths": [float(x) for x in self.lengths],
            "contracted": self.contracted,
            "converged": self.converged,
            "passes": self.passes,
            "breaks": self.breaks,
            "residual": self.residual,
        }


def _result(loop: _Loop) -> ShortenResult:
    if loop.contracted:
        p = loop.pts[0]
        curve = _make_curve(loop.mesh, [p], [], closed=True)
    else:
        curve = loop.curve()
    return ShortenResult(
        curve, loop.length, list(loop.history), loop.contracted, loop.converged, len(loop.history) - 1, loop.n, loop.residual(), loop
    )


def birkhoff_shorten(curve: PolyCurve, steps: int = 100, n: int = DEFAULT_BREAKS, tol: float = 1e-9, until_converged: bool = True) -> ShortenResult:
    """Discrete Birkhoff curve shortening.

    The curve is cut into ``n`` arcs of equal length.  A pass replaces the
    pairs of arcs starting at even break points by a geodesic between their
    outer ends and moves the middle break point to its midpoint, then does
    the same from the odd break points.  Replacements are only accepted when
    shorter, so the length never increases.  Open curves keep their ends.

    Parameters
    ----------
    steps : int
        Maximum number of passes.
    n : int
        Initial number of break points; doubled while an arc is longer than
        eight median edges and (for closed curves) halved while arcs are
        shorter than two median edges.
    tol : float
        Relative length change per pass below which the curve counts as
        converged.
    until_converged : bool
        Stop as soon as the curve has converged.

    Returns
    -------
    ShortenResult
        Closed curves shorter than four median edges are reported as
        contracted points.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if n < 4 or n % 2:
        raise ValueError("n must be an even number of at least 4")
    if len(curve.seg_faces) == 0 or curve.length == 0.0:
        raise ValueError("curve has no length")
    loop = _Loop.from_curve(curve, n)
    for _ in range(steps):
        loop.run(1, tol)
        if loop.contracted or (until_converged and loop.converged):
            break
    return _result(loop)


# -- min-max extraction ---------------------------------------------------------------


def _locate_sample(mesh, topo, x, near):
    """Closest surface point to ambient position ``x`` among faces around ``near``."""
    faces = topo.ring(topo.vfaces[int(near)], 1)
    best = None
    for f in faces:
        P = mesh.embedding[mesh.faces[f]]
        A = np.column_stack([P[1] - P[0], P[2] - P[0]])
        uv, *_ = np.linalg.lstsq(A, x - P[0], rcond=None)
        b = np.clip(np.r_[1 - uv.sum(), uv], 0.0, None)
        b /= b.sum()
        d = np.linalg.norm(b @ P - x)
        if best is None or d < best[0]:
            best = (d, int(f), b)
    b = np.where(best[2] < _EPS, 0.0, best[2])
    return best[1], b / b.sum()


def _loop_from_samples(mesh, c, n):
    """Rebuild a mesh curve through the samples of a curve that has no source."""
    topo = _topo(mesh)
    idx = np.unique(np.round(np.linspace(0, c.n - 1, n + 1)).astype(int))
    if c.pos is not None:
        pts = [_locate_sample(mesh, topo, c.pos[i], c.near[i]) for i in idx]
    else:
        pts = []
        for i in idx:
            v = int(c.near[i])
            f = int(topo.vfaces[v][0])
            pts.append((f, (mesh.faces[f] == v).astype(float)))
    keep = [pts[0]]
    for p in pts[1:]:
        if _key(mesh, p) != _key(mesh, keep[-1]):
            keep.append(p)
    if c.closed and len(keep) > 1 and _key(mesh, keep[-1]) != _key(mesh, keep[0]):
        keep.append(keep[0])
    if len(keep) < (3 if c.closed else 2):
        return None
    arcs = []
    for p, q in zip(keep[:-1], keep[1:]):
        arc = None
        for rings in (2, 4, 8, 64):
            try:
                arc = geodesic_between(mesh, p, q, rings=rings)
                break
            except ValueError:
                continue
        arcs.append(arc)
    pts = keep[:-1] if c.closed else keep
    if c.closed and len(arcs) % 2:
        # an even number of arcs keeps the two half passes disjoint
        head, m, tail = _split(arcs[-1], arcs[-1].length / 2)
        arcs[-1:] = [head, tail]
        pts.append(m)
    return _Loop(mesh, pts, arcs, bool(c.closed))


@dataclass
class MinMaxTrace:
    """Record of a min-max run.

    Attributes
    ----------
    iterations : list of (float, int)
        Largest tuple length and the index of the tuple attaining it, before
        the first pass and after every synchronized pass.
    limit_candidate : LoopTuple
        The tuple attaining the maximum at the end, resampled.
    converged : bool
        Whether every curve of that tuple reached a shortening fixed point.
    """

    iterations: list
    limit_candidate: LoopTuple = field(repr=False)
    converged: bool
    limit: list = field(repr=False)
    net: GeodesicNet = field(repr=False)
    initial_max: float
    argmax: int
    param: float
    runtime: float = 0.0

    @property
    def length(self):
        return float(sum(c.length for c in self.limit))

    @property
    def residual(self):
        return stationarity_residual(self.net) if self.limit else 0.0

    @property
    def ok(self):
        return self.length <= self.initial_max * (1 + 1e-12)

    def to_json(self):
        return {
            "length": self.length,
            "initial_max": self.initial_max,
            "ok": self.ok,
            "converged": self.converged,
            "residual": self.residual,
            "argmax": self.argmax,
            "param": self.param,
            "iterations": [[float(L), int(i)] for L, i in self.iterations],
            "runtime": self.runtime,
            "net": self.net.to_json() if self.limit else None,
        }


def minmax_extract(family: GammaFamily, iterations: int = 100, tol: float = 1e-9, n: int = DEFAULT_BREAKS) -> MinMaxTrace:
    """Shorten every tuple of a sweepout in step and follow the longest one.

    Each iteration applies one Birkhoff pass to every curve of every tuple;
    a curve is frozen once a pass shortens it by a relative amount below
    ``tol``.
    Tuple lengths never increase, so a tuple whose last known length is
    below the current maximum cannot attain it; such tuples are brought up
    to date only when they could, which yields the same maxima as stepping
    all of them.  The run stops when the longest tuple has converged or after
    ``iterations`` passes.

    Raises
    ------
    ValueError
        If the family is not a sweepout (Almgren degree 0, or no filling data
        and nonzero end tuples).
    """
    import time

    t0 = time.perf_counter()
    tuples = family.tuples
    mesh = next((t.mesh for t in tuples if t.mesh is not None), None)
    if mesh is None:
        raise ValueError("family is not attached to a mesh")
    if family.fillings is not None:
        if abs(almgren_degree(family)) < 0.5:
            raise ValueError("not a sweepout: Almgren degree is 0")
    elif tuples[0].length > 0 or tuples[-1].length > 0:
        raise ValueError("not a sweepout: end tuples are not points")

    def build(tup):
        loops = []
        for c in tup.curves:
            if c.length == 0.0:
                continue
            if c.source is not None and len(c.source.seg_faces):
                loops.append(_Loop.from_curve(c.source, n))
            else:
                lp = _loop_from_samples(mesh, c, n)
                if lp is not None:
                    loops.append(lp)
        return loops

    def settled(lp):
        # frozen once a pass gains less than tol: near-equatorial loops are
        # unstable and would otherwise drift off and contract one by one
        return lp.contracted or lp.last_drop <= tol

    states = [build(t) for t in tuples]
    cur = [sum(lp.length for lp in s) for s in states]
    stage = [0] * len(states)
    initial_max = max(max(family.lengths()), max(cur))
    heap = [(-L, i) for i, L in enumerate(cur)]
    heapq.heapify(heap)
    trace = [(cur[heap[0][1]], heap[0][1])]
    converged = False
    for k in range(1, iterations + 1):
        while True:
            _, i = heap[0]
            if stage[i] == k:
                break
            heapq.heappop(heap)
            for lp in states[i]:
                for _ in range(k - stage[i]):
                    if settled(lp):
                        break
                    lp.run(1, tol)
            stage[i] = k
            cur[i] = sum(lp.length for lp in states[i])
            heapq.heappush(heap, (-cur[i], i))
        best = heap[0][1]
        trace.append((cur[best], best))
        if all(settled(lp) for lp in states[best]):
            converged = True
            break
    best = trace[-1][1]
    loops = [lp for lp in states[best] if not lp.contracted]
    limit = [lp.curve() for lp in loops]
    curves = [resample(c) for c in limit]
    k = tuples[best].k
    while len(curves) < k:
        curves.append(constant_curve(None if mesh.embedding is None else mesh.embedding[0], near=0))
    nodes = []
    for lp in loops:
        nodes += lp.net().nodes
    net = GeodesicNet(mesh, [a for lp in loops for a in lp.arcs], nodes)
    out = MinMaxTrace(
        trace, LoopTuple(curves, mesh), converged, limit, net, float(initial_max), int(best), float(family.params[best]), time.perf_counter() - t0
    )
    log.info("min-max length %.6g (initial max %.6g) after %d passes", out.length, initial_max, len(trace) - 1)
    return out
