"""Approximate intrinsic distances on a Steiner-refined edge graph.

Every edge gets ``m`` interior Steiner points; all points on the boundary of
a face (corners included) are joined pairwise by straight segments measured
in that face's layout.  Dijkstra on this graph gives upper bounds on the
intrinsic distance that decrease as ``m`` grows, and shortest graph paths
are realizable curves on the surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .curves import PolyCurve
from .mesh import MeshError, TriMesh
from .morse import PLFunction

__all__ = ["distance_to_boundary", "SteinerGraph", "steiner_graph", "distance_function", "shortest_path", "straighten", "vertex_distances"]


@dataclass(frozen=True)
class SteinerGraph:
    """Sparse shortest-path graph plus the geometry of its nodes.

    Node ``v < V`` is mesh vertex ``v``; node ``V + e * m + k`` is the
    ``(k + 1)``-th Steiner point of edge ``e`` at parameter ``(k + 1) / (m + 1)``
    from the lower-numbered endpoint.
    """

    mesh: TriMesh
    m: int
    matrix: csr_matrix
    face_of: csr_matrix  # face (+1) realizing each graph edge
    face_nodes: np.ndarray  # (F, 3 + 3m) nodes on the boundary of each face
    face_pos: np.ndarray  # (F, 3 + 3m, 2) their layout coordinates

    @property
    def n_nodes(self):
        return self.matrix.shape[0]

    def node_points(self, nodes):
        """Vertex/weight description of graph nodes as surface points."""
        mesh, V, m = self.mesh, self.mesh.n_vertices, self.m
        nodes = np.asarray(nodes, dtype=np.int64)
        verts = np.zeros((len(nodes), 3), dtype=np.int64)
        weights = np.zeros((len(nodes), 3))
        is_v = nodes < V
        verts[is_v] = nodes[is_v, None]
        weights[is_v, 0] = 1.0
        e, k = np.divmod(nodes[~is_v] - V, max(m, 1))
        t = (k + 1) / (m + 1)
        verts[~is_v, 0] = mesh.edges[e, 0]
        verts[~is_v, 1] = mesh.edges[e, 1]
        verts[~is_v, 2] = mesh.edges[e, 0]
        weights[~is_v, 0] = 1 - t
        weights[~is_v, 1] = t
        return verts, weights


def _face_nodes(mesh: TriMesh, m: int, faces=None):
    V = mesh.n_vertices
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    lay = mesh.layout[faces]
    tri = mesh.faces[faces]
    nodes = [tri]
    pos = [lay]
    t = np.arange(1, m + 1) / (m + 1)
    for i in range(3):
        e = mesh.face_edges[faces, i]
        forward = tri[:, i] == mesh.edges[e, 0]
        # Steiner k sits at t_k from edges[e, 0]; in face order it may run backwards
        tt = np.where(forward[:, None], t[None, :], 1 - t[None, :])
        p0, p1 = lay[:, i], lay[:, (i + 1) % 3]
        nodes.append(V + e[:, None] * m + np.arange(m)[None, :])
        pos.append(p0[:, None, :] + tt[..., None] * (p1 - p0)[:, None, :])
    return np.concatenate(nodes, axis=1), np.concatenate(pos, axis=1)


def steiner_graph(mesh: TriMesh, m: int = 4) -> SteinerGraph:
    if m < 0:
        raise ValueError("refinement must be non-negative")
    return _steiner_cached(mesh, int(m))


def _pair_graph(mesh, m, faces=None):
    fn, fp = _face_nodes(mesh, m, faces)
    face_ids = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    k = fn.shape[1]
    iu, ju = np.triu_indices(k, 1)
    a = fn[:, iu].ravel()
    b = fn[:, ju].ravel()
    d = np.linalg.norm(fp[:, iu] - fp[:, ju], axis=2).ravel()
    face = np.repeat(face_ids, len(iu))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    N = mesh.n_vertices + mesh.n_edges * m
    key = lo * N + hi
    order = np.lexsort((d, key))
    key, d, face, lo, hi = key[order], d[order], face[order], lo[order], hi[order]
    first = np.r_[True, key[1:] != key[:-1]]
    lo, hi, d, face = lo[first], hi[first], d[first], face[first]
    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    W = csr_matrix((np.concatenate([d, d]), (rows, cols)), shape=(N, N))
    Fm = csr_matrix((np.concatenate([face, face]) + 1.0, (rows, cols)), shape=(N, N))
    return W, Fm, fn, fp


@lru_cache(maxsize=8)
def _steiner_cached(mesh, m):
    W, Fm, fn, fp = _pair_graph(mesh, m)
    return SteinerGraph(mesh, m, W, Fm, fn, fp)


def distance_to_boundary(mesh: TriMesh, faces, m: int = 2):
    """Distance inside the union of ``faces`` to its boundary edges, at its vertices.

    Paths are confined to the given faces.  Returns an array over all mesh
    vertices with ``inf`` outside the region.
    """
    faces = np.asarray(faces, dtype=np.int64)
    W, _, fn, _ = _pair_graph(mesh, m, faces)
    inside = np.zeros(mesh.n_faces, bool)
    inside[faces] = True
    ef = mesh.edge_faces
    n_in = inside[ef[:, 0]].astype(int) + np.where(ef[:, 1] >= 0, inside[np.maximum(ef[:, 1], 0)], False)
    bedges = np.flatnonzero(n_in == 1)
    src = np.concatenate([mesh.edges[bedges].ravel(), (mesh.n_vertices + bedges[:, None] * m + np.arange(m)).ravel()])
    src = np.unique(src)
    if len(src) == 0:
        raise MeshError("region has no boundary")
    D = dijkstra(W, directed=False, indices=src, min_only=True)
    return D[: mesh.n_vertices]


def _with_point_sources(g: SteinerGraph, points):
    """Extend the graph by one node per (face, barycentric) source point."""
    if not points:
        return g.matrix, []
    N = g.n_nodes
    rows, cols, vals, ids = [], [], [], []
    for i, (face, bary) in enumerate(points):
        node = N + i
        p = np.asarray(bary, float) @ g.mesh.layout[face]
        d = np.linalg.norm(g.face_pos[face] - p, axis=1)
        rows += [node] * len(d) + list(g.face_nodes[face])
        cols += list(g.face_nodes[face]) + [node] * len(d)
        # zero weights vanish from sparse graphs; keep sources at coincident nodes reachable
        dd = np.maximum(d, 1e-300)
        vals += list(dd) + list(dd)
        ids.append(node)
    M = len(points)
    W = g.matrix.tocoo()
    W = csr_matrix(
        (np.r_[W.data, vals], (np.r_[W.row, rows], np.r_[W.col, cols])),
        shape=(N + M, N + M),
    )
    return W, ids


def vertex_distances(mesh: TriMesh, sources, m: int = 4, limit=np.inf):
    """Graph distances from each vertex in ``sources`` to every vertex (shape (S, V))."""
    g = steiner_graph(mesh, m)
    D = dijkstra(g.matrix, directed=False, indices=np.asarray(sources), limit=limit)
    return D[:, : mesh.n_vertices]


def distance_function(mesh: TriMesh, source, m: int = 4) -> PLFunction:
    """Approximate distance to ``source`` as a PL function.

    Parameters
    ----------
    source : int, (face, barycentric) pair, or list of these
        Vertex id(s) or surface point(s); several sources give the distance to
        the nearest one.
    m : int
        Steiner points per edge.

    Returns
    -------
    PLFunction
        Distances at the mesh vertices.
    """
    g = steiner_graph(mesh, m)
    srcs = source if isinstance(source, list) else [source]
    vert_src = [int(s) for s in srcs if np.isscalar(s)]
    pt_src = [s for s in srcs if not np.isscalar(s)]
    W, ids = _with_point_sources(g, pt_src)
    D = dijkstra(W, directed=False, indices=vert_src + ids, min_only=True)
    if np.isinf(D).any():
        bad = int(np.flatnonzero(np.isinf(D))[0])
        raise MeshError("unreachable part of the mesh", (bad,) if bad < mesh.n_vertices else None)
    vals = D[: mesh.n_vertices].copy()
    for v in vert_src:
        vals[v] = 0.0
    return PLFunction(mesh, vals)


def shortest_path(mesh: TriMesh, a: int, b: int, m: int = 4, straight: bool = True) -> PolyCurve:
    """Shortest Steiner-graph path between vertices ``a`` and ``b``."""
    g = steiner_graph(mesh, m)
    _, pred = dijkstra(g.matrix, directed=False, indices=a, return_predecessors=True)
    if pred[b] < 0 and a != b:
        raise MeshError("vertices are not connected", (a, b))
    nodes = [b]
    while nodes[-1] != a:
        nodes.append(int(pred[nodes[-1]]))
    nodes = np.array(nodes[::-1])
    faces = np.asarray(g.face_of[nodes[:-1], nodes[1:]]).ravel().astype(np.int64) - 1
    verts, weights = g.node_points(nodes)
    curve = PolyCurve(mesh, verts, weights, False, faces)
    return straighten(curve) if straight else curve


def _edge_of_point(mesh, verts, weights):
    """Edge id and parameter for points strictly inside an edge, else (-1, nan)."""
    pos = weights > 1e-15
    n = pos.sum()
    if n != 2:
        return -1, np.nan
    (i, j) = np.flatnonzero(pos)
    u, v = int(verts[i]), int(verts[j])
    if u == v:
        return -1, np.nan
    e = mesh.edge_id(u, v)
    t = weights[j] if u < v else weights[i]
    return e, float(t)


def straighten(curve: PolyCurve, sweeps: int = 50, tol: float = 1e-13) -> PolyCurve:
    """Slide interior edge points along their edges to shorten the curve.

    Each interior point lying inside an edge that separates its two segment
    faces is moved to where the unfolded straight line through its
    neighbours crosses that edge (clamped to the edge).  Vertices stay fixed.
    """
    mesh = curve.mesh
    verts, weights = curve.verts.copy(), curve.weights.copy()
    faces = curve.seg_faces
    n = len(verts)
    if n < 3:
        return curve
    from .curves import layout_positions

    idx = range(1, n - 1) if not curve.closed else range(0, n - 1)
    for _ in range(sweeps):
        moved = 0.0
        for i in idx:
            prv = i - 1 if i > 0 else n - 2
            nxt = i + 1
            f, g = faces[prv], faces[i]
            e, t = _edge_of_point(mesh, verts[i], weights[i])
            if e < 0 or f == g or e not in mesh.face_edges[f] or e not in mesh.face_edges[g]:
                continue
            u, v = mesh.edges[e]
            P = layout_positions(mesh, [f], verts[prv : prv + 1], weights[prv : prv + 1])[0]
            Q = layout_positions(mesh, [g], verts[nxt : nxt + 1], weights[nxt : nxt + 1])[0]
            U_f, V_f = _corner(mesh, f, u), _corner(mesh, f, v)
            U_g, V_g = _corner(mesh, g, u), _corner(mesh, g, v)
            Qf = _unfold(Q, U_g, V_g, U_f, V_f)
            # intersect segment P Qf with the edge line U_f V_f
            d = V_f - U_f
            r = Qf - P
            den = d[0] * r[1] - d[1] * r[0]
            if abs(den) <= 1e-9 * np.hypot(*d) * np.hypot(*r):
                continue
            w = P - U_f
            s = (w[0] * r[1] - w[1] * r[0]) / den
            s = min(max(s, 1e-9), 1 - 1e-9)
            if abs(s - t) > tol:
                moved = max(moved, abs(s - t))
                verts[i] = (u, v, u)
                weights[i] = (1 - s, s, 0.0)
                if curve.closed and i == 0:
                    verts[-1], weights[-1] = verts[0], weights[0]
        if moved < 1e-10:
            break
    return PolyCurve(mesh, verts, weights, curve.closed, faces)


def _corner(mesh, f, v):
    return mesh.layout[f, int(np.flatnonzero(mesh.faces[f] == v)[0])]


def _unfold(Q, U1, V1, U2, V2):
    """Map ``Q`` by the rotation and translation taking segment U1V1 to U2V2.

    Both layouts are counter-clockwise and neighbouring faces are coherently
    oriented, so the image lands on the far side of the edge.
    """
    d1, d2 = V1 - U1, V2 - U2
    L = np.hypot(*d1)
    e1 = d1 / L
    n1 = np.array([-e1[1], e1[0]])
    e2 = d2 / np.hypot(*d2)
    n2 = np.array([-e2[1], e2[0]])
    q = Q - U1
    a, b = q @ e1, q @ n1
    return U2 + a * e2 + b * n2
