"""Triangulated surfaces with an intrinsic piecewise-flat metric.

A :class:`TriMesh` is pure combinatorics plus one positive length per edge.
Everything downstream (areas, curve lengths, distances) is computed from the
edge lengths through per-face planar layouts, so rescaling the lengths
rescales every derived length exactly.  A 3-space embedding is optional and
is only consulted for I/O, plotting and ambient distance terms.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "MeshError",
    "TriMesh",
    "Region",
    "load_mesh",
    "genus",
    "scale_metric",
    "barycentric_subdivision",
    "cap_boundary",
    "mesh_summary",
]

# faces whose Heron area falls below this fraction of (longest edge)^2 are rejected
DEGENERATE_TOL = 1e-12


class MeshError(ValueError):
    """Invalid triangle complex.  ``simplex`` names the offending vertices."""

    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = None if simplex is None else tuple(int(v) for v in simplex)

    def to_json(self):
        return {"error": "MeshError", "message": str(self), "simplex": self.simplex}


def _union_find(n, pairs):
    if len(pairs) == 0:
        return np.arange(n)
    pairs = np.asarray(pairs)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(g, directed=False)[1]


class TriMesh:
    """Connected, orientable triangulated 2-manifold with per-edge lengths.

    Parameters
    ----------
    triangles : array_like, shape (F, 3)
        Vertex triples (0-based).  Faces are reoriented coherently on load.
    lengths : array_like or dict, optional
        Either an array aligned with :attr:`edges` (sorted vertex pairs in
        lexicographic order) or a mapping ``(u, v) -> length``.  When omitted,
        lengths are induced by ``embedding``.
    embedding : array_like, shape (V, 3), optional
        Vertex positions; used for lengths only if ``lengths`` is omitted.

    Raises
    ------
    MeshError
        Non-manifold edges or vertices, non-orientable or disconnected
        complexes, violated triangle inequalities and degenerate faces.
    """

    def __init__(self, triangles, lengths=None, embedding=None, n_vertices=None, meta=None):
        self.meta = dict(meta or {})
        faces = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(faces) == 0:
            raise MeshError("mesh has no faces")
        if n_vertices is None:
            n_vertices = int(faces.max()) + 1
        self.n_vertices = int(n_vertices)
        for f in faces:
            if len(set(f.tolist())) != 3:
                raise MeshError("face repeats a vertex", f)
        used = np.zeros(self.n_vertices, bool)
        used[faces.ravel()] = True
        if not used.all():
            raise MeshError("isolated vertex", np.flatnonzero(~used)[:1])

        self.embedding = None if embedding is None else np.asarray(embedding, float).reshape(-1, 3)
        pairs = np.sort(np.stack([faces, np.roll(faces, -1, axis=1)], axis=2).reshape(-1, 2), axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        # face_edges[f, i] is the edge (faces[f, i], faces[f, i + 1])
        self.face_edges = inverse.reshape(-1, 3)
        self._edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}

        counts = np.bincount(inverse, minlength=len(self.edges))
        if counts.max() > 2:
            bad = self.edges[int(np.argmax(counts))]
            raise MeshError("edge shared by more than two faces", bad)
        ef = np.full((len(self.edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        fid = order // 3
        slot = np.zeros(len(order), dtype=np.int64)
        sorted_e = inverse[order]
        first = np.r_[True, sorted_e[1:] != sorted_e[:-1]]
        slot[~first] = 1
        ef[sorted_e, slot] = fid
        self.edge_faces = ef

        self.faces = self._orient(faces)
        self._check_vertex_links()
        if connected_components(self._face_graph(), directed=False)[0] != 1:
            raise MeshError("mesh is not connected")

        if lengths is None:
            if self.embedding is None:
                raise MeshError("need either edge lengths or an embedding")
            d = self.embedding[self.edges[:, 0]] - self.embedding[self.edges[:, 1]]
            lengths = np.sqrt((d * d).sum(axis=1))
        elif isinstance(lengths, dict):
            arr = np.full(len(self.edges), np.nan)
            for (a, b), val in lengths.items():
                key = (min(a, b), max(a, b))
                if key in self._edge_index:
                    arr[self._edge_index[key]] = val
            if np.isnan(arr).any():
                raise MeshError("missing edge length", self.edges[np.flatnonzero(np.isnan(arr))[0]])
            lengths = arr
        self.lengths = np.asarray(lengths, dtype=float).copy()
        if self.lengths.shape != (len(self.edges),):
            raise MeshError("length array does not match edge count")
        if not np.all(self.lengths > 0):
            raise MeshError("non-positive edge length", self.edges[np.flatnonzero(~(self.lengths > 0))[0]])
        self.lengths.setflags(write=False)
        self._build_metric()

    # -- combinatorics -------------------------------------------------------

    def _face_graph(self):
        inner = self.edge_faces[self.edge_faces[:, 1] >= 0]
        F = len(self.face_edges)
        return coo_matrix((np.ones(len(inner)), (inner[:, 0], inner[:, 1])), shape=(F, F))

    def _orient(self, faces):
        faces = faces.copy()
        F = len(faces)
        nbr = [[] for _ in range(F)]
        for f, g in self.edge_faces[self.edge_faces[:, 1] >= 0]:
            nbr[f].append(g)
            nbr[g].append(f)

        def directed(f):
            a, b, c = faces[f]
            return {(a, b), (b, c), (c, a)}

        seen = np.zeros(F, bool)
        for root in range(F):
            if seen[root]:
                continue
            seen[root] = True
            stack = [root]
            while stack:
                f = stack.pop()
                df = directed(f)
                for g in nbr[f]:
                    # coherent neighbours traverse the shared edge in opposite directions
                    clash = bool(df & directed(g))
                    if seen[g]:
                        if clash:
                            raise MeshError("non-orientable surface", faces[g])
                        continue
                    if clash:
                        faces[g] = faces[g][::-1]
                    seen[g] = True
                    stack.append(g)
        # face_edges must follow the new vertex order
        fe = np.empty_like(self.face_edges)
        for i in range(3):
            a = np.minimum(faces[:, i], faces[:, (i + 1) % 3])
            b = np.maximum(faces[:, i], faces[:, (i + 1) % 3])
            fe[:, i] = [self._edge_index[(int(x), int(y))] for x, y in zip(a, b)]
        self.face_edges = fe
        return faces

    def _check_vertex_links(self):
        F = len(self.faces)
        nodes = np.arange(3 * F).reshape(F, 3)
        pairs = []
        for e, (f, g) in enumerate(self.edge_faces):
            if g < 0:
                continue
            for v in self.edges[e]:
                i = int(np.flatnonzero(self.faces[f] == v)[0])
                j = int(np.flatnonzero(self.faces[g] == v)[0])
                pairs.append((nodes[f, i], nodes[g, j]))
        labels = _union_find(3 * F, pairs)
        fans = {}
        for f in range(F):
            for i in range(3):
                fans.setdefault(int(self.faces[f, i]), set()).add(int(labels[nodes[f, i]]))
        for v, s in fans.items():
            if len(s) > 1:
                raise MeshError("non-manifold vertex (link is not a single fan)", (v,))

    def edge_id(self, u, v):
        return self._edge_index[(min(u, v), max(u, v))]

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_faces[:, 1] < 0)

    def boundary_loops(self):
        """Boundary cycles as ordered vertex lists, following face orientation."""
        nxt = {}
        for e in self.boundary_edges:
            f = self.edge_faces[e, 0]
            i = int(np.flatnonzero(self.face_edges[f] == e)[0])
            a, b = int(self.faces[f, i]), int(self.faces[f, (i + 1) % 3])
            nxt[a] = b
        loops, seen = [], set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def vertex_faces(self):
        """List of incident face ids per vertex."""
        out = [[] for _ in range(self.n_vertices)]
        for f, tri in enumerate(self.faces):
            for v in tri:
                out[v].append(f)
        return out

    def face_neighbors(self):
        """(F, 3) array: face across edge ``face_edges[f, i]`` or -1."""
        ef = self.edge_faces[self.face_edges]
        me = np.arange(self.n_faces)[:, None]
        return np.where(ef[..., 0] == me, ef[..., 1], ef[..., 0])

    # -- metric --------------------------------------------------------------

    def _build_metric(self):
        l01 = self.lengths[self.face_edges[:, 0]]
        l12 = self.lengths[self.face_edges[:, 1]]
        l20 = self.lengths[self.face_edges[:, 2]]
        bad = (l01 >= l12 + l20) | (l12 >= l01 + l20) | (l20 >= l01 + l12)
        if bad.any():
            f = int(np.flatnonzero(bad)[0])
            raise MeshError(
                f"triangle inequality violated: {l01[f]:.6g}, {l12[f]:.6g}, {l20[f]:.6g}", self.faces[f]
            )
        s = 0.5 * (l01 + l12 + l20)
        area = np.sqrt(np.maximum(s * (s - l01) * (s - l12) * (s - l20), 0.0))
        lmax = np.maximum(np.maximum(l01, l12), l20)
        tiny = area < DEGENERATE_TOL * lmax**2
        if tiny.any():
            raise MeshError("degenerate face", self.faces[int(np.flatnonzero(tiny)[0])])
        self.face_areas = area
        x = (l01**2 + l20**2 - l12**2) / (2 * l01)
        y = np.sqrt(np.maximum(l20**2 - x**2, 0.0))
        lay = np.zeros((self.n_faces, 3, 2))
        lay[:, 1, 0] = l01
        lay[:, 2, 0] = x
        lay[:, 2, 1] = y
        self.layout = lay

    @property
    def area(self):
        return float(self.face_areas.sum())

    @property
    def boundary_length(self):
        return float(self.lengths[self.boundary_edges].sum())

    @property
    def median_edge(self):
        return float(np.median(self.lengths))

    def with_lengths(self, lengths, embedding=False):
        """Same combinatorics (and embedding unless given), new edge lengths.

        The topology checks are not repeated; only the metric is rebuilt.
        """
        lengths = np.asarray(lengths, dtype=float).copy()
        if lengths.shape != (len(self.edges),):
            raise MeshError("length array does not match edge count")
        if not np.all(lengths > 0):
            raise MeshError("non-positive edge length", self.edges[np.flatnonzero(~(lengths > 0))[0]])
        out = TriMesh.__new__(TriMesh)
        out.__dict__.update(
            {k: self.__dict__[k] for k in ("meta", "n_vertices", "edges", "face_edges", "_edge_index", "edge_faces", "faces")}
        )
        out.meta = dict(self.meta)
        out.embedding = self.embedding if embedding is False else embedding
        lengths.setflags(write=False)
        out.lengths = lengths
        out._build_metric()
        return out

    def __repr__(self):
        return (
            f"TriMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces}, "
            f"genus={genus(self)}, area={self.area:.6g})"
        )


def genus(mesh: TriMesh) -> int:
    """Genus from the Euler characteristic and boundary loop count."""
    b = len(mesh.boundary_loops())
    g2 = 2 - b - mesh.euler_characteristic
    return g2 // 2


def scale_metric(mesh: TriMesh, lam: float) -> TriMesh:
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    emb = None if mesh.embedding is None else mesh.embedding * lam
    meta = dict(mesh.meta)
    if "uv" in meta and "period" in meta and "angles" not in meta:
        meta["uv"] = meta["uv"] * lam
        meta["period"] = tuple(p * lam for p in meta["period"])
    return TriMesh(mesh.faces, mesh.lengths * lam, emb, mesh.n_vertices, meta)


def mesh_summary(mesh: TriMesh) -> dict:
    return {
        "V": mesh.n_vertices,
        "E": mesh.n_edges,
        "F": mesh.n_faces,
        "genus": genus(mesh),
        "boundary_loops": len(mesh.boundary_loops()),
        "area": mesh.area,
    }


# -- regions ------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Subset of faces of a mesh, with its induced boundary."""

    mesh: TriMesh
    faces: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "faces", np.unique(np.asarray(self.faces, dtype=np.int64)))

    @classmethod
    def whole(cls, mesh):
        return cls(mesh, np.arange(mesh.n_faces))

    @property
    def mask(self):
        m = np.zeros(self.mesh.n_faces, bool)
        m[self.faces] = True
        return m

    @property
    def area(self):
        return float(self.mesh.face_areas[self.faces].sum())

    @property
    def boundary_edges(self):
        """Edges with exactly one incident face inside the region."""
        m = self.mask
        ef = self.mesh.edge_faces
        inside = np.where(ef >= 0, m[np.maximum(ef, 0)], False)
        return np.flatnonzero(inside.sum(axis=1) == 1)

    @property
    def boundary_length(self):
        return float(self.mesh.lengths[self.boundary_edges].sum())

    @property
    def vertices(self):
        return np.unique(self.mesh.faces[self.faces])

    @property
    def boundary_vertices(self):
        return np.unique(self.mesh.edges[self.boundary_edges])

    def interface_length(self, other: "Region") -> float:
        shared = np.intersect1d(self.boundary_edges, other.boundary_edges)
        return float(self.mesh.lengths[shared].sum())

    def topology(self):
        """(components, euler characteristic, boundary loops, genus).

        Vertices where the region is pinched (several face fans meet at one
        vertex) are split, so the result describes the manifold obtained by
        separating the fans.
        """
        mesh, faces = self.mesh, self.faces
        n = len(faces)
        if n == 0:
            return 0, 0, 0, 0
        local = {int(f): i for i, f in enumerate(faces)}
        m = self.mask
        nodes = np.arange(3 * n).reshape(n, 3)
        fan_pairs, comp_pairs = [], []
        for e in np.unique(mesh.face_edges[faces].ravel()):
            f, g = mesh.edge_faces[e]
            if g < 0 or not (m[f] and m[g]):
                continue
            comp_pairs.append((local[f], local[g]))
            for v in mesh.edges[e]:
                i = int(np.flatnonzero(mesh.faces[f] == v)[0])
                j = int(np.flatnonzero(mesh.faces[g] == v)[0])
                fan_pairs.append((nodes[local[f], i], nodes[local[g], j]))
        fan = _union_find(3 * n, fan_pairs)
        comp = _union_find(n, comp_pairs)
        n_comp = len(np.unique(comp))
        V = len(np.unique(fan))
        E = len(np.unique(mesh.face_edges[faces].ravel()))
        chi = V - E + n
        bpairs = []
        bset = set(self.boundary_edges.tolist())
        for f in faces:
            for i in range(3):
                if int(mesh.face_edges[f, i]) in bset:
                    bpairs.append((fan[nodes[local[int(f)], i]], fan[nodes[local[int(f)], (i + 1) % 3]]))
        if bpairs:
            bl = _union_find(3 * n, bpairs)
            touched = np.unique(np.asarray(bpairs).ravel())
            b = len(np.unique(bl[touched]))
        else:
            b = 0
        g = (2 * n_comp - chi - b) // 2
        return n_comp, chi, b, g

    @property
    def genus(self):
        return self.topology()[3]


# -- constructions ------------------------------------------------------------


@dataclass(frozen=True)
class Subdivision:
    """Barycentric subdivision and its map back to the parent mesh."""

    mesh: TriMesh
    parent: TriMesh
    face_parent: np.ndarray  # fine face -> parent face
    n_orig: int  # vertices [0, n_orig) are parent vertices
    n_mid: int  # then one midpoint per parent edge, then one centroid per face

    def fine_faces(self, parent_faces):
        parent_faces = np.asarray(parent_faces, dtype=np.int64)
        return (6 * parent_faces[:, None] + np.arange(6)).ravel()

    def midpoint(self, edge):
        return self.n_orig + np.asarray(edge)

    def centroid(self, face):
        return self.n_orig + self.n_mid + np.asarray(face)


_TEMPLATES: dict = {}


def _fine_template(mesh: TriMesh, new_faces):
    """Validated fine topology for ``mesh`` plus, per parent face and corner,
    the fine edge ids of (u, mid), (v, mid), (mid, centre), (u, centre)."""
    key = (mesh.n_vertices, mesh.faces.tobytes())
    hit = _TEMPLATES.get(key)
    if hit is not None:
        return hit
    V, E, F = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    n = V + E + F
    # unit lengths on a valid topology; only the combinatorics are kept
    template = TriMesh(new_faces, _equilateral_lengths(new_faces, n), None, n)
    u = mesh.faces
    v = np.roll(mesh.faces, -1, axis=1)
    mid = V + mesh.face_edges
    cen = np.repeat((V + E + np.arange(F))[:, None], 3, axis=1)

    def ids(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.vectorize(lambda p, q: template._edge_index[(int(p), int(q))])(lo, hi)

    slots = np.stack([ids(u, mid), ids(v, mid), ids(mid, cen), ids(u, cen)], axis=2)
    if len(_TEMPLATES) > 16:
        _TEMPLATES.clear()
    _TEMPLATES[key] = (template, slots)
    return template, slots


def _equilateral_lengths(faces, n):
    pairs = np.sort(np.stack([faces, np.roll(faces, -1, axis=1)], axis=2).reshape(-1, 2), axis=1)
    return {(int(a), int(b)): 1.0 for a, b in np.unique(pairs, axis=0)}


def barycentric_subdivision(mesh: TriMesh) -> Subdivision:
    """Split every face into six around its centroid and edge midpoints.

    The subdivision is isometric: every new edge length is measured in the
    flat layout of its parent face.
    """
    V, E, F = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    mid = V + mesh.face_edges  # (F,3) midpoint of edge (i, i+1)
    cen = V + E + np.arange(F)
    a, b, c = mesh.faces.T
    m0, m1, m2 = mid.T
    new = np.stack(
        [
            np.stack([a, m0, cen], 1),
            np.stack([m0, b, cen], 1),
            np.stack([b, m1, cen], 1),
            np.stack([m1, c, cen], 1),
            np.stack([c, m2, cen], 1),
            np.stack([m2, a, cen], 1),
        ],
        axis=1,
    ).reshape(-1, 3)

    template, slots = _fine_template(mesh, new)
    lay = mesh.layout
    pos_m = 0.5 * (lay + np.roll(lay, -1, axis=1))  # midpoint of corner i and i+1
    pos_c = lay.mean(axis=1, keepdims=True)
    half = 0.5 * mesh.lengths[mesh.face_edges]
    lengths = np.empty(template.n_edges)
    # (u, mid) and (v, mid) are halves of the parent edge
    lengths[slots[:, :, 0]] = half
    lengths[slots[:, :, 1]] = half
    lengths[slots[:, :, 2]] = np.linalg.norm(pos_m - pos_c, axis=2)
    lengths[slots[:, :, 3]] = np.linalg.norm(lay - pos_c, axis=2)
    emb = None
    if mesh.embedding is not None:
        X = mesh.embedding
        emb = np.concatenate([X, 0.5 * (X[mesh.edges[:, 0]] + X[mesh.edges[:, 1]]), X[mesh.faces].mean(axis=1)])
    fine = template.with_lengths(lengths, embedding=emb)
    return Subdivision(fine, mesh, np.repeat(np.arange(F), 6), V, E)


@dataclass(frozen=True)
class Capped:
    """Closed surface obtained by coning off every boundary loop."""

    mesh: TriMesh
    original: TriMesh
    n_faces_orig: int
    apexes: tuple


def cap_boundary(mesh: TriMesh, cap_area: float) -> Capped:
    """Glue a thin fan of total area about ``cap_area`` to each boundary loop.

    Original faces keep their ids; cap faces are appended.  Each fan has all
    legs equal, chosen by bisection so the fan area matches ``cap_area`` when
    the loop admits it, otherwise as flat as the triangle inequality allows.
    """
    loops = mesh.boundary_loops()
    if not loops:
        return Capped(mesh, mesh, mesh.n_faces, ())
    faces = [tuple(t) for t in mesh.faces.tolist()]
    lengths = {tuple(map(int, e)): float(l) for e, l in zip(mesh.edges, mesh.lengths)}
    nv = mesh.n_vertices
    apexes = []
    emb = None if mesh.embedding is None else [*mesh.embedding]
    for loop in loops:
        apex = nv
        nv += 1
        apexes.append(apex)
        es = np.array([mesh.lengths[mesh.edge_id(loop[i], loop[(i + 1) % len(loop)])] for i in range(len(loop))])
        half = 0.5 * es.max()

        def fan_area(R):
            return float(np.sum(0.5 * es * np.sqrt(np.maximum(R * R - 0.25 * es * es, 0.0))))

        lo = half * (1 + 1e-8)
        hi = half * 4
        if fan_area(lo) < cap_area:
            while fan_area(hi) < cap_area:
                hi *= 2
            for _ in range(100):
                R = 0.5 * (lo + hi)
                if fan_area(R) < cap_area:
                    lo = R
                else:
                    hi = R
        R = lo
        for i, v in enumerate(loop):
            w = loop[(i + 1) % len(loop)]
            # boundary runs v -> w in the face orientation, so the cap runs w -> v
            faces.append((w, v, apex))
            lengths[(min(v, apex), max(v, apex))] = R
        if emb is not None:
            emb.append(mesh.embedding[loop].mean(axis=0))
    capped = TriMesh(faces, lengths, None if emb is None else np.array(emb), nv)
    return Capped(capped, mesh, mesh.n_faces, tuple(apexes))


# -- I/O ------------------------------------------------------------------------


def _tokens(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def _read_off(text):
    lines = list(_tokens(text))
    if not lines or not lines[0].upper().startswith("OFF"):
        raise MeshError("missing OFF header")
    head = lines[0][3:].split()
    rest = lines[1:]
    if not head:
        head, rest = rest[0].split(), rest[1:]
    nv, nf = int(head[0]), int(head[1])
    pts = np.array([[float(x) for x in rest[i].split()[:3]] for i in range(nv)])
    tris = []
    for line in rest[nv : nv + nf]:
        vals = [int(x) for x in line.split()]
        k, idx = vals[0], vals[1 : 1 + vals[0]]
        if k != 3:
            raise MeshError(f"non-triangular face with {k} vertices", idx)
        tris.append(idx)
    return pts, np.array(tris)


def _read_obj(text):
    pts, tris = [], []
    for line in _tokens(text):
        parts = line.split()
        if parts[0] == "v":
            pts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(pts) + i for i in idx]
            if len(idx) != 3:
                raise MeshError(f"non-triangular face with {len(idx)} vertices", idx)
            tris.append(idx)
    return np.array(pts), np.array(tris)


def read_lengths(text):
    """Parse a ``.lengths`` sidecar: one ``v_i v_j length`` triple per line."""
    out = {}
    for line in _tokens(text):
        a, b, l = line.split()[:3]
        out[(int(a), int(b))] = float(l)
    return out


def load_mesh(source, format=None, lengths=None) -> TriMesh:
    """Read an ASCII OFF or OBJ mesh.

    ``source`` is a path, text, bytes or a binary/text stream.  For paths a
    sibling ``<name>.lengths`` file, when present, overrides the embedded
    lengths edge by edge.
    """
    sidecar = None
    if isinstance(source, (str, Path)) and Path(source).exists():
        path = Path(source)
        text = path.read_text()
        format = format or path.suffix.lstrip(".")
        side = path.with_suffix(".lengths")
        if side.exists():
            sidecar = read_lengths(side.read_text())
    elif isinstance(source, bytes):
        text = source.decode()
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        text = data.decode() if isinstance(data, bytes) else data
    else:
        text = str(source)
    if format is None:
        format = "off" if text.lstrip().upper().startswith("OFF") else "obj"
    format = format.lower()
    if format == "off":
        pts, tris = _read_off(text)
    elif format == "obj":
        pts, tris = _read_obj(text)
    else:
        raise MeshError(f"unsupported format {format!r}")
    if lengths is not None:
        sidecar = dict(sidecar or {}) | dict(lengths)
    mesh = TriMesh(tris, None, pts, len(pts))
    if sidecar:
        arr = mesh.lengths.copy()
        for (a, b), l in sidecar.items():
            arr[mesh.edge_id(a, b)] = l
        mesh = mesh.with_lengths(arr)
    return mesh


def write_off(mesh: TriMesh, path):
    if mesh.embedding is None:
        raise ValueError("OFF output needs an embedding")
    with open(path, "w") as fh:
        fh.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n")
        for p in mesh.embedding:
            fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
        for t in mesh.faces:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def write_lengths(mesh: TriMesh, path):
    with open(path, "w") as fh:
        for (a, b), l in zip(mesh.edges, mesh.lengths):
            fh.write(f"{a} {b} {l!r}\n")


def summary_json(mesh: TriMesh) -> str:
    return json.dumps(mesh_summary(mesh), sort_keys=True)
