"""Curves drawn on a :class:`~waistkit.mesh.TriMesh`.

A surface point is stored as a convex combination of (up to) three vertices
that span a common face.  Points on edges use two nonzero weights, vertices
one.  A :class:`PolyCurve` is a sequence of such points where consecutive
points share a face; each segment is straight in that face's flat layout, so
its length is exact for the piecewise-flat metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import TriMesh

__all__ = ["PolyCurve", "edge_points", "vertex_points", "common_faces"]

_SUPPORT_TOL = 1e-12


def edge_points(mesh: TriMesh, edges, t):
    """Vertex/weight arrays for points ``(1 - t) * a + t * b`` on edges ``(a, b)``."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1)
    t = np.broadcast_to(np.asarray(t, float), edges.shape)
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    verts = np.stack([a, b, a], axis=1)
    weights = np.stack([1 - t, t, np.zeros_like(t)], axis=1)
    return verts, weights


def vertex_points(vertices):
    v = np.asarray(vertices, dtype=np.int64).reshape(-1)
    return np.stack([v, v, v], axis=1), np.tile([1.0, 0.0, 0.0], (len(v), 1))


def _support(verts, weights):
    return {int(v) for v, w in zip(verts, weights) if w > _SUPPORT_TOL}


def common_faces(mesh: TriMesh, vfaces, p_verts, p_w, q_verts, q_w):
    """Faces containing the supports of both points (``vfaces`` from ``mesh.vertex_faces()``)."""
    sup = _support(p_verts, p_w) | _support(q_verts, q_w)
    cand = None
    for v in sup:
        s = set(vfaces[v])
        cand = s if cand is None else cand & s
    return sorted(cand or ())


def layout_positions(mesh: TriMesh, faces, verts, weights):
    """2D position of each point inside the flat layout of the matching face."""
    faces = np.asarray(faces, dtype=np.int64)
    corners = mesh.faces[faces]  # (n, 3)
    lay = mesh.layout[faces]  # (n, 3, 2)
    pos = np.zeros((len(faces), 2))
    covered = np.zeros(len(faces))
    for k in range(3):
        hit = verts[:, k : k + 1] == corners  # (n, 3)
        w = weights[:, k]
        pos += w[:, None] * np.einsum("nc,ncd->nd", hit.astype(float), lay)
        covered += w * hit.any(axis=1)
    if np.any(np.abs(covered - weights.sum(axis=1)) > 1e-9):
        raise ValueError("point does not lie in the face assigned to its segment")
    return pos


@dataclass(frozen=True)
class PolyCurve:
    """Piecewise-straight curve on a mesh.

    Parameters
    ----------
    mesh : TriMesh
    verts, weights : ndarray, shape (n, 3)
        Barycentric description of the points.
    closed : bool
        Closed curves repeat their first point at the end.
    seg_faces : ndarray, shape (n - 1,), optional
        Face containing segment ``i``.  Found by search when omitted.
    """

    mesh: TriMesh = field(repr=False)
    verts: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    closed: bool = False
    seg_faces: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        verts = np.asarray(self.verts, dtype=np.int64).reshape(-1, 3)
        weights = np.asarray(self.weights, float).reshape(-1, 3)
        object.__setattr__(self, "verts", verts)
        object.__setattr__(self, "weights", weights)
        if self.seg_faces is None:
            object.__setattr__(self, "seg_faces", self._find_faces())
        else:
            object.__setattr__(self, "seg_faces", np.asarray(self.seg_faces, dtype=np.int64))
        if len(self.seg_faces) != max(len(verts) - 1, 0):
            raise ValueError("seg_faces must have one entry per segment")

    def _find_faces(self):
        vf = self.mesh.vertex_faces()
        out = []
        for i in range(len(self.verts) - 1):
            cf = common_faces(self.mesh, vf, self.verts[i], self.weights[i], self.verts[i + 1], self.weights[i + 1])
            if not cf:
                raise ValueError(f"points {i} and {i + 1} do not share a face")
            out.append(cf[0])
        return np.array(out, dtype=np.int64)

    def __len__(self):
        return len(self.verts)

    def segment_vectors(self):
        if len(self.verts) < 2:
            return np.zeros((0, 2))
        f = self.seg_faces
        p = layout_positions(self.mesh, f, self.verts[:-1], self.weights[:-1])
        q = layout_positions(self.mesh, f, self.verts[1:], self.weights[1:])
        return q - p

    def segment_lengths(self):
        d = self.segment_vectors()
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def points3d(self):
        """Embedded positions (requires an embedding)."""
        X = self.mesh.embedding
        if X is None:
            raise ValueError("mesh has no embedding")
        return np.einsum("nk,nkd->nd", self.weights, X[self.verts])

    def with_mesh(self, mesh: TriMesh) -> "PolyCurve":
        """Same combinatorial curve on a mesh with identical connectivity."""
        return PolyCurve(mesh, self.verts, self.weights, self.closed, self.seg_faces)

    def reversed(self) -> "PolyCurve":
        return PolyCurve(self.mesh, self.verts[::-1], self.weights[::-1], self.closed, self.seg_faces[::-1])
