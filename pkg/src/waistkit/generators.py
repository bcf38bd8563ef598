"""Stock surfaces used by the tests, the examples and the CLI ``builtin:`` specs."""

from __future__ import annotations

import math

import numpy as np

from .mesh import MeshError, TriMesh

__all__ = [
    "icosphere",
    "ellipsoid",
    "tetrahedron",
    "flat_torus",
    "torus_of_revolution",
    "disc",
    "genus_two",
    "builtin",
]


def tetrahedron(side=1.0):
    pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    pts *= side / (2 * math.sqrt(2))
    return TriMesh([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], embedding=pts)


def _icosahedron():
    t = (1 + math.sqrt(5)) / 2
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        float,
    )
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    return v / np.linalg.norm(v, axis=1, keepdims=True), np.array(f)


def icosphere(level=3, radius=1.0):
    """Geodesic sphere: the icosahedron with ``level`` rounds of 4-to-1 splits."""
    v, f = _icosahedron()
    verts = [p for p in v]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(new)
    return TriMesh(f, embedding=radius * np.array(verts))


def ellipsoid(axes=(2.0, 1.0, 1.0), level=3):
    """Icosphere pushed onto the ellipsoid with the given semi-axes."""
    s = icosphere(level)
    return TriMesh(s.faces, embedding=s.embedding * np.asarray(axes, float), n_vertices=s.n_vertices)


def _grid_faces(nu, nv):
    idx = lambda i, j: (i % nu) * nv + (j % nv)  # noqa: E731
    faces = []
    for i in range(nu):
        for j in range(nv):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            faces += [[a, b, c], [a, c, d]]
    return np.array(faces)


def flat_torus(n=16, width=1.0, height=None):
    """Flat torus R^2 / (width Z x height Z) from an ``n`` x ``n`` grid.

    The result carries no embedding.  ``mesh.meta['uv']`` holds the grid
    coordinates of each vertex and ``mesh.meta['period']`` the side lengths,
    from which the circle-valued coordinate functions are built.
    """
    if n < 3:
        raise MeshError("flat torus grid needs n >= 3")
    height = width if height is None else height
    faces = _grid_faces(n, n)
    hx, hy = width / n, height / n
    ii, jj = np.divmod(np.arange(n * n), n)
    uv = np.stack([ii * hx, jj * hy], axis=1)
    lengths = {}
    for a, b, c in faces:
        for p, q in ((a, b), (b, c), (c, a)):
            di = (ii[q] - ii[p]) % n
            dj = (jj[q] - jj[p]) % n
            di = di - n if di > n // 2 else di
            dj = dj - n if dj > n // 2 else dj
            lengths[(min(p, q), max(p, q))] = math.hypot(di * hx, dj * hy)
    mesh = TriMesh(faces, lengths, n_vertices=n * n)
    mesh.meta.update(uv=uv, period=(width, height))
    return mesh


def torus_of_revolution(nu=32, nv=16, major=1.0, minor=0.4):
    """Torus around the z axis; ``meta['uv']`` holds the two angles."""
    faces = _grid_faces(nu, nv)
    ii, jj = np.divmod(np.arange(nu * nv), nv)
    u = 2 * np.pi * ii / nu
    w = 2 * np.pi * jj / nv
    rad = major + minor * np.cos(w)
    pts = np.stack([rad * np.cos(u), rad * np.sin(u), minor * np.sin(w)], axis=1)
    mesh = TriMesh(faces, embedding=pts)
    mesh.meta.update(uv=np.stack([u, w], 1), period=(2 * np.pi, 2 * np.pi), angles=True)
    return mesh


def disc(n=8, side=1.0):
    """Flat square ``[0, side]^2`` triangulated by an ``n`` x ``n`` grid (a disc)."""
    ii, jj = np.divmod(np.arange((n + 1) ** 2), n + 1)
    pts = np.stack([ii * side / n, jj * side / n, np.zeros(len(ii))], axis=1)
    faces = []
    for i in range(n):
        for j in range(n):
            a, b = i * (n + 1) + j, (i + 1) * (n + 1) + j
            faces += [[a, b, b + 1], [a, b + 1, a + 1]]
    return TriMesh(faces, embedding=pts)


def genus_two(n=6):
    """Two flat unit tori glued along the boundary of one removed triangle."""
    t = flat_torus(n)
    V = t.n_vertices
    f1 = t.faces[1:]
    a, b, c = t.faces[0]
    # the second copy keeps a, b, c as shared vertices and relabels the rest
    relabel = np.arange(V) + V
    relabel[[a, b, c]] = [a, b, c]
    f2 = relabel[t.faces[1:]][:, ::-1]
    faces = np.concatenate([f1, f2])
    lengths = {}
    for (p, q), l in zip(t.edges, t.lengths):
        lengths[(int(p), int(q))] = l
        lengths[tuple(sorted((int(relabel[p]), int(relabel[q]))))] = l
    used = np.unique(faces)
    remap = np.full(2 * V, -1)
    remap[used] = np.arange(len(used))
    faces = remap[faces]
    lengths = {(int(remap[p]), int(remap[q])): l for (p, q), l in lengths.items() if remap[p] >= 0 and remap[q] >= 0}
    return TriMesh(faces, lengths, n_vertices=len(used))


def builtin(spec: str) -> TriMesh:
    """Parse ``builtin:<name>[:<arg>...]``.

    Names: ``icosphere:<level>``, ``torus:<n>`` (flat unit torus),
    ``torus_rev:<nu>:<nv>``, ``ellipsoid:<a>,<b>,<c>:<level>``,
    ``genus2:<n>``, ``disc:<n>``, ``tetrahedron``.
    """
    parts = spec.split(":")
    if parts[0] == "builtin":
        parts = parts[1:]
    if not parts:
        raise MeshError(f"empty builtin spec {spec!r}")
    name, args = parts[0], parts[1:]
    try:
        if name == "icosphere":
            return icosphere(int(args[0]) if args else 3)
        if name == "torus":
            return flat_torus(int(args[0]) if args else 16)
        if name == "torus_rev":
            return torus_of_revolution(*(int(a) for a in args[:2]))
        if name == "ellipsoid":
            axes = tuple(float(x) for x in args[0].split(",")) if args else (2.0, 1.0, 1.0)
            return ellipsoid(axes, int(args[1]) if len(args) > 1 else 3)
        if name == "genus2":
            return genus_two(int(args[0]) if args else 6)
        if name == "disc":
            return disc(int(args[0]) if args else 8)
        if name == "tetrahedron":
            return tetrahedron()
    except (ValueError, IndexError) as exc:
        raise MeshError(f"bad builtin spec {spec!r}: {exc}") from None
    raise MeshError(f"unknown builtin surface {name!r}")
