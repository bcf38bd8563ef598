"""Short sweepouts of surfaces by recursive balanced bisection.

The surface is cut by short cycles into two pieces of comparable area, the
pieces are cut again, and so on until every piece is small; small pieces are
swept by curves parallel to their boundary, and sibling sweepouts are merged
back up the tree.  Every step is measured and written to a ledger.

Regions are unions of faces of the input mesh (the *parent* mesh), while the
sweepout functions live on its barycentric subdivision.  In the subdivision
every parent face has an interior vertex (its centroid), so the function
that vanishes on the boundary vertices of a region has exactly the region's
boundary as its zero set.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .curves import PolyCurve, vertex_points
from .mesh import Region, TriMesh, barycentric_subdivision, cap_boundary, genus
from .morse import MultiCurve, PLFunction, max_fiber_length, perturb_to_morse
from .paths import distance_to_boundary, vertex_distances

__all__ = [
    "SweepoutError",
    "SweepoutCertificate",
    "Bisector",
    "bisecting_cycle",
    "base_case_sweepout",
    "merge_morse",
    "build_sweepout",
    "BISECTION_CONSTANT",
    "SWEEP_CONSTANT",
    "GLOBAL_CONSTANT",
]

log = logging.getLogger(__name__)

BISECTION_CONSTANT = 6.48
SWEEP_CONSTANT = 616.0
GLOBAL_CONSTANT = 1000.0
BALANCE = 1.0 / 24.0
SHRINK = 24.0 / 23.0


class SweepoutError(RuntimeError):
    """Construction failure; ``ledger`` holds the records written so far."""

    def __init__(self, message, ledger=None, best=None):
        super().__init__(message)
        self.ledger = ledger or []
        self.best = best


def _quantize(x, digits=9):
    """Round scale-free quantities so that decisions survive a rescaled metric."""
    return np.round(x, digits)


def bisection_bound(area, gamma):
    return BISECTION_CONSTANT * max(1.0, math.sqrt(gamma)) * math.sqrt(area)


def sweep_bound(area, gamma, boundary_length, delta):
    return SWEEP_CONSTANT * math.sqrt(gamma + 1) * math.sqrt(area) + boundary_length + delta


# -- bisection ---------------------------------------------------------------------


@dataclass
class Cut:
    plus: Region
    minus: Region
    length: float
    balance: tuple
    center: int
    edges: np.ndarray = field(repr=False)


class Bisector:
    """Shortest balanced cuts of regions by sublevel sets of distance functions.

    Candidate centres are spread over the region by farthest-point sampling.
    For each centre the region's faces are ordered by their mean vertex
    distance; every prefix of that order is a candidate side, and the cut is
    the set of region edges between the prefix and the rest.  The shortest
    cut whose sides both carry at least ``balance`` of the area wins.

    Parameters
    ----------
    mesh : TriMesh
    n_centers : int
        Farthest-point samples per region.
    refinement : int
        Steiner points per edge for the distance matrix.
    """

    def __init__(self, mesh: TriMesh, n_centers=32, refinement=1, balance=BALANCE):
        self.mesh = mesh
        self.n_centers = n_centers
        self.balance = balance
        self.gamma = genus(mesh)
        self.D = vertex_distances(mesh, np.arange(mesh.n_vertices), refinement)
        self.scale = math.sqrt(mesh.area)

    def centers(self, region: Region):
        verts = region.vertices
        first = int(verts[0])
        chosen = [first]
        dmin = self.D[first, verts].copy()
        for _ in range(min(self.n_centers, len(verts)) - 1):
            j = int(np.argmax(_quantize(dmin / self.scale)))
            if dmin[j] <= 0:
                break
            chosen.append(int(verts[j]))
            np.minimum(dmin, self.D[verts[j], verts], out=dmin)
        return chosen

    def cut(self, region: Region) -> Cut:
        mesh = self.mesh
        faces = region.faces
        n = len(faces)
        if n < 2:
            raise SweepoutError("a single face cannot be bisected")
        areas = mesh.face_areas[faces]
        total = areas.sum()
        local = np.full(mesh.n_faces, -1)
        local[faces] = np.arange(n)
        ef = mesh.edge_faces
        both = (ef[:, 1] >= 0) & (local[np.maximum(ef[:, 0], 0)] >= 0) & (local[np.maximum(ef[:, 1], 0)] >= 0)
        inner = np.flatnonzero(both)
        fa, fb = local[ef[inner, 0]], local[ef[inner, 1]]
        elen = mesh.lengths[inner]
        best = None
        for c in self.centers(region):
            key = _quantize(self.D[c, mesh.faces[faces]].mean(axis=1) / self.scale)
            order = np.argsort(key, kind="stable")
            rank = np.empty(n, dtype=np.int64)
            rank[order] = np.arange(n)
            r1 = np.minimum(rank[fa], rank[fb])
            r2 = np.maximum(rank[fa], rank[fb])
            # prefix k (first k faces) is cut by edges with r1 < k <= r2
            diff = np.zeros(n + 1)
            np.add.at(diff, r1 + 1, elen)
            np.add.at(diff, r2 + 1, -elen)
            cutlen = np.cumsum(diff)[1:n]  # k = 1 .. n-1
            frac = np.cumsum(areas[order])[:-1] / total
            qf, qb = _quantize(frac), _quantize(self.balance)
            ok = (qf >= qb) & (_quantize(1 - frac) >= qb)
            if not ok.any():
                continue
            ks = np.flatnonzero(ok)
            # ties resolved by length, then closeness to an even split, then centre id
            q = _quantize(cutlen[ks] / self.scale)
            gap = _quantize(np.abs(frac[ks] - 0.5))
            i = np.lexsort((gap, q))[0]
            j = ks[i]
            cand = (q[i], gap[i], c, j + 1, order, frac[j], cutlen[j])
            if best is None or cand[:3] < best[:3]:
                best = cand
        if best is None:
            raise SweepoutError("no balanced cut found for region")
        _, _, c, k, order, fr, length = best
        plus = Region(mesh, faces[order[:k]])
        minus = Region(mesh, faces[order[k:]])
        in_plus = np.zeros(mesh.n_faces, bool)
        in_plus[plus.faces] = True
        edges = inner[in_plus[ef[inner, 0]] != in_plus[ef[inner, 1]]]
        length = float(mesh.lengths[edges].sum())
        return Cut(plus, minus, length, (float(fr), float(1 - fr)), int(c), edges)


def chain_edges(mesh: TriMesh, edges) -> MultiCurve:
    """Chain a set of edges into vertex paths (a relative 1-cycle)."""
    adj = {}
    for e in edges:
        u, v = map(int, mesh.edges[e])
        adj.setdefault(u, []).append((v, int(e)))
        adj.setdefault(v, []).append((u, int(e)))
    used = set()
    comps = []
    # start from odd-degree vertices so open arcs come out whole
    starts = sorted(adj, key=lambda v: (len(adj[v]) % 2 == 0, v))
    for s in starts:
        while any(e not in used for _, e in adj[s]):
            path, faces, v = [s], [], s
            while True:
                nxt = [(w, e) for w, e in adj[v] if e not in used]
                if not nxt:
                    break
                w, e = nxt[0]
                used.add(e)
                faces.append(int(mesh.edge_faces[e, 0]))
                path.append(w)
                v = w
            vv, ww = vertex_points(path)
            comps.append(PolyCurve(mesh, vv, ww, path[0] == path[-1] and len(path) > 1, np.array(faces, dtype=np.int64)))
    return MultiCurve(float("nan"), comps)


def bisecting_cycle(region: Region, bisector: Bisector | None = None):
    """Short relative cycle splitting ``region`` into two balanced parts.

    Returns
    -------
    (MultiCurve, Region, Region)
        The cut (a union of edge paths whose endpoints lie on the region
        boundary) and the two sides.
    """
    bisector = bisector or Bisector(region.mesh)
    cut = bisector.cut(region)
    return chain_edges(region.mesh, cut.edges), cut.plus, cut.minus


# -- sweepouts on the subdivision ----------------------------------------------


class _Fine:
    """Barycentric subdivision with region bookkeeping."""

    def __init__(self, parent: TriMesh):
        self.sub = barycentric_subdivision(parent)
        self.mesh = self.sub.mesh
        M = self.mesh
        self.graph = csr_matrix(
            (np.r_[M.lengths, M.lengths], (np.r_[M.edges[:, 0], M.edges[:, 1]], np.r_[M.edges[:, 1], M.edges[:, 0]])),
            shape=(M.n_vertices, M.n_vertices),
        )

    def faces_of(self, region: Region):
        return self.sub.fine_faces(region.faces)

    def boundary_vertices(self, region: Region):
        return Region(self.mesh, self.faces_of(region)).boundary_vertices

    def vertices(self, region: Region):
        return np.unique(self.mesh.faces[self.faces_of(region)])


def _unit_normalize(values, zero_mask):
    """Scale non-negative values so the maximum is 1; ``zero_mask`` entries become 0."""
    out = np.where(zero_mask, 0.0, values)
    top = out.max() if len(out) else 0.0
    return out / top if top > 0 else out


def base_case_sweepout(region: Region, delta: float = 0.0, fine: _Fine | None = None) -> PLFunction:
    """Sweep a small genus-0 region by boundary-parallel curves.

    Values are the distance to the region boundary inside the region,
    divided by its maximum.  Only an affine rescaling is applied, since any
    nonlinear relabelling of vertex values would bend the interpolated level
    curves.  Distances come from the edge graph first; when the longest fiber
    then exceeds ``length(boundary) + delta`` the Steiner-refined distance is
    tried as well and the shorter sweep is kept.
    """
    fine = fine or _Fine(region.mesh)
    comps, _, b, g = region.topology()
    if g != 0:
        raise SweepoutError(f"small region has genus {g}; the small-scale threshold is too large for this mesh")
    if b == 0:
        raise SweepoutError("region has no boundary to contract to")
    M = fine.mesh
    verts = fine.vertices(region)
    bverts = fine.boundary_vertices(region)
    ffaces = fine.faces_of(region)
    fmask = np.zeros(M.n_faces, bool)
    fmask[ffaces] = True
    zero = np.zeros(len(verts), bool)
    zero[np.searchsorted(verts, bverts)] = True
    limit = region.boundary_length + delta

    best, best_len = None, np.inf
    for m in (0, 2, 4):
        d = distance_to_boundary(M, ffaces, m)[verts]
        if np.isinf(d).any():
            raise SweepoutError("region component without boundary")
        vals = np.zeros(M.n_vertices)
        vals[verts] = _unit_normalize(d, zero)
        f = PLFunction(M, vals, domain=fmask)
        length = max_fiber_length(f)[0]
        if length < best_len:
            best, best_len = f, length
        if best_len <= limit:
            break
    if best_len > limit:
        log.debug("base case fiber %.6g exceeds boundary %.6g", best_len, region.boundary_length)
    return best


def merge_morse(f1: PLFunction | None, f2: PLFunction | None, eta: float = 1e-3) -> PLFunction:
    """Concatenate the sweeps of two adjacent regions into one sweep of their union.

    The parameter interval is split at ``s``, in proportion to the vertex
    counts.  On ``[0, s]`` the new function runs ``f1`` while the second
    region stays pinned in a thin collar along its boundary; on ``[s, 1]`` it
    runs ``f2``.  Interface vertices start at ``eta * s`` and outer boundary
    vertices stay at 0.  Each region's values change by an affine map only,
    so the fibers of ``f1`` and ``f2`` reappear unchanged.
    """
    if f1 is None or f2 is None:
        return f1 if f2 is None else f2
    M = f1.mesh
    d1, d2 = f1.face_mask, f2.face_mask
    if np.any(d1 & d2):
        raise SweepoutError("regions overlap")
    union = d1 | d2
    v1 = np.unique(M.faces[d1])
    v2 = np.unique(M.faces[d2])
    split = len(v1) / (len(v1) + len(v2))
    lo = eta * split
    outer = Region(M, np.flatnonzero(union)).boundary_vertices
    vals = np.zeros(M.n_vertices)
    vals[v2] = split + (1 - split) * f2.values[v2]
    vals[v1] = lo + (split - lo) * f1.values[v1]
    vals[outer] = 0.0
    return PLFunction(M, vals, domain=union)


# -- driver ---------------------------------------------------------------------------


@dataclass
class SweepoutCertificate:
    """A sweepout function with its audited fiber bounds and construction ledger."""

    function: PLFunction = field(repr=False)
    max_fiber: float
    max_level: float
    genus: int
    area: float
    boundary_length: float
    delta: float
    tau: float
    eps0: float
    depth: int
    depth_bound: int
    ledger: list = field(default_factory=list, repr=False)
    runtime: float = field(default=0.0, compare=False)

    @property
    def certified_bound(self):
        return sweep_bound(self.area, self.genus, self.boundary_length, self.delta)

    @property
    def global_bound(self):
        return GLOBAL_CONSTANT * math.sqrt(self.genus + 1) * math.sqrt(self.area) + self.boundary_length

    @property
    def ok(self):
        return self.max_fiber <= min(self.certified_bound, self.global_bound) * (1 + self.tau) and not self.violations()

    @property
    def bisections(self):
        return [r for r in self.ledger if r["kind"] == "bisect"]

    def violations(self):
        """Ledger records that break their own bound (empty for a valid certificate)."""
        bad = []
        for r in self.ledger:
            if r["kind"] == "bisect":
                if r["length"] > r["bound"] * (1 + self.tau) or min(r["balance"]) < BALANCE - self.tau:
                    bad.append(r)
            elif r["max_fiber"] > r["bound"] * (1 + self.tau):
                bad.append(r)
        if self.depth > self.depth_bound:
            bad.append({"kind": "depth", "depth": self.depth, "bound": self.depth_bound})
        return bad

    def to_json(self):
        return {
            "max_fiber": self.max_fiber,
            "max_level": self.max_level,
            "genus": self.genus,
            "area": self.area,
            "boundary_length": self.boundary_length,
            "delta": self.delta,
            "tau": self.tau,
            "eps0": self.eps0,
            "certified_bound": self.certified_bound,
            "global_bound": self.global_bound,
            "depth": self.depth,
            "depth_bound": self.depth_bound,
            "ok": bool(self.ok),
            "ledger": self.ledger,
            "values": [float(v) for v in self.function.values],
        }


def default_eps0(mesh: TriMesh) -> float:
    """Small-scale threshold: area/2^10, but never below a single face."""
    eps2 = max(mesh.area / 2**10, 1.01 * float(mesh.face_areas.max()))
    return math.sqrt(eps2)


def build_sweepout(
    mesh: TriMesh,
    delta: float = 1e-6,
    tau: float = 0.05,
    eps0: float | None = None,
    n_centers: int = 32,
    refinement: int = 1,
) -> SweepoutCertificate:
    """Certified sweepout of ``mesh`` by short level curves.

    Boundary loops are first capped by thin fans; the construction runs on
    the closed surface and is restricted back at the end, with the original
    boundary placed at level 0.

    Parameters
    ----------
    delta : float
        Additive slack in the bound and the size of the genericity perturbation.
    tau : float
        Relative tolerance used when auditing ledger records.
    eps0 : float, optional
        Regions with area below ``eps0**2`` are swept directly.
    """
    t0 = time.perf_counter()
    if not delta > 0:
        raise ValueError("delta must be positive")
    gamma = genus(mesh)
    L = mesh.boundary_length
    capped = cap_boundary(mesh, 1e-6 * mesh.area)
    closed = capped.mesh
    eps0 = default_eps0(closed) if eps0 is None else float(eps0)
    eps2 = eps0 * eps0
    A = closed.area
    depth_bound = math.ceil(math.log(max(A / eps2, 1.0)) / math.log(SHRINK)) + 1
    bis = Bisector(closed, n_centers, refinement)
    fine = _Fine(closed)
    ledger: list = []
    max_depth = [0]

    def audit(f, region, depth, kind, mf=None):
        if mf is None:
            mf = max_fiber_length(f)[0]
        bound = sweep_bound(region.area, gamma, region.boundary_length, delta)
        ledger.append(
            {
                "kind": kind,
                "depth": depth,
                "area": region.area,
                "boundary_length": region.boundary_length,
                "max_fiber": mf,
                "bound": bound,
            }
        )

    def sweep(region: Region, depth: int) -> PLFunction:
        max_depth[0] = max(max_depth[0], depth)
        if depth > depth_bound:
            raise SweepoutError("recursion deeper than the area-scale induction allows", ledger)
        if region.area < eps2:
            f = base_case_sweepout(region, delta, fine)
            audit(f, region, depth, "base")
            return f
        try:
            cut = bis.cut(region)
        except SweepoutError as exc:
            raise SweepoutError(str(exc), ledger) from None
        ledger.append(
            {
                "kind": "bisect",
                "depth": depth,
                "area": region.area,
                "length": cut.length,
                "bound": bisection_bound(region.area, gamma),
                "balance": list(cut.balance),
                "center": cut.center,
            }
        )
        f1 = sweep(cut.plus, depth + 1)
        f2 = sweep(cut.minus, depth + 1)
        # either child may be swept first; keep the order with the shorter longest fiber
        fa, fb = merge_morse(f1, f2), merge_morse(f2, f1)
        ma, mb = max_fiber_length(fa)[0], max_fiber_length(fb)[0]
        f = fa if _quantize(ma / math.sqrt(region.area)) <= _quantize(mb / math.sqrt(region.area)) else fb
        audit(f, region, depth, "merge", min(ma, mb))
        return f

    f = sweep(Region.whole(closed), 0)
    M = fine.mesh
    if capped.n_faces_orig < closed.n_faces:
        orig = Region(closed, np.arange(capped.n_faces_orig))
        dom = np.zeros(M.n_faces, bool)
        dom[fine.faces_of(orig)] = True
        verts = np.unique(M.faces[dom])
        zero = np.zeros(M.n_vertices, bool)
        zero[Region(M, np.flatnonzero(dom)).boundary_vertices] = True
        vals = np.zeros(M.n_vertices)
        vals[verts] = _unit_normalize(f.values[verts], zero[verts])
        f = PLFunction(M, vals, domain=dom)
    g = _perturb_interior(f, min(delta, 1e-9))
    mf, level = max_fiber_length(g)
    cert = SweepoutCertificate(
        function=g,
        max_fiber=mf,
        max_level=level,
        genus=gamma,
        area=mesh.area,
        boundary_length=L,
        delta=delta,
        tau=tau,
        eps0=eps0,
        depth=max_depth[0],
        depth_bound=depth_bound,
        ledger=ledger,
    )
    cert.runtime = time.perf_counter() - t0
    log.info("sweepout: max fiber %.6g, bound %.6g, %d bisections", mf, cert.certified_bound, len(cert.bisections))
    return cert


def _perturb_interior(f: PLFunction, delta: float) -> PLFunction:
    """Break ties among positive values; the zero set (the boundary) is kept."""
    vals = f.values.copy()
    verts = f.domain_vertices
    zero = verts[vals[verts] == 0]
    g = perturb_to_morse(f, delta)
    out = g.values.copy()
    out[zero] = 0.0
    return f.with_values(out)
