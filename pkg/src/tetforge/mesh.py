"""Tetrahedral mesh data model: storage, adjacency, quality metrics, validation.

Vertex indices are stable across local operations; deleted tets are
tombstoned (``alive`` flag) and only dropped by :meth:`TetMesh.compact`,
which pipeline drivers call between stages.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .predicates import (
    DegenerateElementError,
    circumsphere,
    dihedral_angles,
    orient3d,
    tet_volume,
)

__all__ = [
    "MeshError",
    "NonManifoldError",
    "OrientationError",
    "Mobility",
    "FREE",
    "FIXED",
    "RefineParams",
    "TetMesh",
    "ValidationReport",
    "face_key",
    "seg_key",
    "tet_quality",
    "tet_size",
    "validate",
    "REGULAR_TET_QUALITY",
]

REGULAR_TET_QUALITY = math.sqrt(6) / 4

# inward-oriented face opposite each local vertex: orient3d(face, v_i) == +1
# for a positively oriented tet
TET_FACES = ((1, 3, 2), (0, 2, 3), (0, 3, 1), (0, 1, 2))


class MeshError(ValueError):
    pass


class NonManifoldError(MeshError):
    pass


class OrientationError(MeshError):
    pass


@dataclass(frozen=True)
class Mobility:
    """Smoothing constraint of a vertex: fixed, sliding along a straight
    boundary curve, sliding on a flat boundary patch, or free."""

    kind: str  # "fixed" | "edge" | "face" | "free"
    ref: int | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "edge", "face", "free"):
            raise ValueError(f"unknown mobility kind {self.kind!r}")


FREE = Mobility("free")
FIXED = Mobility("fixed")


@dataclass
class RefineParams:
    """Control parameters for mesh generation and refinement.

    ``size_bound`` may be a single number or a material-id -> bound mapping.
    ``quality_bound`` is the circumradius / shortest-edge threshold;
    ``anisotropy`` scales the thickness of the boundary encroachment
    domains (larger values tolerate thinner layers without splitting).
    """

    quality_bound: float = 2.0
    anisotropy: float = 10.0
    size_bound: object = math.inf
    chordal_error: float = math.inf
    angular_resolution: float = 30.0  # degrees
    size_mode: str = "volume"  # or "maxedge"

    def __post_init__(self):
        if not self.anisotropy > 1.0:
            raise ValueError("anisotropy bound must be > 1")
        if not self.quality_bound >= REGULAR_TET_QUALITY:
            raise ValueError(
                f"quality bound below the regular-tet floor {REGULAR_TET_QUALITY:.4f}"
            )

    def size_for(self, material):
        if isinstance(self.size_bound, dict):
            return self.size_bound.get(material, math.inf)
        return self.size_bound


def face_key(a, b, c):
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
        if a > b:
            a, b = b, a
    return (a, b, c)


def seg_key(a, b):
    return (a, b) if a < b else (b, a)


def tet_quality(a, b, c, d):
    """Circumradius over shortest edge; +inf sentinel for degenerate tets."""
    try:
        sph = circumsphere(a, b, c, d)
    except DegenerateElementError:
        return math.inf
    lmin = min(
        math.dist(a, b), math.dist(a, c), math.dist(a, d),
        math.dist(b, c), math.dist(b, d), math.dist(c, d),
    )
    if lmin == 0.0:
        return math.inf
    return sph.radius / lmin


def tet_size(a, b, c, d, mode="volume"):
    """1D size of a tet: edge length of the equal-volume regular tet
    (default), or the maximum edge length."""
    if mode == "maxedge":
        return max(
            math.dist(a, b), math.dist(a, c), math.dist(a, d),
            math.dist(b, c), math.dist(b, d), math.dist(c, d),
        )
    v = abs(tet_volume(a, b, c, d))
    return (6.0 * math.sqrt(2.0) * v) ** (1.0 / 3.0)


class TetMesh:
    """Tetrahedra + boundary constraints with adjacency.

    ``facets`` and ``segments`` hold the protected boundary entities
    (patch/curve labelled); refinement maintains them by splitting and
    never flips across them.
    """

    def __init__(self):
        self.points = []          # list of (x, y, z)
        self.mobility = []        # parallel to points
        self.tets = []            # list of 4-tuples of vertex ids (or None)
        self.tet_mat = []
        self.neighbor = []        # neighbor[t][i]: tet across face opp. vertex i, -1 none
        self.alive = []
        self.n_live = 0
        self.facets = {}          # face_key -> patch id
        self.segments = {}        # seg_key -> curve id
        self.patch_planes = {}    # patch id -> ((px,py,pz), (nx,ny,nz))
        self.curve_lines = {}     # curve id -> ((px,py,pz), (dx,dy,dz))
        self.mobility_assigned = False
        self._vert_tets = []      # vertex -> possibly-stale incident tet ids

    # -- construction -------------------------------------------------

    def add_point(self, p, mobility=FREE):
        self.points.append((float(p[0]), float(p[1]), float(p[2])))
        self.mobility.append(mobility)
        self._vert_tets.append([])
        return len(self.points) - 1

    def add_tet(self, vids, material=1, reorient=False):
        a, b, c, d = vids
        if reorient:
            o = orient3d(self.points[a], self.points[b], self.points[c], self.points[d])
            if o < 0:
                c, d = d, c
            elif o == 0:
                raise OrientationError(f"degenerate tet {vids}")
        t = len(self.tets)
        self.tets.append((a, b, c, d))
        self.tet_mat.append(material)
        self.neighbor.append([-1, -1, -1, -1])
        self.alive.append(True)
        self.n_live += 1
        for v in (a, b, c, d):
            self._vert_tets[v].append(t)
        return t

    def kill_tet(self, t):
        if self.alive[t]:
            self.alive[t] = False
            self.n_live -= 1

    # -- queries ------------------------------------------------------

    def n_points(self):
        return len(self.points)

    def live_tets(self):
        return [t for t in range(len(self.tets)) if self.alive[t]]

    def tet_points(self, t):
        a, b, c, d = self.tets[t]
        pts = self.points
        return pts[a], pts[b], pts[c], pts[d]

    def face_of(self, t, i):
        """Global vertex triple of the face opposite local vertex i,
        oriented so the opposite vertex sees it positively."""
        tet = self.tets[t]
        fi = TET_FACES[i]
        return (tet[fi[0]], tet[fi[1]], tet[fi[2]])

    def face_slot(self, t, key):
        """Local face index of tet t matching a sorted face key, or -1."""
        tet = self.tets[t]
        for i in range(4):
            fi = TET_FACES[i]
            if face_key(tet[fi[0]], tet[fi[1]], tet[fi[2]]) == key:
                return i
        return -1

    def incident_tets(self, v):
        lst = [t for t in self._vert_tets[v] if self.alive[t]]
        self._vert_tets[v] = lst
        return lst

    def tets_around_edge(self, a, b):
        return [t for t in self.incident_tets(a) if b in self.tets[t]]

    def has_face(self, key):
        a = key[0]
        for t in self.incident_tets(a):
            tet = self.tets[t]
            if key[1] in tet and key[2] in tet:
                return True
        return False

    def tets_with_face(self, key):
        out = []
        for t in self.incident_tets(key[0]):
            tet = self.tets[t]
            if key[1] in tet and key[2] in tet:
                out.append(t)
        return out

    def centroid(self, t):
        a, b, c, d = self.tet_points(t)
        return (
            (a[0] + b[0] + c[0] + d[0]) / 4.0,
            (a[1] + b[1] + c[1] + d[1]) / 4.0,
            (a[2] + b[2] + c[2] + d[2]) / 4.0,
        )

    def quality(self, t):
        return tet_quality(*self.tet_points(t))

    def size(self, t, mode="volume"):
        return tet_size(*self.tet_points(t), mode=mode)

    def min_dihedral(self, t):
        try:
            return min(dihedral_angles(*self.tet_points(t)))
        except DegenerateElementError:
            return 0.0

    def volume(self):
        return sum(tet_volume(*self.tet_points(t)) for t in self.live_tets())

    def bbox(self):
        arr = np.asarray(self.points)
        return arr.min(axis=0), arr.max(axis=0)

    def bbox_diag(self):
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def points_array(self):
        return np.asarray(self.points, dtype=float)

    def boundary_faces(self):
        """Faces with no neighbor, as (key, owning tet, local slot)."""
        out = []
        for t in self.live_tets():
            for i in range(4):
                if self.neighbor[t][i] == -1:
                    f = self.face_of(t, i)
                    out.append((face_key(*f), t, i))
        return out

    def boundary_vertex_ids(self):
        seen = set()
        for key, _, _ in self.boundary_faces():
            seen.update(key)
        for key in self.facets:
            seen.update(key)
        return seen

    # -- adjacency ----------------------------------------------------

    def build_adjacency(self):
        """Populate neighbor links from scratch; raises on inverted tets,
        faces shared by more than two tets, or duplicated tets."""
        face_map = {}
        seen_tets = set()
        for t in self.live_tets():
            pts = self.tet_points(t)
            if orient3d(*pts) <= 0:
                raise OrientationError(f"tet {t} is not positively oriented")
            tkey = tuple(sorted(self.tets[t]))
            if tkey in seen_tets:
                raise NonManifoldError(f"duplicated tet over vertices {tkey}")
            seen_tets.add(tkey)
            self.neighbor[t] = [-1, -1, -1, -1]
            for i in range(4):
                f = self.face_of(t, i)
                key = face_key(*f)
                face_map.setdefault(key, []).append((t, i, f))
        for key, entries in face_map.items():
            if len(entries) > 2:
                raise NonManifoldError(
                    f"face {key} shared by {len(entries)} tets"
                )
            if len(entries) == 2:
                (t1, i1, f1), (t2, i2, f2) = entries
                if _same_cycle(f1, f2):
                    raise NonManifoldError(
                        f"tets {t1} and {t2} lie on the same side of face {key}"
                    )
                self.neighbor[t1][i1] = t2
                self.neighbor[t2][i2] = t1
        self._rebuild_vert_tets()
        return self

    def _rebuild_vert_tets(self):
        self._vert_tets = [[] for _ in self.points]
        for t in self.live_tets():
            for v in self.tets[t]:
                self._vert_tets[v].append(t)

    # -- maintenance --------------------------------------------------

    def compact(self, drop_unused_points=True):
        """Drop dead tets and (optionally) points not referenced by any
        live tet or constraint; remaps all indices."""
        live = self.live_tets()
        if drop_unused_points:
            used = set()
            for t in live:
                used.update(self.tets[t])
            for key in self.facets:
                used.update(key)
            for key in self.segments:
                used.update(key)
            vmap = {}
            new_points = []
            new_mob = []
            for v in range(len(self.points)):
                if v in used:
                    vmap[v] = len(new_points)
                    new_points.append(self.points[v])
                    new_mob.append(self.mobility[v])
            self.points = new_points
            self.mobility = new_mob
        else:
            vmap = {v: v for v in range(len(self.points))}

        new_tets = []
        new_mat = []
        tmap = {}
        for t in live:
            tmap[t] = len(new_tets)
            new_tets.append(tuple(vmap[v] for v in self.tets[t]))
            new_mat.append(self.tet_mat[t])
        new_nbr = []
        for t in live:
            new_nbr.append([tmap.get(n, -1) for n in self.neighbor[t]])
        self.tets = new_tets
        self.tet_mat = new_mat
        self.neighbor = new_nbr
        self.alive = [True] * len(new_tets)
        self.n_live = len(new_tets)
        self.facets = {
            face_key(*(vmap[v] for v in key)): pid for key, pid in self.facets.items()
        }
        self.segments = {
            seg_key(*(vmap[v] for v in key)): cid for key, cid in self.segments.items()
        }
        self._rebuild_vert_tets()
        return self

    def copy(self):
        m = TetMesh()
        m.points = list(self.points)
        m.mobility = list(self.mobility)
        m.tets = list(self.tets)
        m.tet_mat = list(self.tet_mat)
        m.neighbor = [list(n) for n in self.neighbor]
        m.alive = list(self.alive)
        m.n_live = self.n_live
        m.facets = dict(self.facets)
        m.segments = dict(self.segments)
        m.patch_planes = dict(self.patch_planes)
        m.curve_lines = dict(self.curve_lines)
        m.mobility_assigned = self.mobility_assigned
        m._vert_tets = [list(l) for l in self._vert_tets]
        return m


def _same_cycle(f1, f2):
    # True if the two ordered triples are even permutations of each other
    # (i.e. the shared face is traversed in the same direction by both tets).
    a, b, c = f1
    rotations = ((a, b, c), (b, c, a), (c, a, b))
    return f2 in rotations


def build_adjacency(mesh):
    """Module-level convenience wrapper around TetMesh.build_adjacency."""
    return mesh.build_adjacency()


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    n_points: int = 0
    n_tets: int = 0
    dihedral_hist: object = None   # (bin_edges, counts), degrees
    quality_hist: object = None    # (bin_edges, counts), log2 bins
    min_dihedral_deg: float = math.nan
    max_dihedral_deg: float = math.nan
    max_quality: float = math.nan

    @property
    def ok(self):
        return not self.violations


def dihedral_histogram(mesh, bins=36):
    edges = np.linspace(0.0, 180.0, bins + 1)
    counts = np.zeros(bins, dtype=int)
    lo, hi = math.inf, -math.inf
    for t in mesh.live_tets():
        try:
            angs = dihedral_angles(*mesh.tet_points(t))
        except DegenerateElementError:
            continue
        for a in angs:
            deg = math.degrees(a)
            lo = min(lo, deg)
            hi = max(hi, deg)
            idx = min(int(deg / 180.0 * bins), bins - 1)
            counts[idx] += 1
    return edges, counts, lo, hi


def quality_histogram(mesh, lo_exp=-1, hi_exp=7):
    # log2-spaced bins from 0.5 to 128, with overflow in the last bin
    edges = [2.0 ** e for e in range(lo_exp, hi_exp + 1)]
    counts = np.zeros(len(edges) - 1, dtype=int)
    qmax = 0.0
    for t in mesh.live_tets():
        q = mesh.quality(t)
        if math.isfinite(q):
            qmax = max(qmax, q)
        idx = 0
        for i in range(len(edges) - 1):
            if q >= edges[i]:
                idx = i
        counts[idx] += 1
    return np.asarray(edges), counts, qmax


def validate(mesh):
    """Full consistency report: orientation, manifoldness, adjacency
    symmetry, constraint conformity, mobility sanity, plus dihedral and
    quality histograms.  Never raises; everything lands in the report."""
    rep = ValidationReport(n_points=len(mesh.points), n_tets=mesh.n_live)

    face_map = {}
    seen_tets = {}
    for t in mesh.live_tets():
        pts = mesh.tet_points(t)
        o = orient3d(*pts)
        if o < 0:
            rep.violations.append(f"tet {t}: negative orientation")
        elif o == 0:
            rep.violations.append(f"tet {t}: zero volume")
        tkey = tuple(sorted(mesh.tets[t]))
        if tkey in seen_tets:
            rep.violations.append(
                f"tets {seen_tets[tkey]} and {t} duplicate vertices {tkey}"
            )
        seen_tets[tkey] = t
        for i in range(4):
            key = face_key(*mesh.face_of(t, i))
            face_map.setdefault(key, []).append((t, i))

    for key, entries in face_map.items():
        if len(entries) > 2:
            rep.violations.append(f"face {key}: shared by {len(entries)} tets")

    # adjacency symmetry / consistency with the face lists
    for t in mesh.live_tets():
        for i in range(4):
            n = mesh.neighbor[t][i]
            if n == -1:
                continue
            if not mesh.alive[n]:
                rep.violations.append(f"tet {t}: neighbor {n} is dead")
                continue
            key = face_key(*mesh.face_of(t, i))
            j = mesh.face_slot(n, key)
            if j == -1 or mesh.neighbor[n][j] != t:
                rep.violations.append(f"tets {t}/{n}: asymmetric adjacency")

    # every protected facet must exist as a mesh face
    for key in mesh.facets:
        if key not in face_map:
            rep.violations.append(f"protected facet {key} missing from mesh")

    if mesh.mobility_assigned:
        boundary = mesh.boundary_vertex_ids()
        for v in range(len(mesh.points)):
            if not mesh.incident_tets(v):
                continue
            if v in boundary and mesh.mobility[v].kind == "free":
                rep.violations.append(f"vertex {v}: boundary vertex marked free")
            if v not in boundary and mesh.mobility[v].kind != "free":
                rep.violations.append(f"vertex {v}: interior vertex constrained")

    edges, counts, lo, hi = dihedral_histogram(mesh)
    rep.dihedral_hist = (edges, counts)
    rep.min_dihedral_deg = lo
    rep.max_dihedral_deg = hi
    qedges, qcounts, qmax = quality_histogram(mesh)
    rep.quality_hist = (qedges, qcounts)
    rep.max_quality = qmax
    return rep
