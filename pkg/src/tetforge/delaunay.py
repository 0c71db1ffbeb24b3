"""Incremental Delaunay tetrahedralization and local topology operations.

Point insertion re-tessellates the conflict cavity by coning the new vertex
to the cavity boundary (Bowyer-Watson).  Protected boundary facets act as
walls: the cavity never crosses them, shrinking instead and accepting a
local violation of the Delaunay property.  Facet and segment constraints
are maintained by splitting, never by re-triangulation across them.
"""

import math

from .mesh import (
    FREE,
    MeshError,
    Mobility,
    TetMesh,
    face_key,
    seg_key,
)
from .predicates import (
    GeometryError,
    orient3d,
    _insphere_oriented,
)

__all__ = [
    "DelaunayError",
    "OutsideDomainError",
    "DuplicateVertexError",
    "InsertionError",
    "CoplanarPointsError",
    "FacetRecoveryError",
    "locate",
    "insert_point",
    "plan_insert",
    "commit_insert",
    "flip",
    "plan_flip23",
    "plan_flip32",
    "delaunay_from_points",
    "tetrahedralize",
]

SNAP_REL = 1e-10  # duplicate-vertex snap tolerance, relative to bbox diagonal
SUPER_MARGIN = 1e4


class DelaunayError(MeshError):
    pass


class OutsideDomainError(DelaunayError):
    pass


class DuplicateVertexError(DelaunayError):
    pass


class InsertionError(DelaunayError):
    pass


class CoplanarPointsError(DelaunayError):
    pass


class FacetRecoveryError(DelaunayError):
    pass


# ---------------------------------------------------------------------------
# point location


def locate(mesh, p, hint=None):
    """Walk to a live tet whose closure contains p.

    Falls back to a linear scan when the walk stalls; raises
    OutsideDomainError when no tet contains p.
    """
    t = hint if hint is not None and 0 <= hint < len(mesh.tets) and mesh.alive[hint] else None
    if t is None:
        for c in range(len(mesh.tets) - 1, -1, -1):
            if mesh.alive[c]:
                t = c
                break
        if t is None:
            raise OutsideDomainError("empty mesh")
    pts = mesh.points
    max_steps = 4 * mesh.n_live + 64
    prev = -1
    for _ in range(max_steps):
        tet = mesh.tets[t]
        moved = False
        for i in range(4):
            n = mesh.neighbor[t][i]
            if n == prev and n != -1:
                continue
            f = mesh.face_of(t, i)
            if orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p) < 0:
                if n == -1:
                    return _locate_scan(mesh, p)
                prev = t
                t = n
                moved = True
                break
        if not moved:
            return t
    return _locate_scan(mesh, p)


def _locate_scan(mesh, p):
    pts = mesh.points
    for t in range(len(mesh.tets)):
        if not mesh.alive[t]:
            continue
        tet = mesh.tets[t]
        ok = True
        for i in range(4):
            f = mesh.face_of(t, i)
            if orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p) < 0:
                ok = False
                break
        if ok:
            return t
    raise OutsideDomainError(f"point {p} lies outside the mesh")


# ---------------------------------------------------------------------------
# insertion


class _InsertPlan:
    __slots__ = ("point", "constraint", "cavity", "cone", "mobility")

    def __init__(self, point, constraint, cavity, cone, mobility):
        self.point = point
        self.constraint = constraint
        self.cavity = cavity      # set of tet ids to remove
        self.cone = cone          # list of (face triple, ext tet, material)
        self.mobility = mobility

    def new_tet_points(self, mesh):
        pts = mesh.points
        return [
            (pts[f[0]], pts[f[1]], pts[f[2]], self.point) for f, _, _ in self.cone
        ]


def _exempt(mesh, fkey, constraint):
    if constraint is None:
        return False
    kind, key = constraint
    if kind == "facet":
        return fkey == key
    # segment or bare facet edge: faces containing both endpoints
    return key[0] in fkey and key[1] in fkey


def _find_seeds(mesh, p, constraint, hint):
    if constraint is not None:
        kind, key = constraint
        if kind == "facet":
            if key not in mesh.facets:
                raise InsertionError(f"unknown facet constraint {key}")
            seeds = mesh.tets_with_face(key)
        else:
            if kind == "segment" and key not in mesh.segments:
                raise InsertionError(f"unknown segment constraint {key}")
            seeds = mesh.tets_around_edge(*key)
        if seeds:
            return seeds
        if kind == "segment":
            raise InsertionError(f"constraint {constraint} has no incident tets")
        # facet/edge constraints may name an entity that is not (yet) a
        # mesh face, e.g. during tie-break recovery; locate instead
    return [locate(mesh, p, hint)]


def plan_insert(mesh, p, constraint=None, hint=None):
    """Compute the conflict cavity and cone for inserting p without
    touching the mesh.  Raises on duplicates and unrecoverable cavities."""
    p = (float(p[0]), float(p[1]), float(p[2]))
    seeds = _find_seeds(mesh, p, constraint, hint)
    pts = mesh.points
    protected = mesh.facets

    snap = getattr(mesh, "snap_tol", 0.0)
    if snap:
        for s in seeds:
            for v in mesh.tets[s]:
                if math.dist(pts[v], p) < snap:
                    raise DuplicateVertexError(
                        f"point {p} within snap tolerance of vertex {v}"
                    )

    # conflict region, flood-filled from the seeds without crossing
    # protected faces
    banned = set()
    conflict_cache = {}

    def in_conflict(t):
        r = conflict_cache.get(t)
        if r is None:
            a, b, c, d = mesh.tets[t]
            r = _insphere_oriented(pts[a], pts[b], pts[c], pts[d], p) > 0
            conflict_cache[t] = r
        return r

    for s in seeds:
        conflict_cache[s] = True  # seeds contain p in their closure

    for _round in range(len(mesh.tets) + 8):
        cavity = set(seeds)
        stack = list(seeds)
        while stack:
            t = stack.pop()
            nbrs = mesh.neighbor[t]
            for i in range(4):
                n = nbrs[i]
                if n == -1 or n in cavity or n in banned:
                    continue
                if protected:
                    f = mesh.face_of(t, i)
                    if face_key(*f) in protected and not _exempt(
                        mesh, face_key(*f), constraint
                    ):
                        continue
                if in_conflict(n):
                    cavity.add(n)
                    stack.append(n)

        # repair: every non-exempt boundary face must be strictly visible
        # from p, and no non-exempt protected face may be buried inside
        offenders = set()
        for t in cavity:
            nbrs = mesh.neighbor[t]
            for i in range(4):
                n = nbrs[i]
                f = mesh.face_of(t, i)
                fkey = None
                if n != -1 and n in cavity:
                    if protected:
                        fkey = face_key(*f)
                        if fkey in protected and not _exempt(mesh, fkey, constraint):
                            # wall buried via a path around its rim: drop the
                            # side p cannot see
                            o = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p)
                            offenders.add(n if o > 0 else t)
                    continue
                fkey = face_key(*f)
                if (fkey in protected or n == -1) and _exempt(mesh, fkey, constraint):
                    continue
                o = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p)
                if o <= 0:
                    offenders.add(t)
        offenders -= set(seeds)
        if not offenders:
            break
        banned |= offenders
    else:
        raise InsertionError("cavity repair did not converge")

    for t in cavity:
        for i in range(4):
            n = mesh.neighbor[t][i]
            if n != -1 and n in cavity:
                continue
            f = mesh.face_of(t, i)
            if _exempt(mesh, face_key(*f), constraint) and (
                face_key(*f) in protected or n == -1
            ):
                continue
            o = orient3d(pts[f[0]], pts[f[1]], pts[f[2]], p)
            if o <= 0:
                raise InsertionError(
                    "cavity not star-shaped around the insertion point"
                )

    # duplicate-vertex guard over the remaining cavity vertices
    if snap:
        for t in cavity:
            for v in mesh.tets[t]:
                if math.dist(pts[v], p) < snap:
                    raise DuplicateVertexError(
                        f"point {p} within snap tolerance of vertex {v}"
                    )

    cone = []
    for t in cavity:
        nbrs = mesh.neighbor[t]
        mat = mesh.tet_mat[t]
        for i in range(4):
            n = nbrs[i]
            if n != -1 and n in cavity:
                continue
            f = mesh.face_of(t, i)
            fkey = face_key(*f)
            if _exempt(mesh, fkey, constraint) and (fkey in protected or n == -1):
                continue
            cone.append((f, n, mat))
    if not cone:
        raise InsertionError("empty cone")

    mobility = FREE
    if constraint is not None:
        kind, key = constraint
        if kind == "facet":
            mobility = Mobility("face", mesh.facets[key])
        elif kind == "segment":
            mobility = Mobility("edge", mesh.segments[key])
        else:
            pid = None
            for fk, patch in mesh.facets.items():
                if key[0] in fk and key[1] in fk:
                    pid = patch
                    break
            mobility = Mobility("face", pid) if pid is not None else FREE
    return _InsertPlan(p, constraint, cavity, cone, mobility)


def commit_insert(mesh, plan, events=None):
    """Apply an insertion plan; returns (new vertex id, new tet ids)."""
    pid = mesh.add_point(plan.point, mobility=plan.mobility)
    new_ids = []
    half = {}
    for f, ext, mat in plan.cone:
        t = mesh.add_tet((f[0], f[1], f[2], pid), material=mat)
        new_ids.append(t)
        mesh.neighbor[t][3] = ext
        if ext != -1:
            j = mesh.face_slot(ext, face_key(*f))
            mesh.neighbor[ext][j] = t
        # wire the three p-faces among new tets (and across split entities)
        for i in range(3):
            f2 = mesh.face_of(t, i)
            key = face_key(*f2)
            other = half.pop(key, None)
            if other is None:
                half[key] = (t, i)
            else:
                ot, oi = other
                mesh.neighbor[t][i] = ot
                mesh.neighbor[ot][oi] = t
    for t in plan.cavity:
        mesh.kill_tet(t)

    _apply_constraint_split(mesh, plan.constraint, pid, events)
    return pid, new_ids


def _apply_constraint_split(mesh, constraint, pid, events):
    if constraint is None:
        return
    kind, key = constraint
    if kind == "facet":
        patch = mesh.facets.pop(key)
        a, b, c = key
        children = [face_key(a, b, pid), face_key(b, c, pid), face_key(a, c, pid)]
        for ck in children:
            mesh.facets[ck] = patch
        if events is not None:
            events.append(("facet_split", key, children))
        return
    a, b = key
    if kind == "segment":
        curve = mesh.segments.pop(key)
        kids = [seg_key(a, pid), seg_key(pid, b)]
        for sk in kids:
            mesh.segments[sk] = curve
        if events is not None:
            events.append(("segment_split", key, kids))
    # split every protected facet containing the edge (a, b)
    hit = [fk for fk in mesh.facets if a in fk and b in fk]
    for fk in hit:
        patch = mesh.facets.pop(fk)
        x = next(v for v in fk if v != a and v != b)
        kids = [face_key(a, pid, x), face_key(pid, b, x)]
        for ck in kids:
            mesh.facets[ck] = patch
        if events is not None:
            events.append(("facet_split", fk, kids))


def insert_point(mesh, p, constraint=None, hint=None, events=None):
    """Insert p into the mesh (Delaunay cavity re-tessellation).

    ``constraint`` names the boundary entity p lies on:
    ``("facet", face_key)``, ``("segment", seg_key)`` or ``("edge", seg_key)``
    for a facet-triangulation edge that is not a protected segment.
    Splitting an entity hands its patch/curve label to the children.
    Returns the list of new tet ids.
    """
    plan = plan_insert(mesh, p, constraint=constraint, hint=hint)
    _, new_ids = commit_insert(mesh, plan, events=events)
    return new_ids


# ---------------------------------------------------------------------------
# local flips


def _replace_tets(mesh, old_ids, new_defs):
    """Replace a connected group of tets by new ones.

    new_defs: list of (4 vertex ids in positive orientation, material).
    External adjacency is recovered by face matching.
    """
    old = set(old_ids)
    ext = {}
    for t in old_ids:
        for i in range(4):
            n = mesh.neighbor[t][i]
            if n in old:
                continue
            ext[face_key(*mesh.face_of(t, i))] = n
    for t in old_ids:
        mesh.kill_tet(t)
    new_ids = []
    half = {}
    for vids, mat in new_defs:
        t = mesh.add_tet(vids, material=mat)
        new_ids.append(t)
        for i in range(4):
            key = face_key(*mesh.face_of(t, i))
            if key in ext:
                n = ext[key]
                mesh.neighbor[t][i] = n
                if n != -1:
                    j = mesh.face_slot(n, key)
                    mesh.neighbor[n][j] = t
            else:
                other = half.pop(key, None)
                if other is None:
                    half[key] = (t, i)
                else:
                    ot, oi = other
                    mesh.neighbor[t][i] = ot
                    mesh.neighbor[ot][oi] = t
    return new_ids


def flip(mesh, entity):
    """2-3 flip of an interior face (3 vertex ids) or 3-2 flip of an
    interior edge (2 vertex ids).  Returns "flipped-2-3", "flipped-3-2"
    or "blocked"; the mesh is untouched when blocked."""
    if len(entity) == 3:
        return _flip23(mesh, face_key(*entity))
    if len(entity) == 2:
        return _flip32(mesh, seg_key(*entity))
    raise ValueError("entity must be a face (3 ids) or an edge (2 ids)")


def plan_flip23(mesh, fkey):
    """Replacement tets of a 2-3 flip, or None when the flip is illegal.
    Returns (owner tet ids, [(vertex 4-tuple, material), ...])."""
    if fkey in mesh.facets:
        return None
    owners = mesh.tets_with_face(fkey)
    if len(owners) != 2:
        return None
    t1, t2 = owners
    if mesh.tet_mat[t1] != mesh.tet_mat[t2]:
        return None
    i1 = mesh.face_slot(t1, fkey)
    f = mesh.face_of(t1, i1)  # oriented toward t1's apex
    p = mesh.tets[t1][i1]
    q = next(v for v in mesh.tets[t2] if v not in fkey)
    pts = mesh.points
    defs = []
    for k in range(3):
        a, b = f[k], f[(k + 1) % 3]
        if orient3d(pts[a], pts[b], pts[q], pts[p]) <= 0:
            return None
        defs.append(((a, b, q, p), mesh.tet_mat[t1]))
    return owners, defs


def plan_flip32(mesh, ekey):
    """Replacement tets of a 3-2 flip, or None when the flip is illegal."""
    if ekey in mesh.segments:
        return None
    u, v = ekey
    owners = mesh.tets_around_edge(u, v)
    if len(owners) != 3:
        return None
    mats = {mesh.tet_mat[t] for t in owners}
    if len(mats) > 1:
        return None
    ring = []
    for t in owners:
        for w in mesh.tets[t]:
            if w != u and w != v and w not in ring:
                ring.append(w)
    if len(ring) != 3:
        return None
    # every side face (u, v, ring vertex) must be interior and unprotected
    for w in ring:
        k = face_key(u, v, w)
        if k in mesh.facets or len(mesh.tets_with_face(k)) != 2:
            return None
    x, y, z = ring
    pts = mesh.points
    o = orient3d(pts[x], pts[y], pts[z], pts[u])
    if o == 0:
        return None
    if o < 0:
        x, y = y, x
    if orient3d(pts[x], pts[z], pts[y], pts[v]) <= 0:
        return None
    mat = mesh.tet_mat[owners[0]]
    return owners, [((x, y, z, u), mat), ((x, z, y, v), mat)]


def ring_around_edge(mesh, a, b):
    """Tets around interior edge (a, b) in cyclic order together with
    the ring vertices; None when the edge touches the hull."""
    owners = mesh.tets_around_edge(a, b)
    if not owners:
        return None
    t0 = owners[0]
    first = [v for v in mesh.tets[t0] if v != a and v != b]
    if len(first) != 2:
        return None
    ring = [first[0]]
    tets = []
    t = t0
    u = first[0]
    for _ in range(len(owners) + 1):
        tets.append(t)
        w = next(v for v in mesh.tets[t] if v != a and v != b and v != u)
        j = mesh.face_slot(t, face_key(a, b, w))
        n = mesh.neighbor[t][j]
        if n == -1:
            return None  # open ring: hull edge
        if n == t0:
            break  # w closes the cycle back to ring[0]
        ring.append(w)
        t = n
        u = w
    else:
        return None
    if len(tets) != len(owners):
        return None
    return tets, ring


def _polygon_triangulations(n):
    """All triangulations of a convex-position polygon 0..n-1 (as index
    triples); n <= 7 keeps the count at <= 42."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def rec(i, j):
        if j - i < 2:
            return ((),)
        out = []
        for k in range(i + 1, j):
            for left in rec(i, k):
                for right in rec(k, j):
                    out.append(left + ((i, k, j),) + right)
        return tuple(out)

    return rec(0, n - 1)


def plan_edge_removal(mesh, ekey, score=None, max_ring=7):
    """Replace the tets around an interior edge by tets over a
    triangulation of the ring polygon (3-2 flip generalized to larger
    rings).  Picks the valid triangulation with the best ``score``
    (default: none needed, first valid wins).  Returns (owners, defs) or
    None."""
    if ekey in mesh.segments:
        return None
    a, b = ekey
    rr = ring_around_edge(mesh, a, b)
    if rr is None:
        return None
    owners, ring = rr
    m = len(ring)
    if m < 3 or m > max_ring:
        return None
    mats = {mesh.tet_mat[t] for t in owners}
    if len(mats) > 1:
        return None
    for w in ring:
        if face_key(a, b, w) in mesh.facets:
            return None
    mat = mats.pop()
    pts = mesh.points
    pa, pb = pts[a], pts[b]
    best = None
    best_score = None
    for cyc in (ring, ring[::-1]):
        for tri_set in _polygon_triangulations(m):
            defs = []
            ok = True
            for (i, j, k) in tri_set:
                x, y, z = cyc[i], cyc[j], cyc[k]
                if orient3d(pts[x], pts[y], pts[z], pa) <= 0:
                    ok = False
                    break
                if orient3d(pts[x], pts[z], pts[y], pb) <= 0:
                    ok = False
                    break
                defs.append(((x, y, z, a), mat))
                defs.append(((x, z, y, b), mat))
            if not ok:
                continue
            if score is None:
                return owners, defs
            s = score(defs)
            if best_score is None or s < best_score:
                best_score = s
                best = defs
        if best is not None:
            break  # orientation fixed by the first valid variant
    if best is None:
        return None
    return owners, best


def _flip23(mesh, fkey):
    plan = plan_flip23(mesh, fkey)
    if plan is None:
        return "blocked"
    _replace_tets(mesh, plan[0], plan[1])
    return "flipped-2-3"


def _flip32(mesh, ekey):
    plan = plan_flip32(mesh, ekey)
    if plan is None:
        return "blocked"
    _replace_tets(mesh, plan[0], plan[1])
    return "flipped-3-2"


# ---------------------------------------------------------------------------
# bootstrap


def delaunay_from_points(points, material=1):
    """Delaunay tetrahedralization of a point cloud by incremental
    insertion into an enclosing super-tet (removed afterwards).  Points
    are inserted in input order."""
    pts = [(float(p[0]), float(p[1]), float(p[2])) for p in points]
    if len(pts) < 4:
        raise CoplanarPointsError("need at least 4 points")
    lo = [min(p[i] for p in pts) for i in range(3)]
    hi = [max(p[i] for p in pts) for i in range(3)]
    diag = math.dist(lo, hi)
    if diag == 0.0:
        raise CoplanarPointsError("all points coincide")
    c = [(lo[i] + hi[i]) / 2.0 for i in range(3)]
    m = SUPER_MARGIN * diag

    mesh = TetMesh()
    mesh.snap_tol = SNAP_REL * diag
    mesh.add_point((c[0] - 2 * m, c[1] - m, c[2] - m))
    mesh.add_point((c[0] + 2 * m, c[1] - m, c[2] - m))
    mesh.add_point((c[0], c[1] + 2 * m, c[2] - m))
    mesh.add_point((c[0], c[1], c[2] + 2 * m))
    mesh.add_tet((0, 1, 2, 3), material=material, reorient=True)

    last = 0
    for p in pts:
        new_ids = insert_point(mesh, p, hint=last)
        last = new_ids[-1]

    for t in mesh.live_tets():
        if any(v < 4 for v in mesh.tets[t]):
            mesh.kill_tet(t)
    if mesh.n_live == 0:
        raise CoplanarPointsError("input points are coplanar")
    mesh.compact()
    mesh.snap_tol = SNAP_REL * diag
    return mesh


# ---------------------------------------------------------------------------
# surface-constrained meshing


def _edge_facet_map(facets):
    out = {}
    for fk in facets:
        a, b, c = fk
        for e in ((a, b), (b, c), (a, c)):
            out.setdefault(seg_key(*e), []).append(fk)
    return out


def _diagonal_point(mesh, a, c, b, d):
    """Intersection of quad diagonals (a,c) x (b,d); coordinates shared
    exactly by all four corners are preserved exactly."""
    pa, pc = mesh.points[a], mesh.points[c]
    pb, pd = mesh.points[b], mesh.points[d]
    u = [pc[i] - pa[i] for i in range(3)]
    v = [pd[i] - pb[i] for i in range(3)]
    w = [pb[i] - pa[i] for i in range(3)]
    uu = sum(x * x for x in u)
    vv = sum(x * x for x in v)
    uv = sum(u[i] * v[i] for i in range(3))
    uw = sum(u[i] * w[i] for i in range(3))
    vw = sum(v[i] * w[i] for i in range(3))
    den = uu * vv - uv * uv
    if den <= 0:
        raise FacetRecoveryError("degenerate quad diagonals")
    s = (uw * vv - uv * vw) / den
    p = [pa[i] + s * u[i] for i in range(3)]
    for i in range(3):
        if pa[i] == pb[i] == pc[i] == pd[i]:
            p[i] = pa[i]
    return tuple(p)


def _has_edge(mesh, a, b):
    for t in mesh.incident_tets(a):
        if b in mesh.tets[t]:
            return True
    return False


def recover_facets(mesh, max_rounds=None):
    """Make every protected facet a mesh face.

    Handles the tie-breaking mismatches of cospherical configurations
    (planar quads whose mesh diagonal differs from the input diagonal) by
    inserting the diagonal intersection point; general non-planar recovery
    is out of scope and raises FacetRecoveryError.
    """
    rounds = max_rounds if max_rounds is not None else 4 * len(mesh.facets) + 16
    for _ in range(rounds):
        missing = [fk for fk in mesh.facets if not mesh.has_face(fk)]
        if not missing:
            return mesh
        progressed = False
        emap = _edge_facet_map(mesh.facets)
        for fk in missing:
            if fk not in mesh.facets or mesh.has_face(fk):
                continue  # replaced or fixed as a side effect of an earlier split
            a, b, c = fk
            absent = [e for e in ((a, c), (a, b), (b, c)) if not _has_edge(mesh, *e)]
            if not absent:
                # all edges exist but the face does not: split at centroid
                pa, pb, pc = (mesh.points[v] for v in fk)
                cen = tuple((pa[i] + pb[i] + pc[i]) / 3.0 for i in range(3))
                try:
                    insert_point(mesh, cen, constraint=("facet", fk))
                    progressed = True
                except DelaunayError:
                    continue
                continue
            e = seg_key(*absent[0])
            partners = [g for g in emap.get(e, []) if g != fk]
            if not partners:
                raise FacetRecoveryError(
                    f"missing edge {e} of facet {fk} has no quad partner"
                )
            g = partners[0]
            u, v = e
            b1 = next(w for w in fk if w != u and w != v)
            d1 = next(w for w in g if w != u and w != v)
            p = _diagonal_point(mesh, u, v, b1, d1)
            try:
                insert_point(mesh, p, constraint=("edge", e))
                progressed = True
            except DelaunayError as exc:
                raise FacetRecoveryError(
                    f"diagonal insertion for facet {fk} failed: {exc}"
                ) from exc
        if not progressed:
            break
    missing = [fk for fk in mesh.facets if not mesh.has_face(fk)]
    if missing:
        raise FacetRecoveryError(f"{len(missing)} facets unrecoverable: {missing[:4]}")
    return mesh


def _components(mesh):
    """Connected components over live tets, not crossing protected faces."""
    comp = {}
    cid = 0
    for t0 in mesh.live_tets():
        if t0 in comp:
            continue
        stack = [t0]
        comp[t0] = cid
        while stack:
            t = stack.pop()
            for i in range(4):
                n = mesh.neighbor[t][i]
                if n == -1 or n in comp or not mesh.alive[n]:
                    continue
                if face_key(*mesh.face_of(t, i)) in mesh.facets:
                    continue
                comp[n] = cid
                stack.append(n)
        cid += 1
    return comp, cid


def tetrahedralize(points, triangles, patches=None, region_seeds=None):
    """Volume mesh from a closed surface triangulation.

    ``triangles`` are protected facets (vertex index triples into
    ``points``), ``patches`` their patch ids.  ``region_seeds`` is a list
    of (point, material) pairs marking the enclosed regions; unseeded
    interior regions default to material 1, and the region connected to
    the enclosing super-tet is discarded as outside.
    """
    if patches is None:
        patches = [1] * len(triangles)

    pts = [(float(p[0]), float(p[1]), float(p[2])) for p in points]
    lo = [min(p[i] for p in pts) for i in range(3)]
    hi = [max(p[i] for p in pts) for i in range(3)]
    diag = math.dist(lo, hi)
    c = [(lo[i] + hi[i]) / 2.0 for i in range(3)]
    m = SUPER_MARGIN * diag

    mesh = TetMesh()
    mesh.snap_tol = SNAP_REL * diag
    mesh.add_point((c[0] - 2 * m, c[1] - m, c[2] - m))
    mesh.add_point((c[0] + 2 * m, c[1] - m, c[2] - m))
    mesh.add_point((c[0], c[1] + 2 * m, c[2] - m))
    mesh.add_point((c[0], c[1], c[2] + 2 * m))
    mesh.add_tet((0, 1, 2, 3), reorient=True)
    last = 0
    for p in pts:
        new_ids = insert_point(mesh, p, hint=last)
        last = new_ids[-1]

    for tri, patch in zip(triangles, patches):
        mesh.facets[face_key(tri[0] + 4, tri[1] + 4, tri[2] + 4)] = patch

    recover_facets(mesh)

    comp, ncomp = _components(mesh)
    outside = set()
    for t in mesh.live_tets():
        if any(v < 4 for v in mesh.tets[t]):
            outside.add(comp[t])
    mats = {}
    if region_seeds:
        for seed, material in region_seeds:
            t = locate(mesh, seed)
            mats[comp[t]] = material
    for t in mesh.live_tets():
        cidx = comp[t]
        if cidx in outside:
            mesh.kill_tet(t)
        else:
            mesh.tet_mat[t] = mats.get(cidx, 1)
    if mesh.n_live == 0:
        raise DelaunayError("no interior region enclosed by the surface")
    mesh.compact()
    mesh.snap_tol = SNAP_REL * diag

    from .smooth import classify_boundary_vertices

    classify_boundary_vertices(mesh)
    return mesh
